#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "trajverb/oracle/clip.hpp"

namespace trajverb::oracle {

enum class Verb {
  kFall,
  kRise,
  kSlide,
  kRoll,
  kBounce,
  kSpin,
  kStop,
  kStart,
  kPush,
  kPull,
  kDrop,
  kToss,
};
inline constexpr int kVerbCount = 12;

std::string_view to_string(Verb verb);
Verb verb_from_string(std::string_view name);
std::vector<Verb> default_verbs();

/// Thresholds for the kinematic verb detectors. Distances in meters, speeds
/// in m/s, angular rates in rad/s, windows in frames.
struct OracleConfig {
  double fall_drop = 0.1;
  double rise_height = 0.1;
  double contact_travel = 0.1;
  double slip_speed = 0.02;
  double roll_spin = 1.0;
  double bounce_rebound = 0.05;
  double spin_rate = 2.0;
  double spin_travel = 0.05;
  double moving_speed = 0.2;
  double rest_speed = 0.02;
  int rest_frames = 10;
  double push_cos = 0.7;
  double push_min_speed = 0.1;
  int push_min_frames = 3;
  int drop_window = 30;
  double toss_speed = 0.5;

  void validate() const;
};

/// Kind of motion over one maximal run of frames resting on the same surface
/// (including frames where the hand pushes or drags the object along it). The slip
/// threshold assigns each moving frame to exactly one of slide or roll; the
/// segment takes whichever accumulated more travel, provided it exceeds
/// `contact_travel`.
struct ContactSegment {
  int begin = 0;
  int end = 0;  // exclusive
  double slide_travel = 0.0;
  double roll_travel = 0.0;
  bool slides = false;
  bool rolls = false;
};

std::vector<ContactSegment> contact_segments(std::span<const sim::Frame> frames,
                                             const sim::SceneConfig& scene,
                                             const OracleConfig& cfg);

bool label_frames(std::span<const sim::Frame> frames, const sim::SceneConfig& scene, Verb verb,
                  const OracleConfig& cfg);

/// Deterministic yes/no judgement of whether `verb` happens in the clip.
bool label_clip(const Clip& clip, Verb verb, const OracleConfig& cfg);

}  // namespace trajverb::oracle
