#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "trajverb/error.hpp"

namespace trajverb::sim {

/// Meters, z up.
using Vec3 = Eigen::Vector3d;
/// Unit quaternion; Eigen stores it as (x, y, z, w).
using Quat = Eigen::Quaterniond;

inline constexpr int kFps = 60;
inline constexpr double kDt = 1.0 / kFps;
inline constexpr int kClipFrames = 90;
inline constexpr int kFutureFrames = 60;
inline constexpr int kMinEpisodeFrames = kClipFrames + kFutureFrames;
inline constexpr int kMaxEpisodeFrames = 600;
inline constexpr int kRestFramesToStop = 30;

/// Radius of the kinematic hand used for push contacts.
inline constexpr double kHandRadius = 0.025;
/// A sphere rolls without slipping only at or above this friction coefficient.
inline constexpr double kRollingFrictionThreshold = 0.15;
/// Rebounds slower than this are absorbed.
inline constexpr double kBounceCutoff = 0.05;

enum class Shape { kSphere, kCube };

enum class Contact : int { kNone = 0, kCounter = 1, kFloor = 2, kHand = 3 };

enum class ScriptTag {
  kReach,
  kLiftCarryPlace,
  kPush,
  kDropFromEdge,
  kToss,
  kSpinInPlace,
  kPullBack,
};
inline constexpr int kScriptCount = 7;

std::string_view to_string(Shape shape);
std::string_view to_string(ScriptTag tag);
Shape shape_from_string(std::string_view name);
ScriptTag script_from_string(std::string_view name);

struct SceneConfig {
  double gravity = 9.81;
  double counter_height = 0.9;
  /// Half-width of the square counter top, centred on the origin.
  double counter_extent = 0.5;
  Shape object_shape = Shape::kSphere;
  double object_radius = 0.1;
  double friction_mu = 0.4;
  double restitution = 0.4;
  double hand_speed = 0.8;
  /// When set, the generator samples shape, friction and restitution per
  /// episode; the sampled values are stored in the episode.
  bool randomize_materials = true;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;

  /// Height of the supporting surface below (x, y): the counter top when the
  /// point lies over it, the floor otherwise.
  double support_height(double x, double y) const;
  bool over_counter(double x, double y) const;
};

struct Frame {
  std::int64_t t_index = 0;
  Vec3 hand_pos = Vec3::Zero();
  Vec3 obj_pos = Vec3::Zero();
  Quat obj_rot = Quat::Identity();
  Vec3 obj_vel = Vec3::Zero();
  Vec3 obj_angvel = Vec3::Zero();
  Contact contact = Contact::kNone;

  bool all_finite() const;
};

struct Episode {
  std::uint64_t seed = 0;
  SceneConfig config;
  ScriptTag script_tag = ScriptTag::kReach;
  /// Frame at which the hand program started acting on the scene.
  std::int64_t script_start = 0;
  std::vector<Frame> frames;
};

class IntegrationDiverged : public Error {
 public:
  explicit IntegrationDiverged(std::int64_t t_index);
  std::int64_t t_index() const { return t_index_; }

 private:
  std::int64_t t_index_;
};

}  // namespace trajverb::sim
