#pragma once

#include <memory>
#include <vector>

#include "trajverb/cli/config.hpp"
#include "trajverb/oracle/clip.hpp"

namespace trajverb::cli {

struct StressClip {
  oracle::Clip clip;
  bool fall = false;
  /// Share of the 90 input frames in which the counter hides the object
  /// completely.
  double occluded_fraction = 0.0;
};

/// Held-out drop-from-edge and push episodes (seeds derived from the root
/// under "stress", disjoint from the training pool), cut into clips every 10
/// frames. Keeps clips whose occluded fraction reaches
/// `stress.min_occluded_fraction`. Throws when the kept set lacks a fall
/// positive or negative.
std::vector<StressClip> build_stress_pool(const ExperimentConfig& cfg);

}  // namespace trajverb::cli
