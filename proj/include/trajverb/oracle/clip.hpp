#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "trajverb/sim/scene.hpp"

namespace trajverb::oracle {

/// A 90-frame window of an episode plus the 60 frames that follow it.
/// Clips share ownership of their episode, so copying one is cheap.
class Clip {
 public:
  Clip(std::shared_ptr<const sim::Episode> episode, int start_frame);

  std::uint64_t episode_seed() const { return episode_->seed; }
  int start_frame() const { return start_; }
  const sim::SceneConfig& scene() const { return episode_->config; }
  const sim::Episode& episode() const { return *episode_; }

  std::span<const sim::Frame> frames() const {
    return {episode_->frames.data() + start_, sim::kClipFrames};
  }
  std::span<const sim::Frame> future() const {
    return {episode_->frames.data() + start_ + sim::kClipFrames, sim::kFutureFrames};
  }

 private:
  std::shared_ptr<const sim::Episode> episode_;
  int start_;
};

/// Every window [s, s + 90) with a full 60-frame future, for
/// s = 0, stride, 2 * stride, ...
std::vector<Clip> extract_clips(std::shared_ptr<const sim::Episode> episode, int stride);

}  // namespace trajverb::oracle
