#include "trajverb/oracle/clip.hpp"

#include <string>

namespace trajverb::oracle {

Clip::Clip(std::shared_ptr<const sim::Episode> episode, int start_frame)
    : episode_(std::move(episode)), start_(start_frame) {
  if (!episode_) throw Error("clip without episode");
  const auto needed = static_cast<std::size_t>(start_) + sim::kMinEpisodeFrames;
  if (start_ < 0 || needed > episode_->frames.size()) {
    throw Error("clip at frame " + std::to_string(start_) + " does not fit episode " +
                std::to_string(episode_->seed));
  }
}

std::vector<Clip> extract_clips(std::shared_ptr<const sim::Episode> episode, int stride) {
  if (stride < 1) throw Error("clip stride must be >= 1");
  std::vector<Clip> clips;
  const int length = static_cast<int>(episode->frames.size());
  for (int s = 0; s + sim::kMinEpisodeFrames <= length; s += stride) {
    clips.emplace_back(episode, s);
  }
  return clips;
}

}  // namespace trajverb::oracle
