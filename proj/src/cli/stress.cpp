#include "trajverb/cli/stress.hpp"

#include "trajverb/features/raster.hpp"
#include "trajverb/oracle/labeler.hpp"
#include "trajverb/rng.hpp"
#include "trajverb/sim/generator.hpp"

namespace trajverb::cli {

std::vector<StressClip> build_stress_pool(const ExperimentConfig& cfg) {
  constexpr int kStride = 10;
  std::vector<StressClip> out;
  std::unique_ptr<features::Rasterizer> raster;
  for (int i = 0; i < cfg.stress.episodes; ++i) {
    const auto script = i % 2 == 0 ? sim::ScriptTag::kDropFromEdge : sim::ScriptTag::kPush;
    auto ep = std::make_shared<const sim::Episode>(
        sim::generate_episode(derive_seed(cfg.seed_root, "stress", static_cast<std::uint64_t>(i)),
                              cfg.scene, script));
    if (!raster || !raster->compatible_with(ep->config)) {
      raster = std::make_unique<features::Rasterizer>(cfg.camera, ep->config);
    }
    std::vector<bool> hidden(ep->frames.size());
    for (std::size_t f = 0; f < ep->frames.size(); ++f) {
      hidden[f] = raster->object_coverage(ep->frames[f], ep->config).fully_occluded();
    }
    for (auto& clip : oracle::extract_clips(ep, kStride)) {
      int n = 0;
      for (int f = 0; f < sim::kClipFrames; ++f) n += hidden[static_cast<std::size_t>(clip.start_frame() + f)];
      const double frac = static_cast<double>(n) / sim::kClipFrames;
      if (frac < cfg.stress.min_occluded_fraction) continue;
      const bool fall = oracle::label_clip(clip, oracle::Verb::kFall, cfg.oracle);
      out.push_back({std::move(clip), fall, frac});
    }
  }
  int pos = 0;
  for (const auto& c : out) pos += c.fall;
  if (pos == 0 || pos == static_cast<int>(out.size())) {
    throw Error("stress pool needs both fall and non-fall clips; got " + std::to_string(pos) +
                " of " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace trajverb::cli
