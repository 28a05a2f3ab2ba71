#include "trajverb/features/embed.hpp"

#include <cmath>
#include <string>

#include "trajverb/rng.hpp"

namespace trajverb::features {

ImageEmbedder::ImageEmbedder(std::uint64_t seed) {
  constexpr int kInputs = kEmbedWidth * kEmbedHeight;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(kInputs));
  Rng rng(seed);
  weights_.resize(kEmbedDim, kInputs);
  bias_.resize(kEmbedDim);
  for (int r = 0; r < kEmbedDim; ++r) {
    for (int c = 0; c < kInputs; ++c) weights_(r, c) = rng.normal(0.0, stddev);
  }
  for (int r = 0; r < kEmbedDim; ++r) bias_(r) = rng.normal(0.0, stddev);
}

Eigen::VectorXd ImageEmbedder::embed(const Raster& raster) const {
  if (raster.width != kEmbedWidth || raster.height != kEmbedHeight ||
      raster.pixels.size() != static_cast<std::size_t>(kEmbedWidth * kEmbedHeight)) {
    throw Error("image embedding expects a 32x24 raster, got " + std::to_string(raster.width) +
                "x" + std::to_string(raster.height));
  }
  const Eigen::Map<const Eigen::VectorXd> px(raster.pixels.data(),
                                             static_cast<Eigen::Index>(raster.pixels.size()));
  return (weights_ * px + bias_).array().tanh().matrix();
}

}  // namespace trajverb::features
