#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "trajverb/features/raster.hpp"

namespace trajverb::features {

inline constexpr std::uint64_t kEmbedSeed = 0xFEA7;
inline constexpr int kEmbedDim = 64;
inline constexpr int kEmbedWidth = 32;
inline constexpr int kEmbedHeight = 24;

/// Frozen random image embedding: tanh(W * pixels + b) with W and b drawn
/// once from N(0, 1/768) and never trained.
class ImageEmbedder {
 public:
  explicit ImageEmbedder(std::uint64_t seed = kEmbedSeed);

  /// Throws when the raster is not 32x24.
  Eigen::VectorXd embed(const Raster& raster) const;

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }

 private:
  Eigen::MatrixXd weights_;  // 64 x 768
  Eigen::VectorXd bias_;
};

}  // namespace trajverb::features
