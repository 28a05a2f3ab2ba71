#pragma once

#include <Eigen/Core>

namespace trajverb {

/// Row-major dense matrix of doubles; rows are time steps.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace trajverb
