#pragma once

#include <Eigen/Core>

#include "trajverb/tensor.hpp"

namespace trajverb::nn {

/// log(1 + e^z) without overflow.
double softplus(double z);
double sigmoid(double z);

/// Per-step weights gamma^(t-1), t = 1..steps, scaled to sum to 1.
Eigen::VectorXd discount_weights(int steps, double gamma);

/// Weighted mean of per-row MSEs with weights from discount_weights().
double discounted_mse(const Tensor2& pred, const Tensor2& target, double gamma);

/// Mean over entries of -[y log s(z) + (1 - y) log(1 - s(z))], evaluated as
/// softplus(z) - y * z.
double bce_multilabel(const Eigen::VectorXd& logits, const Eigen::VectorXd& labels);

}  // namespace trajverb::nn
