#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Core>

#include "trajverb/nn/params.hpp"

namespace trajverb::nn {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  explicit AdamState(double lr = 1e-3) : learning_rate(lr) {}
};

/// One bias-corrected Adam update of params in place. Moments are sized on
/// first use.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

/// Rescales grads so their global L2 norm is at most max_norm; returns the
/// norm before clipping. A non-positive max_norm disables clipping.
double clip_grad_norm(ParamSet& grads, double max_norm);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_block;
  Eigen::Index worst_index = -1;
};

/// Compares analytic gradients with central differences (step eps) on every
/// parameter. Relative error is |a - n| / max(|a|, |n|, floor); the floor
/// keeps entries whose true gradient is zero from dividing by rounding noise.
GradCheckResult check_gradients(const std::function<double(const ParamSet&)>& loss,
                                const ParamSet& params, const ParamSet& analytic,
                                double eps = 1e-5, double floor = 1e-6);

}  // namespace trajverb::nn
