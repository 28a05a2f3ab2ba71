#include "trajverb/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "trajverb/error.hpp"

namespace trajverb::nn {

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (!params.same_layout(grads)) throw Error("adam_step: gradient layout differs from parameters");
  grads.check_finite("gradient");
  const auto n = params.size();
  if (state.m.size() == 0) {
    state.m = Eigen::VectorXd::Zero(n);
    state.v = Eigen::VectorXd::Zero(n);
  }
  if (state.m.size() != n) throw Error("adam_step: optimizer state sized for another model");
  ++state.step;
  const Eigen::VectorXd& g = grads.values();
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.values().array() -= state.learning_rate * (state.m.array() / c1) /
                             ((state.v.array() / c2).sqrt() + state.epsilon);
}

double clip_grad_norm(ParamSet& grads, double max_norm) {
  const double norm = grads.values().norm();
  if (max_norm > 0.0 && norm > max_norm) grads.values() *= max_norm / norm;
  return norm;
}

GradCheckResult check_gradients(const std::function<double(const ParamSet&)>& loss,
                                const ParamSet& params, const ParamSet& analytic, double eps,
                                double floor) {
  if (!params.same_layout(analytic)) throw Error("check_gradients: layout mismatch");
  GradCheckResult result;
  ParamSet probe = params;
  for (const auto& b : params.blocks()) {
    for (Eigen::Index k = 0; k < b.size(); ++k) {
      const Eigen::Index idx = b.offset + k;
      const double orig = probe.values()[idx];
      probe.values()[idx] = orig + eps;
      const double up = loss(probe);
      probe.values()[idx] = orig - eps;
      const double down = loss(probe);
      probe.values()[idx] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.values()[idx];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_block = b.name;
        result.worst_index = k;
      }
    }
  }
  return result;
}

}  // namespace trajverb::nn
