#include "trajverb/nn/losses.hpp"

#include <cmath>

#include "trajverb/error.hpp"

namespace trajverb::nn {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::VectorXd discount_weights(int steps, double gamma) {
  if (steps < 1) throw Error("discount_weights needs at least one step");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("discount gamma must lie in (0, 1]");
  Eigen::VectorXd w(steps);
  double g = 1.0;
  for (int t = 0; t < steps; ++t) {
    w[t] = g;
    g *= gamma;
  }
  return w / w.sum();
}

double discounted_mse(const Tensor2& pred, const Tensor2& target, double gamma) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error("discounted_mse: shape mismatch");
  }
  const Eigen::VectorXd w = discount_weights(static_cast<int>(pred.rows()), gamma);
  const Eigen::VectorXd per_row = (pred - target).array().square().rowwise().mean();
  return w.dot(per_row);
}

double bce_multilabel(const Eigen::VectorXd& logits, const Eigen::VectorXd& labels) {
  if (logits.size() != labels.size() || logits.size() == 0) {
    throw Error("bce_multilabel: length mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) sum += softplus(logits[i]) - labels[i] * logits[i];
  return sum / static_cast<double>(logits.size());
}

}  // namespace trajverb::nn
