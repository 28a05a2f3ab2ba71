#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "trajverb/nn/params.hpp"
#include "trajverb/rng.hpp"
#include "trajverb/tensor.hpp"

namespace trajverb::nn {

struct EncoderShape {
  int input_dim = 0;
  int hidden = 0;
  int ff_layers = 1;

  void validate() const;
  bool operator==(const EncoderShape&) const = default;
};

/// Feed-forward tanh stack (d -> h, then h -> h), an LSTM cell (h -> h, gates
/// stacked i, f, g, o), and a dense decoder h -> d that predicts the next
/// feature row.
///
/// Blocks: ff<k>.W, ff<k>.b, lstm.Wx, lstm.Wh, lstm.b, dec.W, dec.b.
struct EncoderParams {
  EncoderShape shape;
  ParamSet params;

  /// All-zero weights and biases (forget bias included).
  static EncoderParams zeros(const EncoderShape& shape);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except the
  /// forget gate bias, which starts at 1.
  static EncoderParams random(const EncoderShape& shape, Rng& rng);
};

/// Dense map from the final hidden state to `out` values. Blocks: W, b.
struct HeadParams {
  int in = 0;
  int out = 0;
  ParamSet params;

  static HeadParams zeros(int in, int out);
  static HeadParams random(int in, int out, Rng& rng);
};

enum class RolloutMode { kClosedLoop, kTeacherForced };

struct EncodeResult {
  Tensor2 hidden;  // steps x h
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

/// Runs the feed-forward layers and the LSTM over every row of x.
EncodeResult encode(const EncoderParams& p, const Tensor2& x);

/// Decoder output for one hidden state.
Eigen::VectorXd decode(const EncoderParams& p, const Eigen::VectorXd& h);

/// Predicts `horizon` future rows starting from the final state of encode(x).
/// Closed loop feeds each prediction back in as the next input; teacher
/// forcing feeds the true row instead (`teacher` must then hold >= horizon - 1
/// rows).
Tensor2 rollout(const EncoderParams& p, const Tensor2& x, int horizon,
                RolloutMode mode = RolloutMode::kClosedLoop, const Tensor2* teacher = nullptr);

/// Batch of equal-length sequences laid out per timestep: at[t] is d x B with
/// one column per sequence.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> at;

  static SequenceBatch from(std::span<const Tensor2> sequences);
  int steps() const { return static_cast<int>(at.size()); }
  int size() const { return at.empty() ? 0 : static_cast<int>(at.front().cols()); }
  int dim() const { return at.empty() ? 0 : static_cast<int>(at.front().rows()); }
};

/// Pretraining objective averaged over the batch: discounted MSE between the
/// rollout from each input and its target future. When `grad` is non-null it
/// receives the gradient (overwritten, same layout as p).
double pretrain_loss(const EncoderParams& p, const SequenceBatch& input,
                     const SequenceBatch& target, double gamma, RolloutMode mode,
                     EncoderParams* grad);

/// Head outputs (out x B) on the final hidden state of each input sequence.
Eigen::MatrixXd head_forward(const EncoderParams& enc, const HeadParams& head,
                             const SequenceBatch& input);

/// Masked multi-label BCE: sum(mask * bce) / sum(mask) with labels and mask
/// shaped out x B. Either gradient pointer may be null (a null encoder
/// gradient skips backpropagation through time).
double classifier_loss(const EncoderParams& enc, const HeadParams& head,
                       const SequenceBatch& input, const Eigen::MatrixXd& labels,
                       const Eigen::MatrixXd& mask, EncoderParams* enc_grad,
                       HeadParams* head_grad);

/// Mean squared error of the head output against targets (out x B), averaged
/// over outputs and batch.
double regression_loss(const EncoderParams& enc, const HeadParams& head,
                       const SequenceBatch& input, const Eigen::MatrixXd& targets,
                       EncoderParams* enc_grad, HeadParams* head_grad);

}  // namespace trajverb::nn
