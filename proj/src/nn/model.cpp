#include "trajverb/nn/model.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "trajverb/error.hpp"
#include "trajverb/nn/losses.hpp"

namespace trajverb::nn {
namespace {

using Eigen::MatrixXd;

std::string ff_name(int layer, const char* part) { return fmt::format("ff{}.{}", layer, part); }

template <typename PS, typename M>
struct Blocks {
  Blocks(PS& ps, int layers)
      : Wx(ps.mat("lstm.Wx")),
        Wh(ps.mat("lstm.Wh")),
        b(ps.mat("lstm.b")),
        dW(ps.mat("dec.W")),
        db(ps.mat("dec.b")) {
    for (int l = 0; l < layers; ++l) {
      ffW.push_back(ps.mat(ff_name(l, "W")));
      ffb.push_back(ps.mat(ff_name(l, "b")));
    }
  }

  M Wx, Wh, b, dW, db;
  std::vector<M> ffW, ffb;
};

using Weights = Blocks<const ParamSet, ConstMatMap>;
using Grads = Blocks<ParamSet, MatMap>;

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

struct Step {
  std::vector<MatrixXd> a;  // a[0] is the step input, a[l + 1] the output of ff layer l
  MatrixXd i, f, g, o, c, tc, h;
};

// Forward pass over a growing sequence of steps, keeping every intermediate
// needed for backpropagation through time.
class Trace {
 public:
  Trace(const EncoderParams& p, int batch)
      : w_(p.params, p.shape.ff_layers),
        hidden_(p.shape.hidden),
        zero_(MatrixXd::Zero(p.shape.hidden, batch)) {}

  const Weights& weights() const { return w_; }
  int size() const { return static_cast<int>(steps_.size()); }
  const Step& step(int s) const { return steps_[static_cast<std::size_t>(s)]; }
  const MatrixXd& h(int s) const { return s < 0 ? zero_ : step(s).h; }
  const MatrixXd& c(int s) const { return s < 0 ? zero_ : step(s).c; }

  void push(const MatrixXd& x) {
    Step st;
    st.a.reserve(w_.ffW.size() + 1);
    st.a.push_back(x);
    for (std::size_t l = 0; l < w_.ffW.size(); ++l) {
      MatrixXd pre = w_.ffW[l] * st.a.back();
      pre.colwise() += w_.ffb[l].col(0);
      st.a.push_back(pre.array().tanh().matrix());
    }
    const int n = hidden_;
    MatrixXd z = w_.Wx * st.a.back();
    z.noalias() += w_.Wh * h(size() - 1);
    z.colwise() += w_.b.col(0);
    st.i = sigmoid(z.topRows(n));
    st.f = sigmoid(z.middleRows(n, n));
    st.g = z.middleRows(2 * n, n).array().tanh().matrix();
    st.o = sigmoid(z.bottomRows(n));
    st.c = (st.f.array() * c(size() - 1).array() + st.i.array() * st.g.array()).matrix();
    st.tc = st.c.array().tanh().matrix();
    st.h = (st.o.array() * st.tc.array()).matrix();
    steps_.push_back(std::move(st));
  }

  MatrixXd decode(int s) const {
    MatrixXd y = w_.dW * h(s);
    y.colwise() += w_.db.col(0);
    return y;
  }

 private:
  Weights w_;
  int hidden_;
  MatrixXd zero_;
  std::vector<Step> steps_;
};

// Backpropagates through step s. On entry dh and dc hold the gradients with
// respect to h_s and c_s; on exit they hold those for h_{s-1} and c_{s-1}.
// When dx is non-null it receives the gradient with respect to the step input.
void backward_step(const Trace& tr, int s, MatrixXd& dh, MatrixXd& dc, Grads& g, MatrixXd* dx) {
  const Step& st = tr.step(s);
  const Weights& w = tr.weights();
  const auto n = st.h.rows();
  const auto one = [](const MatrixXd& m) { return 1.0 - m.array(); };

  dc.array() += dh.array() * st.o.array() * (1.0 - st.tc.array().square());
  MatrixXd dz(4 * n, st.h.cols());
  dz.topRows(n) = (dc.array() * st.g.array() * st.i.array() * one(st.i)).matrix();
  dz.middleRows(n, n) = (dc.array() * tr.c(s - 1).array() * st.f.array() * one(st.f)).matrix();
  dz.middleRows(2 * n, n) = (dc.array() * st.i.array() * (1.0 - st.g.array().square())).matrix();
  dz.bottomRows(n) = (dh.array() * st.tc.array() * st.o.array() * one(st.o)).matrix();
  dc.array() *= st.f.array();

  g.Wx.noalias() += dz * st.a.back().transpose();
  g.Wh.noalias() += dz * tr.h(s - 1).transpose();
  g.b.col(0) += dz.rowwise().sum();
  dh.noalias() = w.Wh.transpose() * dz;

  MatrixXd da = w.Wx.transpose() * dz;
  for (int l = static_cast<int>(w.ffW.size()) - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const MatrixXd dpre = (da.array() * (1.0 - st.a[li + 1].array().square())).matrix();
    g.ffW[li].noalias() += dpre * st.a[li].transpose();
    g.ffb[li].col(0) += dpre.rowwise().sum();
    if (l > 0 || dx != nullptr) da.noalias() = w.ffW[li].transpose() * dpre;
  }
  if (dx != nullptr) *dx = std::move(da);
}

void check_batch(const EncoderParams& p, const SequenceBatch& input, const char* what) {
  if (input.steps() == 0 || input.size() == 0) throw Error(fmt::format("{}: empty batch", what));
  if (input.dim() != p.shape.input_dim) {
    throw Error(fmt::format("{}: input dim {} does not match encoder dim {}", what, input.dim(),
                            p.shape.input_dim));
  }
}

Trace run_encoder(const EncoderParams& p, const SequenceBatch& input) {
  Trace tr(p, input.size());
  for (const auto& x : input.at) tr.push(x);
  return tr;
}

// Shared tail of the head losses: gradients of the head and, through the
// final hidden state, of the whole encoder.
void backward_head(const Trace& tr, const EncoderParams& enc, const HeadParams& head,
                   const MatrixXd& dout, EncoderParams* enc_grad, HeadParams* head_grad) {
  const MatrixXd& h_last = tr.h(tr.size() - 1);
  if (head_grad != nullptr) {
    *head_grad = HeadParams::zeros(head.in, head.out);
    head_grad->params.mat("W").noalias() = dout * h_last.transpose();
    head_grad->params.mat("b").col(0) = dout.rowwise().sum();
    head_grad->params.check_finite("gradient");
  }
  if (enc_grad != nullptr) {
    *enc_grad = EncoderParams::zeros(enc.shape);
    Grads g(enc_grad->params, enc.shape.ff_layers);
    MatrixXd dh = head.params.mat("W").transpose() * dout;
    MatrixXd dc = MatrixXd::Zero(dh.rows(), dh.cols());
    for (int s = tr.size() - 1; s >= 0; --s) backward_step(tr, s, dh, dc, g, nullptr);
    enc_grad->params.check_finite("gradient");
  }
}

MatrixXd apply_head(const HeadParams& head, const MatrixXd& h) {
  MatrixXd out = head.params.mat("W") * h;
  out.colwise() += head.params.mat("b").col(0);
  return out;
}

void fill_uniform(MatMap m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

}  // namespace

void EncoderShape::validate() const {
  if (input_dim < 1) throw ConfigError("model.input_dim", "must be >= 1");
  if (hidden < 1) throw ConfigError("model.hidden_width", "must be >= 1");
  if (ff_layers < 1) throw ConfigError("model.ff_layers", "must be >= 1");
}

EncoderParams EncoderParams::zeros(const EncoderShape& shape) {
  shape.validate();
  EncoderParams p;
  p.shape = shape;
  int in = shape.input_dim;
  for (int l = 0; l < shape.ff_layers; ++l) {
    p.params.add(ff_name(l, "W"), shape.hidden, in);
    p.params.add(ff_name(l, "b"), shape.hidden, 1);
    in = shape.hidden;
  }
  p.params.add("lstm.Wx", 4 * shape.hidden, shape.hidden);
  p.params.add("lstm.Wh", 4 * shape.hidden, shape.hidden);
  p.params.add("lstm.b", 4 * shape.hidden, 1);
  p.params.add("dec.W", shape.input_dim, shape.hidden);
  p.params.add("dec.b", shape.input_dim, 1);
  return p;
}

EncoderParams EncoderParams::random(const EncoderShape& shape, Rng& rng) {
  EncoderParams p = zeros(shape);
  int in = shape.input_dim;
  for (int l = 0; l < shape.ff_layers; ++l) {
    fill_uniform(p.params.mat(ff_name(l, "W")), 1.0 / std::sqrt(in), rng);
    in = shape.hidden;
  }
  const double bound = 1.0 / std::sqrt(shape.hidden);
  fill_uniform(p.params.mat("lstm.Wx"), bound, rng);
  fill_uniform(p.params.mat("lstm.Wh"), bound, rng);
  fill_uniform(p.params.mat("dec.W"), bound, rng);
  p.params.mat("lstm.b").middleRows(shape.hidden, shape.hidden).setOnes();
  return p;
}

HeadParams HeadParams::zeros(int in, int out) {
  if (in < 1 || out < 1) throw Error("head dimensions must be positive");
  HeadParams h;
  h.in = in;
  h.out = out;
  h.params.add("W", out, in);
  h.params.add("b", out, 1);
  return h;
}

HeadParams HeadParams::random(int in, int out, Rng& rng) {
  HeadParams h = zeros(in, out);
  fill_uniform(h.params.mat("W"), 1.0 / std::sqrt(in), rng);
  return h;
}

SequenceBatch SequenceBatch::from(std::span<const Tensor2> sequences) {
  SequenceBatch batch;
  if (sequences.empty()) return batch;
  const auto steps = sequences.front().rows();
  const auto dim = sequences.front().cols();
  const auto n = static_cast<Eigen::Index>(sequences.size());
  batch.at.assign(static_cast<std::size_t>(steps), MatrixXd(dim, n));
  for (Eigen::Index b = 0; b < n; ++b) {
    const Tensor2& seq = sequences[static_cast<std::size_t>(b)];
    if (seq.rows() != steps || seq.cols() != dim) throw Error("ragged sequence batch");
    for (Eigen::Index t = 0; t < steps; ++t) batch.at[static_cast<std::size_t>(t)].col(b) = seq.row(t).transpose();
  }
  return batch;
}

EncodeResult encode(const EncoderParams& p, const Tensor2& x) {
  const Tensor2 seqs[] = {x};
  const SequenceBatch batch = SequenceBatch::from(seqs);
  check_batch(p, batch, "encode");
  const Trace tr = run_encoder(p, batch);
  EncodeResult r;
  r.hidden.resize(tr.size(), p.shape.hidden);
  for (int s = 0; s < tr.size(); ++s) r.hidden.row(s) = tr.h(s).col(0).transpose();
  r.h = tr.h(tr.size() - 1).col(0);
  r.c = tr.c(tr.size() - 1).col(0);
  return r;
}

Eigen::VectorXd decode(const EncoderParams& p, const Eigen::VectorXd& h) {
  return p.params.mat("dec.W") * h + p.params.mat("dec.b").col(0);
}

Tensor2 rollout(const EncoderParams& p, const Tensor2& x, int horizon, RolloutMode mode,
                const Tensor2* teacher) {
  if (horizon < 1) throw Error("rollout horizon must be >= 1");
  if (mode == RolloutMode::kTeacherForced && (teacher == nullptr || teacher->rows() < horizon - 1)) {
    throw Error("teacher-forced rollout needs the true future rows");
  }
  const Tensor2 seqs[] = {x};
  const SequenceBatch batch = SequenceBatch::from(seqs);
  check_batch(p, batch, "rollout");
  Trace tr = run_encoder(p, batch);
  Tensor2 out(horizon, p.shape.input_dim);
  for (int k = 0; k < horizon; ++k) {
    const MatrixXd y = tr.decode(tr.size() - 1);
    out.row(k) = y.col(0).transpose();
    if (k + 1 < horizon) {
      tr.push(mode == RolloutMode::kClosedLoop ? y : MatrixXd(teacher->row(k).transpose()));
    }
  }
  return out;
}

double pretrain_loss(const EncoderParams& p, const SequenceBatch& input,
                     const SequenceBatch& target, double gamma, RolloutMode mode,
                     EncoderParams* grad) {
  check_batch(p, input, "pretrain_loss");
  if (target.size() != input.size() || target.dim() != input.dim() || target.steps() < 1) {
    throw Error("pretrain_loss: target batch does not match input batch");
  }
  const int t_in = input.steps();
  const int horizon = target.steps();
  const bool closed = mode == RolloutMode::kClosedLoop;
  const double scale = 1.0 / static_cast<double>(input.dim() * input.size());
  const Eigen::VectorXd w = discount_weights(horizon, gamma);

  Trace tr = run_encoder(p, input);
  std::vector<MatrixXd> err(static_cast<std::size_t>(horizon));
  double loss = 0.0;
  for (int k = 0; k < horizon; ++k) {
    MatrixXd y = tr.decode(t_in - 1 + k);
    err[static_cast<std::size_t>(k)] = y - target.at[static_cast<std::size_t>(k)];
    loss += w[k] * err[static_cast<std::size_t>(k)].squaredNorm() * scale;
    if (k + 1 < horizon) tr.push(closed ? y : target.at[static_cast<std::size_t>(k)]);
  }
  if (!std::isfinite(loss)) throw Error("pretrain_loss: non-finite loss");
  if (grad == nullptr) return loss;

  *grad = EncoderParams::zeros(p.shape);
  Grads g(grad->params, p.shape.ff_layers);
  const Weights& wt = tr.weights();
  MatrixXd dh = MatrixXd::Zero(p.shape.hidden, input.size());
  MatrixXd dc = dh;
  MatrixXd dx_next;
  bool have_dx = false;
  for (int s = tr.size() - 1; s >= 0; --s) {
    if (s >= t_in - 1) {
      const int k = s - (t_in - 1);
      MatrixXd dy = (2.0 * w[k] * scale) * err[static_cast<std::size_t>(k)];
      if (have_dx) dy += dx_next;
      g.dW.noalias() += dy * tr.h(s).transpose();
      g.db.col(0) += dy.rowwise().sum();
      dh.noalias() += wt.dW.transpose() * dy;
    }
    const bool want_dx = closed && s >= t_in;
    backward_step(tr, s, dh, dc, g, want_dx ? &dx_next : nullptr);
    have_dx = want_dx;
  }
  grad->params.check_finite("gradient");
  return loss;
}

Eigen::MatrixXd head_forward(const EncoderParams& enc, const HeadParams& head,
                             const SequenceBatch& input) {
  check_batch(enc, input, "head_forward");
  if (head.in != enc.shape.hidden) throw Error("head input does not match encoder hidden width");
  const Trace tr = run_encoder(enc, input);
  return apply_head(head, tr.h(tr.size() - 1));
}

double classifier_loss(const EncoderParams& enc, const HeadParams& head,
                       const SequenceBatch& input, const Eigen::MatrixXd& labels,
                       const Eigen::MatrixXd& mask, EncoderParams* enc_grad,
                       HeadParams* head_grad) {
  check_batch(enc, input, "classifier_loss");
  if (labels.rows() != head.out || labels.cols() != input.size() || mask.rows() != labels.rows() ||
      mask.cols() != labels.cols()) {
    throw Error("classifier_loss: label or mask shape mismatch");
  }
  const double total = mask.sum();
  if (total <= 0.0) throw Error("classifier_loss: empty mask");
  const Trace tr = run_encoder(enc, input);
  const MatrixXd z = apply_head(head, tr.h(tr.size() - 1));
  double loss = 0.0;
  MatrixXd dz(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      loss += mask(i, j) * (softplus(z(i, j)) - labels(i, j) * z(i, j));
      dz(i, j) = mask(i, j) * (sigmoid(z(i, j)) - labels(i, j)) / total;
    }
  }
  loss /= total;
  if (!std::isfinite(loss)) throw Error("classifier_loss: non-finite loss");
  backward_head(tr, enc, head, dz, enc_grad, head_grad);
  return loss;
}

double regression_loss(const EncoderParams& enc, const HeadParams& head,
                       const SequenceBatch& input, const Eigen::MatrixXd& targets,
                       EncoderParams* enc_grad, HeadParams* head_grad) {
  check_batch(enc, input, "regression_loss");
  if (targets.rows() != head.out || targets.cols() != input.size()) {
    throw Error("regression_loss: target shape mismatch");
  }
  const Trace tr = run_encoder(enc, input);
  const MatrixXd diff = apply_head(head, tr.h(tr.size() - 1)) - targets;
  const double scale = 1.0 / static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() * scale;
  if (!std::isfinite(loss)) throw Error("regression_loss: non-finite loss");
  backward_head(tr, enc, head, (2.0 * scale) * diff, enc_grad, head_grad);
  return loss;
}

}  // namespace trajverb::nn
