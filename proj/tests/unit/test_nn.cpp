#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "trajverb/error.hpp"
#include "trajverb/nn/checkpoint.hpp"
#include "trajverb/nn/losses.hpp"
#include "trajverb/nn/model.hpp"
#include "trajverb/nn/optim.hpp"

namespace trajverb::nn {
namespace {

Tensor2 random_rows(int rows, int cols, Rng& rng, double scale = 1.0) {
  Tensor2 t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, scale);
  return t;
}

double manual_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

TEST(Losses, DiscountedMseMatchesHandArithmetic) {
  Tensor2 pred = Tensor2::Zero(2, 1);
  Tensor2 target(2, 1);
  target << 1.0, std::sqrt(2.0);
  EXPECT_NEAR(discounted_mse(pred, target, 0.5), (1.0 + 0.5 * 2.0) / 1.5, 1e-12);
  EXPECT_DOUBLE_EQ(discounted_mse(target, target, 0.9), 0.0);
}

TEST(Losses, GammaOneIsPlainMean) {
  Rng rng(3);
  const Tensor2 a = random_rows(60, 4, rng);
  const Tensor2 b = random_rows(60, 4, rng);
  EXPECT_NEAR(discounted_mse(a, b, 1.0), (a - b).array().square().mean(), 1e-12);
}

TEST(Losses, BceValues) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd y(3);
  y << 1, 0, 1;
  EXPECT_NEAR(bce_multilabel(z, y), std::log(2.0), 1e-12);

  Eigen::VectorXd sat(1), one(1);
  sat << 20.0;
  one << 1.0;
  EXPECT_LT(bce_multilabel(sat, one), 1e-8);

  Eigen::VectorXd z2(2), y2(2);
  z2 << 1.0, -1.0;
  y2 << 1.0, 0.0;
  EXPECT_NEAR(bce_multilabel(z2, y2), 0.31326168751822286, 1e-12);

  Eigen::VectorXd big(2), lab(2);
  big << 50.0, -50.0;
  lab << 0.0, 1.0;
  EXPECT_TRUE(std::isfinite(bce_multilabel(big, lab)));
  EXPECT_NEAR(bce_multilabel(big, lab), 50.0, 1e-9);
}

TEST(Model, ZeroWeightsGiveZeroHiddenStates) {
  const auto p = EncoderParams::zeros({3, 4, 1});
  Rng rng(1);
  const auto r = encode(p, random_rows(90, 3, rng));
  EXPECT_EQ(r.hidden.rows(), 90);
  EXPECT_EQ(r.hidden.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Model, ForgetBiasStartsAtOne) {
  Rng rng(2);
  const auto p = EncoderParams::random({3, 5, 1}, rng);
  const auto b = p.params.mat("lstm.b");
  for (int k = 0; k < 20; ++k) EXPECT_EQ(b(k, 0), (k >= 5 && k < 10) ? 1.0 : 0.0);
  const double bound = 1.0 / std::sqrt(3.0);
  EXPECT_LE(p.params.mat("ff0.W").cwiseAbs().maxCoeff(), bound);
}

TEST(Model, MatchesHandEvaluatedLstm) {
  // d = 1, h = 2, three steps, every weight set by hand.
  EncoderParams p = EncoderParams::zeros({1, 2, 1});
  p.params.mat("ff0.W") << 0.5, -0.3;
  p.params.mat("ff0.b") << 0.1, 0.2;
  auto wx = p.params.mat("lstm.Wx");
  auto wh = p.params.mat("lstm.Wh");
  auto b = p.params.mat("lstm.b");
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 2; ++c) {
      wx(r, c) = 0.1 * (r + 1) - 0.2 * c;
      wh(r, c) = -0.05 * r + 0.15 * c;
    }
    b(r, 0) = 0.01 * r;
  }
  Tensor2 x(3, 1);
  x << 1.0, -2.0, 0.5;

  double h[2] = {0, 0}, c[2] = {0, 0};
  for (int t = 0; t < 3; ++t) {
    const double a[2] = {std::tanh(0.5 * x(t, 0) + 0.1), std::tanh(-0.3 * x(t, 0) + 0.2)};
    double z[8];
    for (int r = 0; r < 8; ++r) {
      z[r] = b(r, 0);
      for (int k = 0; k < 2; ++k) z[r] += wx(r, k) * a[k] + wh(r, k) * h[k];
    }
    for (int j = 0; j < 2; ++j) {
      const double ig = manual_sigmoid(z[j]);
      const double fg = manual_sigmoid(z[2 + j]);
      const double gg = std::tanh(z[4 + j]);
      const double og = manual_sigmoid(z[6 + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
    }
  }
  const auto r = encode(p, x);
  EXPECT_NEAR(r.h[0], h[0], 1e-12);
  EXPECT_NEAR(r.h[1], h[1], 1e-12);
  EXPECT_NEAR(r.c[0], c[0], 1e-12);
}

TEST(Model, Causality) {
  Rng rng(5);
  const auto p = EncoderParams::random({3, 4, 1}, rng);
  Tensor2 x = random_rows(20, 3, rng);
  const auto before = encode(p, x);
  x.row(12) *= 2.0;
  const auto after = encode(p, x);
  EXPECT_EQ(before.hidden.topRows(12), after.hidden.topRows(12));
  EXPECT_GT((before.hidden.row(12) - after.hidden.row(12)).norm(), 0.0);
}

TEST(Model, ZeroWeightRolloutRepeatsDecoderBias) {
  auto p = EncoderParams::zeros({3, 4, 1});
  p.params.mat("dec.b") << 0.5, -1.0, 2.0;
  Rng rng(1);
  const Tensor2 y = rollout(p, random_rows(90, 3, rng), 60);
  ASSERT_EQ(y.rows(), 60);
  for (int k = 0; k < 60; ++k) {
    EXPECT_EQ(y(k, 0), 0.5);
    EXPECT_EQ(y(k, 2), 2.0);
  }
}

TEST(Model, HorizonOneIsDecodeOfFinalState) {
  Rng rng(7);
  const auto p = EncoderParams::random({3, 4, 1}, rng);
  const Tensor2 x = random_rows(10, 3, rng);
  const Tensor2 y = rollout(p, x, 1);
  const Eigen::VectorXd d = decode(p, encode(p, x).h);
  EXPECT_NEAR((y.row(0).transpose() - d).norm(), 0.0, 1e-15);
}

TEST(Model, BatchedLossMatchesPerSequenceLoss) {
  Rng rng(8);
  const auto p = EncoderParams::random({2, 3, 1}, rng);
  std::vector<Tensor2> in, tgt;
  double mean = 0.0;
  for (int b = 0; b < 4; ++b) {
    in.push_back(random_rows(6, 2, rng));
    tgt.push_back(random_rows(5, 2, rng));
    mean += discounted_mse(rollout(p, in.back(), 5), tgt.back(), 0.8) / 4.0;
  }
  const double batched = pretrain_loss(p, SequenceBatch::from(in), SequenceBatch::from(tgt), 0.8,
                                       RolloutMode::kClosedLoop, nullptr);
  EXPECT_NEAR(batched, mean, 1e-12);
}

TEST(Gradients, ZeroErrorGivesZeroGradient) {
  auto p = EncoderParams::zeros({2, 3, 1});
  p.params.mat("dec.b") << 0.3, -0.7;
  Rng rng(2);
  std::vector<Tensor2> in{random_rows(5, 2, rng)};
  Tensor2 target(4, 2);
  target.rowwise() = Eigen::RowVector2d(0.3, -0.7);
  std::vector<Tensor2> tgt{target};
  EncoderParams g;
  const double loss = pretrain_loss(p, SequenceBatch::from(in), SequenceBatch::from(tgt), 0.9,
                                    RolloutMode::kClosedLoop, &g);
  EXPECT_EQ(loss, 0.0);
  EXPECT_EQ(g.params.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, BceAtZeroLogit) {
  const auto enc = EncoderParams::zeros({1, 2, 1});
  const auto head = HeadParams::zeros(2, 1);
  std::vector<Tensor2> in{Tensor2::Zero(3, 1)};
  HeadParams g;
  classifier_loss(enc, head, SequenceBatch::from(in), Eigen::MatrixXd::Ones(1, 1),
                  Eigen::MatrixXd::Ones(1, 1), nullptr, &g);
  EXPECT_NEAR(g.params.mat("b")(0, 0), -0.5, 1e-15);
}

struct Instance {
  EncoderParams enc;
  HeadParams head;
  SequenceBatch input;
  SequenceBatch future;
  Eigen::MatrixXd labels, mask, targets;
  double gamma;
};

Instance random_instance(std::uint64_t seed) {
  Rng rng(seed);
  const int d = 1 + static_cast<int>(rng.below(4));
  const int h = 1 + static_cast<int>(rng.below(6));
  const int t = 2 + static_cast<int>(rng.below(7));
  const int horizon = 1 + static_cast<int>(rng.below(5));
  const int batch = 1 + static_cast<int>(rng.below(3));
  const int layers = 1 + static_cast<int>(rng.below(2));
  const int out = 1 + static_cast<int>(rng.below(4));
  Instance inst{EncoderParams::random({d, h, layers}, rng), HeadParams::random(h, out, rng), {}, {},
                {}, {}, {}, rng.uniform(0.5, 1.0)};
  // Push the weights away from the init range so gates do not all sit near 0.5.
  inst.enc.params.values() *= 1.5;
  std::vector<Tensor2> in, fut;
  for (int b = 0; b < batch; ++b) {
    in.push_back(random_rows(t, d, rng));
    fut.push_back(random_rows(horizon, d, rng));
  }
  inst.input = SequenceBatch::from(in);
  inst.future = SequenceBatch::from(fut);
  inst.labels = Eigen::MatrixXd(out, batch);
  inst.mask = Eigen::MatrixXd(out, batch);
  inst.targets = Eigen::MatrixXd(out, batch);
  for (Eigen::Index i = 0; i < inst.labels.size(); ++i) {
    inst.labels.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    inst.mask.data()[i] = rng.bernoulli(0.7) ? 1.0 : 0.0;
    inst.targets.data()[i] = rng.normal();
  }
  inst.mask(0, 0) = 1.0;
  return inst;
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, PretrainClosedLoop) {
  const auto inst = random_instance(100 + GetParam());
  EncoderParams g;
  pretrain_loss(inst.enc, inst.input, inst.future, inst.gamma, RolloutMode::kClosedLoop, &g);
  const auto r = check_gradients(
      [&](const ParamSet& ps) {
        EncoderParams e{inst.enc.shape, ps};
        return pretrain_loss(e, inst.input, inst.future, inst.gamma, RolloutMode::kClosedLoop,
                             nullptr);
      },
      inst.enc.params, g.params);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_block << "[" << r.worst_index << "]";
}

TEST_P(GradientCheck, PretrainTeacherForced) {
  const auto inst = random_instance(200 + GetParam());
  EncoderParams g;
  pretrain_loss(inst.enc, inst.input, inst.future, inst.gamma, RolloutMode::kTeacherForced, &g);
  const auto r = check_gradients(
      [&](const ParamSet& ps) {
        EncoderParams e{inst.enc.shape, ps};
        return pretrain_loss(e, inst.input, inst.future, inst.gamma, RolloutMode::kTeacherForced,
                             nullptr);
      },
      inst.enc.params, g.params);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_block << "[" << r.worst_index << "]";
}

TEST_P(GradientCheck, Classifier) {
  const auto inst = random_instance(300 + GetParam());
  EncoderParams ge;
  HeadParams gh;
  classifier_loss(inst.enc, inst.head, inst.input, inst.labels, inst.mask, &ge, &gh);
  const auto enc_check = check_gradients(
      [&](const ParamSet& ps) {
        EncoderParams e{inst.enc.shape, ps};
        return classifier_loss(e, inst.head, inst.input, inst.labels, inst.mask, nullptr, nullptr);
      },
      inst.enc.params, ge.params);
  const auto head_check = check_gradients(
      [&](const ParamSet& ps) {
        HeadParams h{inst.head.in, inst.head.out, ps};
        return classifier_loss(inst.enc, h, inst.input, inst.labels, inst.mask, nullptr, nullptr);
      },
      inst.head.params, gh.params);
  EXPECT_LT(enc_check.max_rel_error, 1e-4) << enc_check.worst_block;
  EXPECT_LT(head_check.max_rel_error, 1e-4) << head_check.worst_block;
}

TEST_P(GradientCheck, Regression) {
  const auto inst = random_instance(400 + GetParam());
  EncoderParams ge;
  HeadParams gh;
  regression_loss(inst.enc, inst.head, inst.input, inst.targets, &ge, &gh);
  const auto enc_check = check_gradients(
      [&](const ParamSet& ps) {
        EncoderParams e{inst.enc.shape, ps};
        return regression_loss(e, inst.head, inst.input, inst.targets, nullptr, nullptr);
      },
      inst.enc.params, ge.params);
  const auto head_check = check_gradients(
      [&](const ParamSet& ps) {
        HeadParams h{inst.head.in, inst.head.out, ps};
        return regression_loss(inst.enc, h, inst.input, inst.targets, nullptr, nullptr);
      },
      inst.head.params, gh.params);
  EXPECT_LT(enc_check.max_rel_error, 1e-4) << enc_check.worst_block;
  EXPECT_LT(head_check.max_rel_error, 1e-4) << head_check.worst_block;
}

INSTANTIATE_TEST_SUITE_P(RandomDraws, GradientCheck, ::testing::Range(0, 20));

TEST(Gradients, StableForLargeInputs) {
  Rng rng(9);
  const auto enc = EncoderParams::random({3, 4, 1}, rng);
  const auto head = HeadParams::random(4, 2, rng);
  std::vector<Tensor2> in{random_rows(30, 3, rng, 10.0).cwiseMax(-10.0).cwiseMin(10.0)};
  Eigen::MatrixXd labels(2, 1);
  labels << 1.0, 0.0;
  EncoderParams ge;
  HeadParams gh;
  HeadParams strong = head;
  strong.params.mat("b") << -50.0, 50.0;
  const double loss = classifier_loss(enc, strong, SequenceBatch::from(in), labels,
                                      Eigen::MatrixXd::Ones(2, 1), &ge, &gh);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_TRUE(ge.params.values().allFinite());
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamSet p;
  p.add("w", 3, 1);
  p.values() << 1.0, 2.0, 3.0;
  const ParamSet before = p;
  AdamState s(1e-3);
  adam_step(p, p.zeros_like(), s);
  EXPECT_EQ(p.values(), before.values());
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet p;
  p.add("w", 3, 1);
  ParamSet g = p.zeros_like();
  g.values() << 0.5, -3.0, 1e-3;
  AdamState s(0.01);
  adam_step(p, g, s);
  EXPECT_NEAR(p.values()[0], -0.01, 1e-6);
  EXPECT_NEAR(p.values()[1], 0.01, 1e-6);
  EXPECT_NEAR(p.values()[2], -0.01, 1e-4);
}

TEST(Adam, Deterministic) {
  Rng rng(4);
  ParamSet a;
  a.add("w", 4, 2);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.values()[i] = rng.normal();
  ParamSet b = a;
  ParamSet g = a.zeros_like();
  g.values().setConstant(0.3);
  AdamState sa(1e-3), sb(1e-3);
  adam_step(a, g, sa);
  adam_step(b, g, sb);
  EXPECT_EQ(a.values(), b.values());
}

TEST(Adam, RejectsNonFiniteGradient) {
  ParamSet p;
  p.add("lstm.Wx", 2, 1);
  ParamSet g = p.zeros_like();
  g.values()[1] = std::nan("");
  AdamState s;
  try {
    adam_step(p, g, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("lstm.Wx"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(11);
  Checkpoint c{2, EncoderParams::random({4, 5, 2}, rng), HeadParams::random(5, 3, rng)};
  const auto path = std::filesystem::temp_directory_path() / "trajverb_ckpt_test.bin";
  write_checkpoint(path, c);
  const auto back = read_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.modality_kind, 2);
  EXPECT_EQ(back.encoder.shape, c.encoder.shape);
  EXPECT_EQ(back.encoder.params.values(), c.encoder.params.values());
  ASSERT_TRUE(back.head.has_value());
  EXPECT_EQ(back.head->params.values(), c.head->params.values());
}

}  // namespace
}  // namespace trajverb::nn
