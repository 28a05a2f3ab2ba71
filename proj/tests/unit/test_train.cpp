#include <cmath>

#include <gtest/gtest.h>

#include "trajverb/rng.hpp"
#include "trajverb/train/finetune.hpp"
#include "trajverb/train/pretrain.hpp"
#include "trajverb/train/probe.hpp"

namespace trajverb::train {
namespace {

using features::FeatureTable;
using features::Modality;
using features::ModalityKind;
using oracle::Split;
using oracle::Verb;

constexpr int kClips = 100;
constexpr int kRows = FeatureTable::kRowsPerClip;

// Episode i holds clip i; episodes 0-69 train, 70-79 dev, 80-99 test.
std::map<std::uint64_t, Split> splits() {
  std::map<std::uint64_t, Split> s;
  for (int i = 0; i < kClips; ++i) s[i] = i < 70 ? Split::kTrain : i < 80 ? Split::kDev : Split::kTest;
  return s;
}

std::vector<oracle::ClipRef> refs() {
  std::vector<oracle::ClipRef> r;
  for (int i = 0; i < kClips; ++i) r.push_back({static_cast<std::uint64_t>(i), 0});
  return r;
}

FeatureTable constant_table(float value) {
  const Modality m(ModalityKind::kTraj2D);
  return FeatureTable(m, refs(), std::vector<float>(static_cast<std::size_t>(kClips) * kRows * m.dim(), value));
}

// Each clip carries a class bit c: channel 0 is a noisy constant +-1 and the
// other channels are slow sinusoids. Returns the class bits.
FeatureTable signal_table(std::vector<int>* classes = nullptr) {
  const Modality m(ModalityKind::kTraj2D);
  Rng rng(77);
  std::vector<float> v;
  for (int c = 0; c < kClips; ++c) {
    const int bit = static_cast<int>(rng.below(2));
    if (classes) classes->push_back(bit);
    const double phase = rng.uniform(0.0, 6.28);
    for (int t = 0; t < kRows; ++t) {
      v.push_back(static_cast<float>((bit ? 1.0 : -1.0) + 0.1 * rng.normal()));
      v.push_back(static_cast<float>(std::sin(0.05 * t + phase)));
      v.push_back(static_cast<float>(std::cos(0.05 * t + phase)));
      v.push_back(static_cast<float>(0.5 * std::sin(0.1 * t)));
    }
  }
  return FeatureTable(m, refs(), std::move(v));
}

PretrainHyper small_hyper() {
  PretrainHyper h;
  h.batch_size = 8;
  h.hidden_width = 8;
  h.epochs = 3;
  h.learning_rate = 1e-2;
  h.seed = 5;
  return h;
}

TEST(SplitLoader, RefusesTestRowsUntilOpened) {
  const FeatureTable table = constant_table(0.0f);
  const SplitLoader loader(table, splits());
  EXPECT_EQ(loader.rows(Split::kTrain).size(), 70u);
  EXPECT_EQ(loader.rows(Split::kDev).size(), 10u);
  EXPECT_THROW(loader.rows(Split::kTest), SplitGuardError);
  const auto test = loader.for_final_evaluation().rows(Split::kTest);
  ASSERT_EQ(test.size(), 20u);
  EXPECT_THROW(loader.inputs(test), SplitGuardError);
  EXPECT_THROW(loader.futures(test), SplitGuardError);
  const std::vector<std::size_t> mixed{0, test[0]};
  EXPECT_THROW(loader.inputs(mixed), SplitGuardError);
  const SplitLoader final_eval = loader.for_final_evaluation();
  EXPECT_TRUE(final_eval.test_open());
  EXPECT_NO_THROW(final_eval.inputs(test));
  EXPECT_FALSE(loader.test_open());
}

TEST(Pretrain, ConstantDatasetLearnedByBias) {
  const FeatureTable table = constant_table(0.7f);
  const SplitLoader loader(table, splits());
  PretrainHyper h = small_hyper();
  h.gamma = 1.0;
  h.epochs = 5;
  const PretrainResult r = pretrain(loader, h);
  EXPECT_LT(r.best_dev_loss, 1e-3);
}

TEST(Pretrain, BestDevNotWorseThanEpochZeroAndDeterministic) {
  const FeatureTable table = signal_table();
  const SplitLoader loader(table, splits());
  const PretrainResult a = pretrain(loader, small_hyper());
  const PretrainResult b = pretrain(loader, small_hyper());
  const auto& hist = a.record.history();
  ASSERT_EQ(hist.size(), 4u);
  EXPECT_EQ(hist[0].epoch, 0);
  EXPECT_LE(a.best_dev_loss, hist[0].dev_metric);
  EXPECT_EQ(a.best_dev_loss, hist[static_cast<std::size_t>(a.record.best_epoch)].dev_metric);
  EXPECT_EQ(to_json(a.record).dump(), to_json(b.record).dump());
  EXPECT_EQ(a.encoder.params.values(), b.encoder.params.values());
  // Reported encoder is the selected checkpoint.
  EXPECT_EQ(pretrain_eval(a.encoder, loader, loader.rows(Split::kDev), small_hyper()), a.best_dev_loss);
}

TEST(Pretrain, DifferentSeedsDiffer) {
  const FeatureTable table = signal_table();
  const SplitLoader loader(table, splits());
  PretrainHyper h = small_hyper();
  h.epochs = 1;
  const PretrainResult a = pretrain(loader, h);
  h.seed = 6;
  const PretrainResult b = pretrain(loader, h);
  EXPECT_NE(a.encoder.params.values(), b.encoder.params.values());
}

TEST(GridSearch, SingletonAndDivergentCell) {
  const FeatureTable table = signal_table();
  const SplitLoader loader(table, splits());
  PretrainHyper h = small_hyper();
  h.epochs = 2;
  const GridResult one = grid_search({h}, loader);
  EXPECT_EQ(one.best_index, 0u);

  PretrainHyper wild = h;
  wild.learning_rate = 10.0;
  wild.clip_norm = 0.0;
  PretrainHyper stable = h;
  stable.learning_rate = 1e-3;
  const GridResult g = grid_search({wild, stable}, loader);
  EXPECT_EQ(g.best_index, 1u);
  EXPECT_EQ(g.best.learning_rate, 1e-3);
  EXPECT_TRUE(std::isfinite(g.cells[1].dev_loss));
  EXPECT_THROW(grid_search({}, loader), Error);
}

GridCell cell(double loss, int hidden, double gamma, double lr) {
  GridCell c;
  c.dev_loss = loss;
  c.hyper.hidden_width = hidden;
  c.hyper.gamma = gamma;
  c.hyper.learning_rate = lr;
  return c;
}

TEST(GridSearch, TieBreakOrder) {
  // Lowest loss wins outright.
  EXPECT_EQ(select_grid_cell({cell(0.5, 64, 0.9, 1e-3), cell(0.4, 128, 0.9, 1e-3)}), 1u);
  // Then smaller hidden width.
  EXPECT_EQ(select_grid_cell({cell(0.4, 128, 1.0, 1e-4), cell(0.4, 64, 0.9, 1e-3)}), 1u);
  // Then larger gamma.
  EXPECT_EQ(select_grid_cell({cell(0.4, 64, 0.9, 1e-4), cell(0.4, 64, 0.97, 1e-3)}), 1u);
  // Then lower learning rate.
  EXPECT_EQ(select_grid_cell({cell(0.4, 64, 0.97, 1e-3), cell(0.4, 64, 0.97, 3e-4)}), 1u);
  // Duplicates: first declared.
  EXPECT_EQ(select_grid_cell({cell(0.4, 64, 0.97, 1e-3), cell(0.4, 64, 0.97, 1e-3)}), 0u);
}

oracle::AnnotationSet annotations(const std::vector<int>& classes, bool rise_all_no_in_train) {
  oracle::AnnotationSet set;
  set.per_verb_count = kClips;
  set.episode_split = splits();
  for (int i = 0; i < kClips; ++i) {
    const Split s = set.episode_split.at(static_cast<std::uint64_t>(i));
    const oracle::ClipRef ref{static_cast<std::uint64_t>(i), 0};
    set.entries.push_back({ref, Verb::kFall, classes[i] == 1, s});
    const bool rise = rise_all_no_in_train && s == Split::kTrain ? false : (i % 3 == 0);
    set.entries.push_back({ref, Verb::kRise, rise, s});
  }
  return set;
}

FinetuneHyper ft_hyper() {
  FinetuneHyper h;
  h.batch_size = 8;
  h.max_epochs = 6;
  h.patience = 3;
  h.learning_rate = 1e-2;
  h.seed = 9;
  return h;
}

const std::vector<Verb> kTwoVerbs{Verb::kFall, Verb::kRise};

class FinetuneTest : public ::testing::Test {
 protected:
  void SetUp() override {
    table_ = signal_table(&classes_);
    Rng rng(1);
    encoder_ = nn::EncoderParams::random({4, 8, 1}, rng);
  }
  std::vector<int> classes_;
  FeatureTable table_;
  nn::EncoderParams encoder_;
};

TEST_F(FinetuneTest, LearnsSeparableVerbAndIsDeterministic) {
  const SplitLoader loader(table_, splits());
  const auto set = annotations(classes_, false);
  const FinetuneResult a = finetune(encoder_, loader, set, kTwoVerbs, ft_hyper());
  const FinetuneResult b = finetune(encoder_, loader, set, kTwoVerbs, ft_hyper());
  EXPECT_EQ(to_json(a.record).dump(), to_json(b.record).dump());
  const SplitLoader final_eval = loader.for_final_evaluation();
  const auto sa = score_annotations(a.model, final_eval, set, kTwoVerbs, Split::kTest);
  const auto sb = score_annotations(b.model, final_eval, set, kTwoVerbs, Split::kTest);
  ASSERT_EQ(sa.size(), 40u);
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(sa[i].score, sb[i].score);
  const eval::MapScores m = eval::map_scores(sa);
  EXPECT_GT(m.verb_ap(Verb::kFall), 0.95);
  // Scoring test clips from the training loader is refused.
  EXPECT_THROW(score_annotations(a.model, loader, set, kTwoVerbs, Split::kTest), SplitGuardError);
}

TEST_F(FinetuneTest, AllNegativeVerbDriftsNegative) {
  const SplitLoader loader(table_, splits());
  const auto set = annotations(classes_, true);
  FinetuneHyper h = ft_hyper();
  h.patience = 10;
  h.max_epochs = 10;
  const FinetuneResult r = finetune(encoder_, loader, set, kTwoVerbs, h);
  const Eigen::MatrixXd logits = predict_logits(r.model, loader, loader.rows(Split::kDev));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    EXPECT_LT(1.0 / (1.0 + std::exp(-logits(1, c))), 0.5);
  }
}

TEST_F(FinetuneTest, FrozenEncoderOnlyTrainsHead) {
  const SplitLoader loader(table_, splits());
  const auto set = annotations(classes_, false);
  FinetuneHyper h = ft_hyper();
  h.freeze_encoder = true;
  const FinetuneResult frozen = finetune(encoder_, loader, set, kTwoVerbs, h);
  EXPECT_EQ(frozen.model.encoder.params.values(), encoder_.params.values());
  h.freeze_encoder = false;
  const FinetuneResult full = finetune(encoder_, loader, set, kTwoVerbs, h);
  EXPECT_NE(full.model.encoder.params.values(), encoder_.params.values());
}

TEST_F(FinetuneTest, SelectedEpochIsBestDev) {
  const SplitLoader loader(table_, splits());
  const auto set = annotations(classes_, false);
  const FinetuneResult r = finetune(encoder_, loader, set, kTwoVerbs, ft_hyper());
  double best = -1.0;
  for (const auto& e : r.record.history()) best = std::max(best, e.dev_metric);
  EXPECT_EQ(r.best_dev_map, best);
  EXPECT_EQ(r.record.history()[static_cast<std::size_t>(r.record.best_epoch)].dev_metric, best);
}

TEST_F(FinetuneTest, ProbeBeatsTrainingMeanAndFrozenRandom) {
  // Target: the class channel of the last input frame, which the input shows.
  Eigen::MatrixXd pos(3, kClips);
  for (int c = 0; c < kClips; ++c) {
    const Tensor2 in = table_.input(static_cast<std::size_t>(c));
    pos.col(c) << in(89, 0), in(89, 1), in(89, 2);
  }
  const SplitLoader loader(table_, splits());
  const ProbeTargets targets = zscore_targets(pos, loader);
  ProbeHyper h;
  h.optim = ft_hyper();
  h.optim.max_epochs = 15;
  h.optim.patience = 15;
  const ProbeResult trained = probe(encoder_, loader, targets, h);
  EXPECT_LT(trained.best_dev_mse, 1.0);
  const SplitLoader final_eval = loader.for_final_evaluation();
  const double test = probe_mse(trained.model, final_eval, targets, final_eval.rows(Split::kTest));
  EXPECT_LT(test, 0.5);
  EXPECT_THROW(probe_mse(trained.model, loader, targets, loader.rows(Split::kTest)), SplitGuardError);
}

TEST(ZscoreTargets, UsesTrainStatistics) {
  const FeatureTable table = constant_table(0.0f);
  const SplitLoader loader(table, splits());
  Eigen::MatrixXd pos(3, kClips);
  for (int c = 0; c < kClips; ++c) pos.col(c) << c, 2.0 * c, 5.0;
  const ProbeTargets t = zscore_targets(pos, loader);
  EXPECT_NEAR(t.mean.x(), 34.5, 1e-12);
  double mean0 = 0.0;
  for (auto r : loader.rows(Split::kTrain)) mean0 += t.values(0, static_cast<Eigen::Index>(r));
  EXPECT_NEAR(mean0 / 70.0, 0.0, 1e-12);
  EXPECT_GT(t.stddev.z(), 0.0);
}

TEST(RunRecord, JsonRoundTrip) {
  RunRecord r;
  r.stage = "finetune";
  r.modality = "traj3d";
  r.seed = 3;
  r.finetune_history = {{0, 0.5, 0.6, std::nullopt}, {1, 0.25, 0.7, 0.65}};
  r.best_epoch = 1;
  r.final_metrics["test.macro"] = 0.1 + 0.2;
  const RunRecord back = record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
  EXPECT_EQ(back.final_metrics.at("test.macro"), 0.1 + 0.2);
  EXPECT_EQ(std::stod(format_number(0.1 + 0.2)), 0.1 + 0.2);
}

}  // namespace
}  // namespace trajverb::train
