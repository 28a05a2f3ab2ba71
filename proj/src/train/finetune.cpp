#include "trajverb/train/finetune.hpp"

#include <map>

#include <fmt/format.h>

#include "loop.hpp"
#include "trajverb/features/featurize.hpp"
#include "trajverb/nn/optim.hpp"

namespace trajverb::train {

void FinetuneHyper::validate(const char* section) const {
  const std::string s(section);
  if (batch_size < 1) throw ConfigError(s + ".batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError(s + ".learning_rate", "must be positive");
  if (max_epochs < 1) throw ConfigError(s + ".max_epochs", "must be >= 1");
  if (patience < 1) throw ConfigError(s + ".patience", "must be >= 1");
}

nlohmann::ordered_json FinetuneHyper::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["freeze_encoder"] = freeze_encoder;
  j["clip_norm"] = clip_norm;
  j["seed"] = seed;
  return j;
}

Eigen::MatrixXd predict_logits(const ClassifierParams& model, const SplitLoader& data,
                               std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(model.head.out, static_cast<Eigen::Index>(rows.size()));
  constexpr std::size_t kChunk = 128;
  for (std::size_t first = 0; first < rows.size(); first += kChunk) {
    const auto count = std::min(kChunk, rows.size() - first);
    out.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) =
        nn::head_forward(model.encoder, model.head, data.inputs(rows.subspan(first, count)));
  }
  return out;
}

std::vector<eval::ScoredEntry> score_annotations(const ClassifierParams& model,
                                                 const SplitLoader& data,
                                                 const oracle::AnnotationSet& annotations,
                                                 const std::vector<oracle::Verb>& verbs,
                                                 oracle::Split split) {
  const LabeledClips lc = labeled_clips(data, annotations, verbs, split);
  const Eigen::MatrixXd logits = predict_logits(model, data, lc.rows);
  std::map<oracle::ClipRef, Eigen::Index> column;
  for (std::size_t j = 0; j < lc.clips.size(); ++j) column[lc.clips[j]] = static_cast<Eigen::Index>(j);
  std::vector<eval::ScoredEntry> out;
  for (const auto& a : annotations.entries) {
    if (a.split != split) continue;
    const auto v = std::find(verbs.begin(), verbs.end(), a.verb);
    if (v == verbs.end()) continue;
    out.push_back({a.verb, a.clip, logits(v - verbs.begin(), column.at(a.clip)), a.label ? 1 : 0});
  }
  return out;
}

FinetuneResult finetune(const nn::EncoderParams& encoder, const SplitLoader& data,
                        const oracle::AnnotationSet& annotations,
                        const std::vector<oracle::Verb>& verbs, const FinetuneHyper& hyper,
                        const ProgressFn& progress) {
  hyper.validate("finetune");
  if (encoder.shape.input_dim != data.table().dim()) {
    throw Error("finetune: encoder was built for another modality");
  }
  const LabeledClips train = labeled_clips(data, annotations, verbs, oracle::Split::kTrain);
  if (train.size() == 0) throw Error("finetune: no training annotations");

  Rng head_rng(derive_seed(hyper.seed, "head-init"));
  ClassifierParams model{encoder, nn::HeadParams::random(encoder.shape.hidden,
                                                         static_cast<int>(verbs.size()), head_rng)};
  nn::AdamState enc_adam(hyper.learning_rate);
  nn::AdamState head_adam(hyper.learning_rate);
  Rng shuffle_rng(derive_seed(hyper.seed, "finetune-shuffle"));

  FinetuneResult result;
  result.record.stage = "finetune";
  result.record.modality = std::string(features::to_string(data.table().modality().kind()));
  result.record.seed = hyper.seed;
  result.record.hyper = hyper.to_json();

  std::vector<std::size_t> order(train.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  const auto columns = [&](std::span<const std::size_t> batch, const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
      out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(batch[k]));
    }
    return out;
  };
  const auto table_rows = [&](std::span<const std::size_t> batch) {
    std::vector<std::size_t> rows;
    for (const auto j : batch) rows.push_back(train.rows[j]);
    return rows;
  };
  const auto train_loss_of = [&](const ClassifierParams& m) {
    return detail::evaluate_chunks(order, [&](std::span<const std::size_t> chunk) {
      return nn::classifier_loss(m.encoder, m.head, data.inputs(table_rows(chunk)),
                                 columns(chunk, train.labels), columns(chunk, train.mask), nullptr,
                                 nullptr);
    });
  };
  const auto dev_map = [&](const ClassifierParams& m) {
    return eval::map_scores(score_annotations(m, data, annotations, verbs, oracle::Split::kDev)).macro;
  };

  const double loss0 = train_loss_of(model);
  result.best_dev_map = dev_map(model);
  result.model = model;
  result.record.finetune_history.push_back({0, loss0, result.best_dev_map, std::nullopt});
  if (progress) progress("finetune", 0, loss0, result.best_dev_map);

  int stale = 0;
  for (int epoch = 1; epoch <= hyper.max_epochs && stale < hyper.patience; ++epoch) {
    const double loss = detail::run_epoch(order, hyper.batch_size, shuffle_rng,
                                          [&](std::span<const std::size_t> batch) {
      nn::EncoderParams enc_grad;
      nn::HeadParams head_grad;
      const double l = nn::classifier_loss(
          model.encoder, model.head, data.inputs(table_rows(batch)), columns(batch, train.labels),
          columns(batch, train.mask), hyper.freeze_encoder ? nullptr : &enc_grad, &head_grad);
      detail::update_encoder_and_head(model.encoder, model.head, enc_grad, head_grad, enc_adam,
                                      head_adam, hyper.freeze_encoder, hyper.clip_norm);
      return l;
    });
    const double dev = dev_map(model);
    result.record.finetune_history.push_back({epoch, loss, dev, std::nullopt});
    if (progress) progress("finetune", epoch, loss, dev);
    if (dev > result.best_dev_map) {
      result.best_dev_map = dev;
      result.model = model;
      result.record.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
  }
  result.record.final_metrics["dev.macro"] = result.best_dev_map;
  return result;
}

void record_test_scores(RunRecord& record, std::span<const eval::ScoredEntry> scored) {
  const auto m = eval::map_scores(scored);
  record.final_metrics["test.micro"] = m.micro;
  record.final_metrics["test.macro"] = m.macro;
  for (const auto& [verb, ap] : m.per_verb) {
    record.final_metrics[fmt::format("test.ap.{}", oracle::to_string(verb))] = ap;
  }
  for (auto& e : record.history()) {
    if (e.epoch == record.best_epoch) e.test_metric = m.macro;
  }
}

}  // namespace trajverb::train
