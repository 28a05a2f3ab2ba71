#pragma once

#include <vector>

#include "trajverb/eval/metrics.hpp"
#include "trajverb/train/pretrain.hpp"

namespace trajverb::train {

struct FinetuneHyper {
  int batch_size = 32;
  double learning_rate = 3e-3;
  int max_epochs = 30;
  int patience = 5;
  /// Train only the head; the encoder stays as given.
  bool freeze_encoder = false;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate(const char* section) const;
  nlohmann::ordered_json to_json() const;
};

struct ClassifierParams {
  nn::EncoderParams encoder;
  nn::HeadParams head;  // hidden -> one logit per verb
};

struct FinetuneResult {
  ClassifierParams model;
  RunRecord record;
  double best_dev_map = 0.0;
};

/// Trains a fresh head (and, unless frozen, the encoder) with masked BCE on
/// train-split annotations, evaluating dev macro mAP after every epoch and
/// stopping after `patience` epochs without improvement. Returns the best dev
/// checkpoint. Never reads test data.
FinetuneResult finetune(const nn::EncoderParams& encoder, const SplitLoader& data,
                        const oracle::AnnotationSet& annotations,
                        const std::vector<oracle::Verb>& verbs, const FinetuneHyper& hyper,
                        const ProgressFn& progress = {});

/// Logits (verbs x rows) for arbitrary table rows.
Eigen::MatrixXd predict_logits(const ClassifierParams& model, const SplitLoader& data,
                               std::span<const std::size_t> rows);

/// One scored entry per annotation of `split`, in annotation order.
std::vector<eval::ScoredEntry> score_annotations(const ClassifierParams& model,
                                                 const SplitLoader& data,
                                                 const oracle::AnnotationSet& annotations,
                                                 const std::vector<oracle::Verb>& verbs,
                                                 oracle::Split split);

/// Adds micro, macro and per-verb test AP ("test.micro", "test.macro",
/// "test.ap.<verb>") to the record and tags the selected epoch's test metric.
void record_test_scores(RunRecord& record, std::span<const eval::ScoredEntry> scored);

}  // namespace trajverb::train
