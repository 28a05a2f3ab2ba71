#pragma once

#include "trajverb/train/finetune.hpp"

namespace trajverb::train {

struct ProbeParams {
  nn::EncoderParams encoder;
  nn::HeadParams head;  // hidden -> 3
};

/// Object positions z-scored per axis with train-split statistics.
struct ProbeTargets {
  Eigen::MatrixXd values;  // 3 x table rows
  Eigen::Vector3d mean;
  Eigen::Vector3d stddev;
};

ProbeTargets zscore_targets(const Eigen::MatrixXd& positions, const SplitLoader& data);

struct ProbeHyper {
  FinetuneHyper optim;
  /// Cap on train-split clips used per epoch (0 = all); the subset is fixed
  /// per seed.
  int max_train_clips = 0;
};

struct ProbeResult {
  ProbeParams model;
  RunRecord record;
  double best_dev_mse = 0.0;
};

/// Fine-tunes the encoder (unless frozen) and a fresh 3-output head to
/// regress the z-scored final-frame object position. Dev MSE selects the
/// epoch; test data is never read here.
ProbeResult probe(const nn::EncoderParams& encoder, const SplitLoader& data,
                  const ProbeTargets& targets, const ProbeHyper& hyper,
                  const ProgressFn& progress = {});

/// Mean squared error (z-scored units) of the probe on the given rows.
double probe_mse(const ProbeParams& model, const SplitLoader& data, const ProbeTargets& targets,
                 std::span<const std::size_t> rows);

}  // namespace trajverb::train
