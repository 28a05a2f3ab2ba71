#include "trajverb/train/probe.hpp"

#include <cmath>

#include "loop.hpp"
#include "trajverb/features/featurize.hpp"
#include "trajverb/nn/optim.hpp"

namespace trajverb::train {
namespace {

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

}  // namespace

ProbeTargets zscore_targets(const Eigen::MatrixXd& positions, const SplitLoader& data) {
  if (positions.rows() != 3 || positions.cols() != static_cast<Eigen::Index>(data.table().size())) {
    throw Error("probe targets must be 3 x table rows");
  }
  const auto train = data.rows(oracle::Split::kTrain);
  if (train.size() < 2) throw Error("probe needs training clips");
  const Eigen::MatrixXd t = gather_cols(positions, train);
  ProbeTargets out;
  out.mean = t.rowwise().mean();
  out.stddev = ((t.colwise() - out.mean).array().square().rowwise().sum() /
                static_cast<double>(t.cols()))
                   .sqrt()
                   .max(1e-6);
  out.values = (positions.colwise() - out.mean).array().colwise() / out.stddev.array();
  return out;
}

double probe_mse(const ProbeParams& model, const SplitLoader& data, const ProbeTargets& targets,
                 std::span<const std::size_t> rows) {
  return detail::evaluate_chunks(rows, [&](std::span<const std::size_t> chunk) {
    return nn::regression_loss(model.encoder, model.head, data.inputs(chunk),
                               gather_cols(targets.values, chunk), nullptr, nullptr);
  });
}

ProbeResult probe(const nn::EncoderParams& encoder, const SplitLoader& data,
                  const ProbeTargets& targets, const ProbeHyper& hyper,
                  const ProgressFn& progress) {
  const FinetuneHyper& opt = hyper.optim;
  opt.validate("probe");
  if (encoder.shape.input_dim != data.table().dim()) {
    throw Error("probe: encoder was built for another modality");
  }
  auto train_rows = data.rows(oracle::Split::kTrain);
  const auto dev_rows = data.rows(oracle::Split::kDev);
  if (dev_rows.empty()) throw Error("probe needs dev clips for checkpoint selection");
  if (hyper.max_train_clips > 0 && train_rows.size() > static_cast<std::size_t>(hyper.max_train_clips)) {
    Rng pick(derive_seed(opt.seed, "probe-subset"));
    pick.shuffle(train_rows.begin(), train_rows.end());
    train_rows.resize(static_cast<std::size_t>(hyper.max_train_clips));
    std::sort(train_rows.begin(), train_rows.end());
  }

  Rng head_rng(derive_seed(opt.seed, "probe-head-init"));
  ProbeParams model{encoder, nn::HeadParams::random(encoder.shape.hidden, 3, head_rng)};
  nn::AdamState enc_adam(opt.learning_rate);
  nn::AdamState head_adam(opt.learning_rate);
  Rng shuffle_rng(derive_seed(opt.seed, "probe-shuffle"));

  ProbeResult result;
  result.record.stage = "probe";
  result.record.modality = std::string(features::to_string(data.table().modality().kind()));
  result.record.seed = opt.seed;
  result.record.hyper = opt.to_json();
  result.record.hyper["max_train_clips"] = hyper.max_train_clips;

  const double loss0 = probe_mse(model, data, targets, train_rows);
  result.best_dev_mse = probe_mse(model, data, targets, dev_rows);
  result.model = model;
  result.record.finetune_history.push_back({0, loss0, result.best_dev_mse, std::nullopt});
  if (progress) progress("probe", 0, loss0, result.best_dev_mse);

  int stale = 0;
  for (int epoch = 1; epoch <= opt.max_epochs && stale < opt.patience; ++epoch) {
    const double loss = detail::run_epoch(train_rows, opt.batch_size, shuffle_rng,
                                          [&](std::span<const std::size_t> batch) {
      nn::EncoderParams enc_grad;
      nn::HeadParams head_grad;
      const double l = nn::regression_loss(model.encoder, model.head, data.inputs(batch),
                                           gather_cols(targets.values, batch),
                                           opt.freeze_encoder ? nullptr : &enc_grad, &head_grad);
      detail::update_encoder_and_head(model.encoder, model.head, enc_grad, head_grad, enc_adam,
                                      head_adam, opt.freeze_encoder, opt.clip_norm);
      return l;
    });
    const double dev = probe_mse(model, data, targets, dev_rows);
    result.record.finetune_history.push_back({epoch, loss, dev, std::nullopt});
    if (progress) progress("probe", epoch, loss, dev);
    if (dev < result.best_dev_mse) {
      result.best_dev_mse = dev;
      result.model = model;
      result.record.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
  }
  result.record.final_metrics["dev.mse"] = result.best_dev_mse;
  return result;
}

}  // namespace trajverb::train
