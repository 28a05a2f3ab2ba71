#include "trajverb/train/pretrain.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "loop.hpp"
#include "trajverb/features/featurize.hpp"
#include "trajverb/nn/optim.hpp"

namespace trajverb::train {

void PretrainHyper::validate() const {
  if (batch_size < 1) throw ConfigError("pretrain.batch_size", "must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("pretrain.learning_rate", "must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("pretrain.gamma", "must lie in (0, 1]");
  if (hidden_width < 1) throw ConfigError("pretrain.hidden_width", "must be >= 1");
  if (ff_layers < 1) throw ConfigError("pretrain.ff_layers", "must be >= 1");
  if (epochs < 1) throw ConfigError("pretrain.epochs", "must be >= 1");
}

nlohmann::ordered_json PretrainHyper::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["gamma"] = gamma;
  j["hidden_width"] = hidden_width;
  j["ff_layers"] = ff_layers;
  j["epochs"] = epochs;
  j["clip_norm"] = clip_norm;
  j["rollout"] = rollout == nn::RolloutMode::kClosedLoop ? "closed_loop" : "teacher_forced";
  j["seed"] = seed;
  return j;
}

double pretrain_eval(const nn::EncoderParams& encoder, const SplitLoader& data,
                     std::span<const std::size_t> rows, const PretrainHyper& hyper) {
  return detail::evaluate_chunks(rows, [&](std::span<const std::size_t> chunk) {
    return nn::pretrain_loss(encoder, data.inputs(chunk), data.futures(chunk), hyper.gamma,
                             hyper.rollout, nullptr);
  });
}

PretrainResult pretrain(const SplitLoader& data, const PretrainHyper& hyper,
                        const ProgressFn& progress) {
  hyper.validate();
  const auto train_rows = data.rows(oracle::Split::kTrain);
  const auto dev_rows = data.rows(oracle::Split::kDev);
  if (train_rows.size() < static_cast<std::size_t>(hyper.batch_size)) {
    throw Error(fmt::format("pretrain needs at least {} training clips, got {}", hyper.batch_size,
                            train_rows.size()));
  }
  if (dev_rows.empty()) throw Error("pretrain needs dev clips for checkpoint selection");

  Rng init_rng(derive_seed(hyper.seed, "encoder-init"));
  nn::EncoderParams enc = nn::EncoderParams::random(
      {data.table().dim(), hyper.hidden_width, hyper.ff_layers}, init_rng);
  nn::AdamState adam(hyper.learning_rate);
  Rng shuffle_rng(derive_seed(hyper.seed, "pretrain-shuffle"));

  PretrainResult result;
  result.record.stage = "pretrain";
  result.record.modality = std::string(features::to_string(data.table().modality().kind()));
  result.record.seed = hyper.seed;
  result.record.hyper = hyper.to_json();

  const double initial = pretrain_eval(enc, data, train_rows, hyper);
  const double dev0 = pretrain_eval(enc, data, dev_rows, hyper);
  result.record.pretrain_history.push_back({0, initial, dev0, std::nullopt});
  result.encoder = enc;
  result.best_dev_loss = dev0;
  if (progress) progress("pretrain", 0, initial, dev0);

  int blown = 0;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    double train_loss = 0.0;
    try {
      train_loss = detail::run_epoch(train_rows, hyper.batch_size, shuffle_rng,
                                     [&](std::span<const std::size_t> batch) {
                                       nn::EncoderParams grad;
                                       const double loss = nn::pretrain_loss(
                                           enc, data.inputs(batch), data.futures(batch),
                                           hyper.gamma, hyper.rollout, &grad);
                                       nn::clip_grad_norm(grad.params, hyper.clip_norm);
                                       nn::adam_step(enc.params, grad.params, adam);
                                       return loss;
                                     });
    } catch (const TrainingDiverged&) {
      throw;
    } catch (const Error& e) {
      throw TrainingDiverged(fmt::format("pretraining diverged in epoch {}: {}", epoch, e.what()));
    }
    if (!std::isfinite(train_loss)) {
      throw TrainingDiverged(fmt::format("pretraining loss became non-finite in epoch {}", epoch));
    }
    blown = train_loss > 10.0 * initial ? blown + 1 : 0;
    if (blown >= 2) {
      throw TrainingDiverged(fmt::format(
          "pretraining diverged: loss {:.4g} exceeded 10x the initial {:.4g} for two epochs "
          "(learning rate {})",
          train_loss, initial, hyper.learning_rate));
    }
    const double dev = pretrain_eval(enc, data, dev_rows, hyper);
    result.record.pretrain_history.push_back({epoch, train_loss, dev, std::nullopt});
    if (progress) progress("pretrain", epoch, train_loss, dev);
    if (dev < result.best_dev_loss) {
      result.best_dev_loss = dev;
      result.encoder = enc;
      result.record.best_epoch = epoch;
    }
  }
  result.record.final_metrics["best_dev_loss"] = result.best_dev_loss;
  return result;
}

std::size_t select_grid_cell(const std::vector<GridCell>& cells) {
  if (cells.empty()) throw Error("grid search over an empty grid");
  std::size_t best = 0;
  const auto better = [](const GridCell& a, const GridCell& b) {
    if (a.dev_loss != b.dev_loss) return a.dev_loss < b.dev_loss;
    if (a.hyper.hidden_width != b.hyper.hidden_width) return a.hyper.hidden_width < b.hyper.hidden_width;
    if (a.hyper.gamma != b.hyper.gamma) return a.hyper.gamma > b.hyper.gamma;
    return a.hyper.learning_rate < b.hyper.learning_rate;
  };
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (better(cells[i], cells[best])) best = i;
  }
  return best;
}

GridResult grid_search(const std::vector<PretrainHyper>& grid, const SplitLoader& data,
                       const ProgressFn& progress) {
  if (grid.empty()) throw Error("grid search over an empty grid");
  GridResult out;
  for (const auto& h : grid) {
    GridCell cell{h};
    try {
      cell.dev_loss = pretrain(data, h, progress).best_dev_loss;
    } catch (const TrainingDiverged&) {
      cell.diverged = true;
    }
    out.cells.push_back(cell);
  }
  out.best_index = select_grid_cell(out.cells);
  out.best = out.cells[out.best_index].hyper;
  return out;
}

}  // namespace trajverb::train
