#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "trajverb/nn/model.hpp"
#include "trajverb/train/data.hpp"
#include "trajverb/train/record.hpp"

namespace trajverb::train {

struct PretrainHyper {
  int batch_size = 32;
  double learning_rate = 1e-3;
  double gamma = 0.97;
  int hidden_width = 32;
  int ff_layers = 1;
  int epochs = 8;
  /// Global gradient-norm cap; <= 0 disables clipping.
  double clip_norm = 1.0;
  nn::RolloutMode rollout = nn::RolloutMode::kClosedLoop;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Progress callback: (stage, epoch, train loss, dev metric).
using ProgressFn = std::function<void(const std::string&, int, double, double)>;

struct PretrainResult {
  nn::EncoderParams encoder;
  RunRecord record;
  double best_dev_loss = std::numeric_limits<double>::infinity();
};

/// Self-supervised future prediction on every train-split clip. Returns the
/// epoch (0 = untrained) with the lowest dev loss. Throws TrainingDiverged
/// when the training loss exceeds 10x its initial value for two consecutive
/// epochs or becomes non-finite.
PretrainResult pretrain(const SplitLoader& data, const PretrainHyper& hyper,
                        const ProgressFn& progress = {});

/// Mean discounted MSE over the given rows.
double pretrain_eval(const nn::EncoderParams& encoder, const SplitLoader& data,
                     std::span<const std::size_t> rows, const PretrainHyper& hyper);

struct GridCell {
  PretrainHyper hyper;
  double dev_loss = std::numeric_limits<double>::infinity();
  bool diverged = false;
};

struct GridResult {
  PretrainHyper best;
  std::size_t best_index = 0;
  std::vector<GridCell> cells;
};

/// Pretrains each cell (diverging cells score +inf) and keeps the lowest dev
/// loss. Ties go to the smaller hidden width, then larger gamma, then lower
/// learning rate, then earlier declaration.
GridResult grid_search(const std::vector<PretrainHyper>& grid, const SplitLoader& data,
                       const ProgressFn& progress = {});

/// Index of the winning cell under the ordering used by grid_search.
std::size_t select_grid_cell(const std::vector<GridCell>& cells);

}  // namespace trajverb::train
