#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "trajverb/nn/model.hpp"
#include "trajverb/nn/optim.hpp"
#include "trajverb/rng.hpp"

namespace trajverb::train::detail {

// One pass over `rows` in shuffled minibatches. `step` gets the batch rows,
// returns the batch-mean loss, and applies its own update. Returns the
// example-weighted mean loss.
template <typename Step>
double run_epoch(std::vector<std::size_t> rows, int batch_size, Rng& rng, Step&& step) {
  rng.shuffle(rows.begin(), rows.end());
  double total = 0.0;
  for (std::size_t first = 0; first < rows.size(); first += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min(rows.size() - first, static_cast<std::size_t>(batch_size));
    const std::span<const std::size_t> batch(rows.data() + first, count);
    total += step(batch) * static_cast<double>(count);
  }
  return total / static_cast<double>(rows.size());
}

// Example-weighted mean of `eval` over fixed-size chunks, without updates.
template <typename Eval>
double evaluate_chunks(std::span<const std::size_t> rows, Eval&& eval, std::size_t chunk = 128) {
  double total = 0.0;
  for (std::size_t first = 0; first < rows.size(); first += chunk) {
    const auto count = std::min(rows.size() - first, chunk);
    total += eval(rows.subspan(first, count)) * static_cast<double>(count);
  }
  return total / static_cast<double>(rows.size());
}

// Clips encoder and head gradients jointly to `clip_norm`, then steps both
// (the encoder only when it is not frozen).
inline void update_encoder_and_head(nn::EncoderParams& enc, nn::HeadParams& head,
                                    nn::EncoderParams& enc_grad, nn::HeadParams& head_grad,
                                    nn::AdamState& enc_adam, nn::AdamState& head_adam,
                                    bool freeze_encoder, double clip_norm) {
  double sq = head_grad.params.values().squaredNorm();
  if (!freeze_encoder) sq += enc_grad.params.values().squaredNorm();
  const double norm = std::sqrt(sq);
  if (clip_norm > 0.0 && norm > clip_norm) {
    head_grad.params.values() *= clip_norm / norm;
    if (!freeze_encoder) enc_grad.params.values() *= clip_norm / norm;
  }
  if (!freeze_encoder) nn::adam_step(enc.params, enc_grad.params, enc_adam);
  nn::adam_step(head.params, head_grad.params, head_adam);
}

}  // namespace trajverb::train::detail
