#pragma once

#include <filesystem>
#include <optional>

#include "trajverb/nn/model.hpp"

namespace trajverb::nn {

struct Checkpoint {
  int modality_kind = 0;
  EncoderParams encoder;
  std::optional<HeadParams> head;
};

/// Binary layout: "VSCK1", then int32 modality kind, input dim, hidden width,
/// feed-forward layer count and head output count (0 when there is no head),
/// then every encoder parameter as float64 in block order (ff0.W, ff0.b, ...,
/// lstm.Wx, lstm.Wh, lstm.b, dec.W, dec.b; matrices column-major), then the
/// head's W and b. Little-endian host order.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace trajverb::nn
