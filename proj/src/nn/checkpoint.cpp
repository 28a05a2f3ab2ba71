#include "trajverb/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "trajverb/error.hpp"

namespace trajverb::nn {
namespace {

constexpr char kMagic[5] = {'V', 'S', 'C', 'K', '1'};

void put_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::int32_t get_i32(std::istream& in, const std::filesystem::path& path) {
  std::int32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw Error("truncated checkpoint " + path.string());
  return v;
}

void put_values(std::ostream& out, const ParamSet& p) {
  out.write(reinterpret_cast<const char*>(p.values().data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
}

void get_values(std::istream& in, ParamSet& p, const std::filesystem::path& path) {
  if (!in.read(reinterpret_cast<char*>(p.values().data()),
               static_cast<std::streamsize>(p.size() * sizeof(double)))) {
    throw Error("truncated checkpoint " + path.string());
  }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_i32(out, ckpt.modality_kind);
  put_i32(out, ckpt.encoder.shape.input_dim);
  put_i32(out, ckpt.encoder.shape.hidden);
  put_i32(out, ckpt.encoder.shape.ff_layers);
  put_i32(out, ckpt.head ? ckpt.head->out : 0);
  put_values(out, ckpt.encoder.params);
  if (ckpt.head) put_values(out, ckpt.head->params);
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("not a checkpoint: " + path.string());
  }
  Checkpoint ckpt;
  ckpt.modality_kind = get_i32(in, path);
  EncoderShape shape;
  shape.input_dim = get_i32(in, path);
  shape.hidden = get_i32(in, path);
  shape.ff_layers = get_i32(in, path);
  const int head_out = get_i32(in, path);
  ckpt.encoder = EncoderParams::zeros(shape);
  get_values(in, ckpt.encoder.params, path);
  if (head_out > 0) {
    ckpt.head = HeadParams::zeros(shape.hidden, head_out);
    get_values(in, ckpt.head->params, path);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in " + path.string());
  return ckpt;
}

}  // namespace trajverb::nn
