#include "trajverb/features/cache.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "trajverb/hash.hpp"

namespace trajverb::features {
namespace {

constexpr char kMagic[5] = {'V', 'S', 'F', 'C', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error("truncated feature cache " + path.string());
  }
  return v;
}

}  // namespace

FeatureTable::FeatureTable(Modality modality, std::vector<oracle::ClipRef> clips,
                           std::vector<float> values)
    : modality_(modality), clips_(std::move(clips)), values_(std::move(values)) {
  const auto expected = clips_.size() * kRowsPerClip * static_cast<std::size_t>(modality_.dim());
  if (values_.size() != expected) {
    throw Error(fmt::format("feature table holds {} values, expected {}", values_.size(), expected));
  }
}

std::size_t FeatureTable::index_of(const oracle::ClipRef& ref) const {
  const auto it = std::find(clips_.begin(), clips_.end(), ref);
  if (it == clips_.end()) {
    throw Error(fmt::format("clip ({}, {}) missing from feature table", ref.episode_seed,
                            ref.start_frame));
  }
  return static_cast<std::size_t>(it - clips_.begin());
}

Tensor2 FeatureTable::rows(std::size_t i, int first, int count) const {
  const int d = dim();
  const float* base = values_.data() + (i * kRowsPerClip + first) * static_cast<std::size_t>(d);
  using FloatRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const FloatRows>(base, count, d).cast<double>();
}

FeatureTable build_feature_table(std::span<const oracle::Clip> clips, Modality modality,
                                 FeatureExtractor& extractor, const Normalizer& norm) {
  std::vector<oracle::ClipRef> refs;
  std::vector<float> values;
  refs.reserve(clips.size());
  values.reserve(clips.size() * FeatureTable::kRowsPerClip * modality.dim());
  for (const auto& clip : clips) {
    refs.push_back({clip.episode_seed(), clip.start_frame()});
    for (const auto window : {Window::kInput, Window::kFuture}) {
      const auto fm = featurize(clip, modality, extractor, norm, window);
      for (Eigen::Index r = 0; r < fm.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < fm.values.cols(); ++c) {
          values.push_back(static_cast<float>(fm.values(r, c)));
        }
      }
    }
  }
  return FeatureTable(modality, std::move(refs), std::move(values));
}

std::string camera_hash(const Camera& camera) {
  Sha256 h;
  const double v[] = {camera.position.x(), camera.position.y(), camera.position.z(),
                      camera.look_at.x(),  camera.look_at.y(),  camera.look_at.z(),
                      camera.up.x(),       camera.up.y(),       camera.up.z(),
                      camera.vertical_fov_deg, static_cast<double>(camera.image_width),
                      static_cast<double>(camera.image_height)};
  h.update(std::span<const double>(v));
  return h.hex();
}

std::string feature_cache_key(const std::string& dataset_hash, ModalityKind kind,
                              const Camera& camera, const Normalizer& norm) {
  return sha256_hex(fmt::format("{}|{}|{}|{}", dataset_hash, to_string(kind), camera_hash(camera),
                                norm.hash()));
}

void write_feature_table(const std::filesystem::path& path, const FeatureTable& table,
                         const std::string& key) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::int32_t>(out, static_cast<std::int32_t>(table.modality().kind()));
  put<std::int32_t>(out, table.dim());
  put<std::int64_t>(out, static_cast<std::int64_t>(table.size()));
  put<std::int32_t>(out, FeatureTable::kRowsPerClip);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
  out.write(key.data(), static_cast<std::streamsize>(key.size()));
  const auto per_clip = static_cast<std::size_t>(FeatureTable::kRowsPerClip) * table.dim();
  for (std::size_t i = 0; i < table.size(); ++i) {
    put<std::uint64_t>(out, table.clips()[i].episode_seed);
    put<std::int32_t>(out, table.clips()[i].start_frame);
    out.write(reinterpret_cast<const char*>(table.values().data() + i * per_clip),
              static_cast<std::streamsize>(per_clip * sizeof(float)));
  }
  if (!out) throw Error("failed writing " + path.string());
}

FeatureTable read_feature_table(const std::filesystem::path& path, const std::string& expected_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("not a feature cache: " + path.string());
  }
  const auto kind_raw = get<std::int32_t>(in, path);
  if (kind_raw < 0 || kind_raw >= kModalityCount) throw Error("bad modality in " + path.string());
  const auto dim = get<std::int32_t>(in, path);
  const Modality modality(static_cast<ModalityKind>(kind_raw), dim);
  const auto count = get<std::int64_t>(in, path);
  const auto rows = get<std::int32_t>(in, path);
  if (rows != FeatureTable::kRowsPerClip || count < 0) {
    throw Error("unexpected layout in " + path.string());
  }
  std::string key(get<std::uint32_t>(in, path), '\0');
  in.read(key.data(), static_cast<std::streamsize>(key.size()));
  if (!expected_key.empty() && key != expected_key) {
    throw Error("stale feature cache " + path.string());
  }
  const auto per_clip = static_cast<std::size_t>(rows) * dim;
  std::vector<oracle::ClipRef> refs(static_cast<std::size_t>(count));
  std::vector<float> values(refs.size() * per_clip);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    refs[i].episode_seed = get<std::uint64_t>(in, path);
    refs[i].start_frame = get<std::int32_t>(in, path);
    if (!in.read(reinterpret_cast<char*>(values.data() + i * per_clip),
                 static_cast<std::streamsize>(per_clip * sizeof(float)))) {
      throw Error("truncated feature cache " + path.string());
    }
  }
  return FeatureTable(modality, std::move(refs), std::move(values));
}

}  // namespace trajverb::features
