#include "trajverb/features/featurize.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "json.hpp"
#include "trajverb/hash.hpp"

namespace trajverb::features {
namespace {

struct ModalityInfo {
  ModalityKind kind;
  std::string_view id;
  std::string_view display;
};

constexpr std::array<ModalityInfo, kModalityCount> kModalities = {{
    {ModalityKind::kTraj3D, "traj3d", "3D Trajectory"},
    {ModalityKind::kTraj2D, "traj2d", "2D Trajectory"},
    {ModalityKind::kImage2D, "image2d", "2D Image"},
    {ModalityKind::kImagePlusTraj2D, "image+traj2d", "2D Image + 2D Trajectory"},
    {ModalityKind::kImagePlusTraj3D, "image+traj3d", "2D Image + 3D Trajectory"},
}};

void fill_traj3d(Tensor2& out, int col, std::span<const sim::Frame> frames) {
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    const auto row = static_cast<Eigen::Index>(t);
    out.block(row, col, 1, 3) = f.hand_pos.transpose();
    out.block(row, col + 3, 1, 3) = f.obj_pos.transpose();
    out(row, col + 6) = f.obj_rot.x();
    out(row, col + 7) = f.obj_rot.y();
    out(row, col + 8) = f.obj_rot.z();
    out(row, col + 9) = f.obj_rot.w();
  }
}

// Projects one tracked point per frame; out-of-frame samples repeat the last
// in-frame position. Leading out-of-frame samples take the first in-frame
// position, and a point never in frame sits at the image centre.
void fill_projected(Tensor2& out, int col, std::span<const sim::Frame> frames, const Camera& camera,
                    bool hand) {
  std::vector<Projection> proj;
  proj.reserve(frames.size());
  for (const auto& f : frames) proj.push_back(project(camera, hand ? f.hand_pos : f.obj_pos));
  double u = 0.5;
  double v = 0.5;
  for (const auto& p : proj) {
    if (p.in_frame) {
      u = p.u;
      v = p.v;
      break;
    }
  }
  for (std::size_t t = 0; t < proj.size(); ++t) {
    if (proj[t].in_frame) {
      u = proj[t].u;
      v = proj[t].v;
    }
    out(static_cast<Eigen::Index>(t), col) = u;
    out(static_cast<Eigen::Index>(t), col + 1) = v;
  }
}

}  // namespace

Modality::Modality(ModalityKind kind) : kind_(kind), dim_(dim_of(kind)) {}

Modality::Modality(ModalityKind kind, int dim) : kind_(kind), dim_(dim) {
  if (dim != dim_of(kind)) {
    throw Error(fmt::format("modality {} has dimension {}, not {}", to_string(kind), dim_of(kind), dim));
  }
}

bool Modality::has_image() const {
  return kind_ == ModalityKind::kImage2D || kind_ == ModalityKind::kImagePlusTraj2D ||
         kind_ == ModalityKind::kImagePlusTraj3D;
}

int Modality::dim_of(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::kTraj3D: return kTraj3DDim;
    case ModalityKind::kTraj2D: return kTraj2DDim;
    case ModalityKind::kImage2D: return kEmbedDim;
    case ModalityKind::kImagePlusTraj2D: return kEmbedDim + kTraj2DDim;
    case ModalityKind::kImagePlusTraj3D: return kEmbedDim + kTraj3DDim;
  }
  return 0;
}

std::vector<Modality> Modality::all() {
  std::vector<Modality> out;
  for (const auto& info : kModalities) out.emplace_back(info.kind);
  return out;
}

std::string_view to_string(ModalityKind kind) { return kModalities[static_cast<int>(kind)].id; }
std::string_view display_name(ModalityKind kind) { return kModalities[static_cast<int>(kind)].display; }

ModalityKind modality_from_string(std::string_view name) {
  for (const auto& info : kModalities) {
    if (info.id == name) return info.kind;
  }
  throw ConfigError("modalities", "unknown modality '" + std::string(name) + "'");
}

void Normalizer::apply(Tensor2& rows) const {
  if (!fitted()) throw Error("normalizer used before fitting");
  if (rows.cols() != mean.size()) {
    throw Error(fmt::format("normalizer has {} dims, features have {}", mean.size(), rows.cols()));
  }
  rows.rowwise() -= mean.transpose();
  rows.array().rowwise() /= stddev.transpose().array();
}

std::string Normalizer::hash() const {
  Sha256 h;
  h.update(to_string(kind));
  h.update(std::span<const double>(mean.data(), static_cast<std::size_t>(mean.size())));
  h.update(std::span<const double>(stddev.data(), static_cast<std::size_t>(stddev.size())));
  return h.hex();
}

void write_normalizer(const std::filesystem::path& path, const Normalizer& norm) {
  nlohmann::ordered_json j;
  j["modality"] = std::string(to_string(norm.kind));
  j["mean"] = std::vector<double>(norm.mean.data(), norm.mean.data() + norm.mean.size());
  j["stddev"] = std::vector<double>(norm.stddev.data(), norm.stddev.data() + norm.stddev.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Normalizer read_normalizer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const auto j = nlohmann::json::parse(in);
  Normalizer n;
  n.kind = modality_from_string(j.at("modality").get<std::string>());
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("stddev").get<std::vector<double>>();
  if (mean.size() != sd.size()) throw Error("normalizer mean/stddev size mismatch in " + path.string());
  n.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  n.stddev = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  return n;
}

FeatureExtractor::FeatureExtractor(Camera camera, std::uint64_t embed_seed)
    : camera_(std::move(camera)), embedder_(embed_seed) {
  camera_.validate();
}

const Rasterizer& FeatureExtractor::rasterizer(const sim::SceneConfig& scene) {
  for (const auto& r : rasterizers_) {
    if (r->compatible_with(scene)) return *r;
  }
  rasterizers_.push_back(std::make_unique<Rasterizer>(camera_, scene));
  return *rasterizers_.back();
}

Eigen::VectorXd FeatureExtractor::image_row(std::uint64_t episode_seed, const sim::Frame& frame,
                                            const sim::SceneConfig& scene, bool memoize) {
  if (memoize) {
    const auto key = std::make_pair(episode_seed, frame.t_index);
    if (auto it = image_memo_.find(key); it != image_memo_.end()) return it->second;
    auto row = embedder_.embed(rasterizer(scene).render(frame, scene));
    image_memo_.emplace(key, row);
    return row;
  }
  return embedder_.embed(rasterizer(scene).render(frame, scene));
}

Tensor2 FeatureExtractor::build(std::span<const sim::Frame> frames, const sim::SceneConfig& scene,
                                Modality modality, std::uint64_t episode_seed, bool memoize) {
  Tensor2 out(static_cast<Eigen::Index>(frames.size()), modality.dim());
  int col = 0;
  if (modality.has_image()) {
    for (std::size_t t = 0; t < frames.size(); ++t) {
      out.block(static_cast<Eigen::Index>(t), 0, 1, kEmbedDim) =
          image_row(episode_seed, frames[t], scene, memoize).transpose();
    }
    col = kEmbedDim;
  }
  switch (modality.kind()) {
    case ModalityKind::kTraj3D:
    case ModalityKind::kImagePlusTraj3D:
      fill_traj3d(out, col, frames);
      break;
    case ModalityKind::kTraj2D:
    case ModalityKind::kImagePlusTraj2D:
      fill_projected(out, col, frames, camera_, true);
      fill_projected(out, col + 2, frames, camera_, false);
      break;
    case ModalityKind::kImage2D:
      break;
  }
  if (!out.allFinite()) throw Error("non-finite features for episode " + std::to_string(episode_seed));
  return out;
}

Tensor2 FeatureExtractor::raw(const oracle::Clip& clip, Modality modality, Window window) {
  const auto frames = window == Window::kInput ? clip.frames() : clip.future();
  return build(frames, clip.scene(), modality, clip.episode_seed(), true);
}

Tensor2 FeatureExtractor::raw_frames(std::span<const sim::Frame> frames,
                                     const sim::SceneConfig& scene, Modality modality) {
  return build(frames, scene, modality, 0, false);
}

FeatureMatrix featurize(const oracle::Clip& clip, Modality modality, FeatureExtractor& extractor,
                        const Normalizer& norm, Window window) {
  if (!norm.fitted()) throw Error("featurize: normalizer is not fitted");
  if (norm.kind != modality.kind()) {
    throw Error(fmt::format("featurize: normalizer fit for {}, asked for {}", to_string(norm.kind),
                            to_string(modality.kind())));
  }
  FeatureMatrix fm{modality, extractor.raw(clip, modality, window)};
  norm.apply(fm.values);
  return fm;
}

Normalizer fit_normalizer(std::span<const oracle::Clip> clips, Modality modality,
                          FeatureExtractor& extractor) {
  if (clips.size() < 100) {
    throw Error(fmt::format("fit_normalizer needs >= 100 clips, got {}", clips.size()));
  }
  const int d = modality.dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
  double count = 0.0;
  // Two passes (mean, then centred second moment) for accuracy.
  std::vector<Tensor2> cached;
  cached.reserve(clips.size());
  for (const auto& clip : clips) {
    cached.push_back(extractor.raw(clip, modality));
    sum += cached.back().colwise().sum().transpose();
    count += static_cast<double>(cached.back().rows());
  }
  const Eigen::VectorXd mean = sum / count;
  for (const auto& rows : cached) {
    sum_sq += (rows.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  Normalizer n;
  n.kind = modality.kind();
  n.mean = mean;
  n.stddev = (sum_sq / count).array().sqrt().max(Normalizer::kMinStd).matrix();
  return n;
}

}  // namespace trajverb::features
