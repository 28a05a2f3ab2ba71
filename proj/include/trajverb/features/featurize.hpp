#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "trajverb/features/embed.hpp"
#include "trajverb/features/raster.hpp"
#include "trajverb/oracle/clip.hpp"
#include "trajverb/tensor.hpp"

namespace trajverb::features {

enum class ModalityKind { kTraj3D, kTraj2D, kImage2D, kImagePlusTraj2D, kImagePlusTraj3D };
inline constexpr int kModalityCount = 5;

inline constexpr int kTraj3DDim = 10;
inline constexpr int kTraj2DDim = 4;

/// Feature condition plus its per-frame width. Constructing one with a width
/// that disagrees with the kind throws.
class Modality {
 public:
  explicit Modality(ModalityKind kind);
  Modality(ModalityKind kind, int dim);

  ModalityKind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool has_image() const;

  static int dim_of(ModalityKind kind);
  static std::vector<Modality> all();

  bool operator==(const Modality&) const = default;

 private:
  ModalityKind kind_;
  int dim_;
};

/// Short identifier used in paths and configs ("traj3d", "image+traj2d", ...).
std::string_view to_string(ModalityKind kind);
/// Row label used in report tables ("3D Trajectory", ...).
std::string_view display_name(ModalityKind kind);
ModalityKind modality_from_string(std::string_view name);

struct FeatureMatrix {
  Modality modality;
  Tensor2 values;
};

/// Per-dimension z-score statistics from the training split.
struct Normalizer {
  static constexpr double kMinStd = 1e-6;

  ModalityKind kind = ModalityKind::kTraj3D;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  bool fitted() const { return mean.size() > 0 && mean.size() == stddev.size(); }
  void apply(Tensor2& rows) const;
  std::string hash() const;
};

void write_normalizer(const std::filesystem::path& path, const Normalizer& norm);
Normalizer read_normalizer(const std::filesystem::path& path);

/// Which part of a clip to featurize.
enum class Window { kInput, kFuture };

/// Shared state for featurization: the camera, its rasterizer, the frozen
/// image embedding, and a memo of per-frame image embeddings (frames are
/// shared between overlapping clips). Not thread-safe.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(Camera camera, std::uint64_t embed_seed = kEmbedSeed);

  const Camera& camera() const { return camera_; }
  const ImageEmbedder& embedder() const { return embedder_; }
  const Rasterizer& rasterizer(const sim::SceneConfig& scene);

  /// Unnormalized rows for a clip window. Traj3D: hand xyz, object xyz,
  /// quaternion xyzw. Traj2D: projected hand uv, object uv, holding the last
  /// in-frame position while a point is out of frame. Image2D: the frozen
  /// embedding of each rendered frame. Combinations put the image part first.
  Tensor2 raw(const oracle::Clip& clip, Modality modality, Window window = Window::kInput);

  /// Same as raw() for an arbitrary frame sequence (no memoization).
  Tensor2 raw_frames(std::span<const sim::Frame> frames, const sim::SceneConfig& scene,
                     Modality modality);

 private:
  Eigen::VectorXd image_row(std::uint64_t episode_seed, const sim::Frame& frame,
                            const sim::SceneConfig& scene, bool memoize);
  Tensor2 build(std::span<const sim::Frame> frames, const sim::SceneConfig& scene,
                Modality modality, std::uint64_t episode_seed, bool memoize);

  Camera camera_;
  ImageEmbedder embedder_;
  std::vector<std::unique_ptr<Rasterizer>> rasterizers_;
  std::map<std::pair<std::uint64_t, std::int64_t>, Eigen::VectorXd> image_memo_;
};

/// Normalized 90 x d feature matrix for a clip. Throws when the normalizer is
/// unfit or was fit for another modality.
FeatureMatrix featurize(const oracle::Clip& clip, Modality modality, FeatureExtractor& extractor,
                        const Normalizer& norm, Window window = Window::kInput);

/// Mean and standard deviation per dimension over every input frame of the
/// given clips (at least 100). Degenerate dimensions get std = 1e-6.
Normalizer fit_normalizer(std::span<const oracle::Clip> clips, Modality modality,
                          FeatureExtractor& extractor);

}  // namespace trajverb::features
