#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajverb/features/featurize.hpp"
#include "trajverb/oracle/annotation.hpp"

namespace trajverb::features {

/// Normalized features for a list of clips, stored as 32-bit floats. Each clip
/// holds its 90 input rows followed by its 60 future rows, so one table feeds
/// both pretraining targets and classifier inputs.
class FeatureTable {
 public:
  static constexpr int kRowsPerClip = sim::kClipFrames + sim::kFutureFrames;

  FeatureTable() = default;
  FeatureTable(Modality modality, std::vector<oracle::ClipRef> clips, std::vector<float> values);

  Modality modality() const { return modality_; }
  int dim() const { return modality_.dim(); }
  std::size_t size() const { return clips_.size(); }
  const std::vector<oracle::ClipRef>& clips() const { return clips_; }
  const std::vector<float>& values() const { return values_; }

  /// Position of a clip in the table; throws if absent.
  std::size_t index_of(const oracle::ClipRef& ref) const;

  /// Rows [first, first + count) of clip i, widened to doubles.
  Tensor2 rows(std::size_t i, int first, int count) const;
  Tensor2 input(std::size_t i) const { return rows(i, 0, sim::kClipFrames); }
  Tensor2 future(std::size_t i) const { return rows(i, sim::kClipFrames, sim::kFutureFrames); }

 private:
  Modality modality_{ModalityKind::kTraj3D};
  std::vector<oracle::ClipRef> clips_;
  std::vector<float> values_;
};

/// Featurizes and normalizes every clip (input and future windows).
FeatureTable build_feature_table(std::span<const oracle::Clip> clips, Modality modality,
                                 FeatureExtractor& extractor, const Normalizer& norm);

std::string camera_hash(const Camera& camera);

/// Cache identity: hash of the dataset, modality, camera and normalizer.
std::string feature_cache_key(const std::string& dataset_hash, ModalityKind kind,
                              const Camera& camera, const Normalizer& norm);

/// Binary layout: "VSFC1", int32 modality kind, int32 dim, int64 clip count,
/// int32 rows per clip, uint32 key length + key bytes, then per clip its
/// (episode seed u64, start frame i32) followed by rows x dim float32 values
/// in row-major order. Little-endian host order.
void write_feature_table(const std::filesystem::path& path, const FeatureTable& table,
                         const std::string& key);

/// Reads a table; throws if the file is malformed or its key differs from
/// `expected_key` (when non-empty).
FeatureTable read_feature_table(const std::filesystem::path& path,
                                const std::string& expected_key = {});

}  // namespace trajverb::features
