#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string_view>
#include <vector>

#include "trajverb/oracle/clip.hpp"
#include "trajverb/oracle/labeler.hpp"

namespace trajverb::oracle {

enum class Split { kTrain, kDev, kTest };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct ClipRef {
  std::uint64_t episode_seed = 0;
  int start_frame = 0;

  auto operator<=>(const ClipRef&) const = default;
};

struct Annotation {
  ClipRef clip;
  Verb verb = Verb::kFall;
  bool label = false;
  Split split = Split::kTrain;
};

struct AnnotationSet {
  std::vector<Annotation> entries;
  int per_verb_count = 0;
  /// Split of every episode in the pool, including ones with no entries.
  std::map<std::uint64_t, Split> episode_split;

  std::vector<Annotation> for_verb(Verb verb) const;
  double positive_fraction(Verb verb) const;
};

struct AnnotationOptions {
  int per_verb = 100;
  int stride = 30;
  std::uint64_t seed = 0;
  double min_positive = 0.3;
  double max_positive = 0.6;
};

/// Assigns episodes to train/dev/test (70/10/20 by episode), then for each
/// verb samples `per_verb` clips so that positives make up 30-60% overall and
/// within every split. Throws naming the verb when the pool cannot satisfy
/// the balance constraint.
AnnotationSet build_annotation_set(const std::vector<std::shared_ptr<const sim::Episode>>& episodes,
                                   const std::vector<Verb>& verbs, const OracleConfig& oracle,
                                   const AnnotationOptions& options);

/// Deterministic 70/10/20 episode split.
std::map<std::uint64_t, Split> split_episodes(const std::vector<std::uint64_t>& seeds,
                                              std::uint64_t seed);

/// One JSON object per line: {episode_seed, start_frame, verb, label, split}.
void write_annotations(const std::filesystem::path& path, const AnnotationSet& set);
AnnotationSet read_annotations(const std::filesystem::path& path);

/// Episode split table as a JSON object {"<seed>": "train" | "dev" | "test"}.
void write_splits(const std::filesystem::path& path, const std::map<std::uint64_t, Split>& splits);
std::map<std::uint64_t, Split> read_splits(const std::filesystem::path& path);

}  // namespace trajverb::oracle
