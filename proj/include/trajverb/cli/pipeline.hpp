#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "trajverb/cli/config.hpp"
#include "trajverb/features/cache.hpp"
#include "trajverb/sim/scene.hpp"
#include "trajverb/error.hpp"

namespace trajverb::cli {

/// An upstream stage has not produced the artifact a stage needs (or
/// produced it under a different configuration). Maps to exit code 2.
class MissingArtifact : public Error {
 public:
  MissingArtifact(std::string stage, const std::string& what)
      : Error(what + " (run '" + stage + "' first)"), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// A stage precondition that no upstream stage can fix, such as a report
/// over fewer than two seeds. Also exit code 2.
class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

struct PipelineOptions {
  std::filesystem::path out = "out";
  bool force = false;
  int jobs = 1;
  /// Progress lines; null silences them.
  std::ostream* log = nullptr;
};

inline const std::vector<std::string> kStages{"gen",      "label",    "featurize",
                                              "gridsearch", "pretrain", "finetune",
                                              "probe",    "report",   "all"};

/// Identifier of the Random-encoder condition in run paths and reports.
inline constexpr const char* kRandomCondition = "random";

/// Runs pipeline stages against one configuration. Every stage writes a
/// stamp holding the hash of its inputs next to its outputs and is skipped
/// when that stamp is current, unless `force` is set.
///
/// Layout under `out`:
///   data/episodes/ep_<i>.json, data/annotations.jsonl, data/splits.json
///   features/<modality>.vsfc, features/<modality>.norm.json
///   runs/<experiment>/<modality>/grid.json
///   runs/<experiment>/<condition>/<seed>/{pretrain,finetune,probe}.*
///   report/<experiment>/
class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, PipelineOptions options);
  ~Pipeline();

  const ExperimentConfig& config() const { return cfg_; }

  /// Dispatches a stage by name; throws ConfigError for an unknown name.
  void run(const std::string& stage);

  void gen();
  void label();
  void featurize();
  void gridsearch();
  void pretrain();
  void finetune();
  void probe();
  void report();
  void all();

  std::filesystem::path data_dir() const;
  std::filesystem::path feature_path(features::ModalityKind kind) const;
  std::filesystem::path run_dir(const std::string& condition, std::uint64_t seed) const;
  std::filesystem::path report_dir() const;

  /// Conditions trained per seed: every configured modality plus Random.
  std::vector<std::string> conditions() const;

 private:
  struct State;

  std::string gen_key() const;
  std::string label_key() const;
  std::string feature_key(features::ModalityKind kind) const;
  std::string grid_key(features::ModalityKind kind) const;
  train::PretrainHyper pretrain_hyper(features::ModalityKind kind) const;
  std::string pretrain_key(const std::string& condition, std::uint64_t seed) const;
  std::string finetune_key(const std::string& condition, std::uint64_t seed) const;
  std::string probe_key(const std::string& condition, std::uint64_t seed) const;
  std::uint64_t run_seed(std::uint64_t seed) const;
  features::ModalityKind condition_modality(const std::string& condition) const;

  const std::vector<std::shared_ptr<const sim::Episode>>& episodes();
  const oracle::AnnotationSet& annotations();
  const features::FeatureTable& table(features::ModalityKind kind);
  /// Clip objects in the row order of table(kind).
  std::vector<oracle::Clip> table_clips(features::ModalityKind kind);

  void log(const std::string& line) const;
  bool skip(const std::filesystem::path& stamp, const std::string& key) const;

  ExperimentConfig cfg_;
  PipelineOptions opt_;
  std::unique_ptr<State> state_;
  mutable std::mutex log_mu_;
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Rethrows the first
/// exception after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Writes text to a sibling temp file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace trajverb::cli
