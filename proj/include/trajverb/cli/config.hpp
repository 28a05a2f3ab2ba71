#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajverb/features/featurize.hpp"
#include "trajverb/oracle/annotation.hpp"
#include "trajverb/train/probe.hpp"

namespace trajverb::cli {

/// Lattice for the pretraining grid search. Cells inherit every other field
/// from the base pretraining settings.
struct GridConfig {
  bool enabled = false;
  int epochs = 2;
  std::vector<int> batch_size{16, 64};
  std::vector<double> learning_rate{1e-3, 3e-4};
  std::vector<double> gamma{0.9, 0.97, 1.0};
  std::vector<int> hidden_width{64, 128};

  /// Cells in declaration order: batch size outermost, hidden width innermost.
  std::vector<train::PretrainHyper> cells(const train::PretrainHyper& base) const;
};

/// Held-out fall clips with heavy counter occlusion (see stress.hpp).
struct StressConfig {
  bool enabled = true;
  int episodes = 150;
  double min_occluded_fraction = 0.3;
  int bootstrap_draws = 1000;
};

struct ExperimentConfig {
  std::string experiment = "default";
  std::uint64_t seed_root = 1;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  int episodes = 400;
  /// Stride between the clip windows used for pretraining and probing.
  int clip_stride = 60;
  int per_verb = 100;
  int annotation_stride = 10;

  std::vector<oracle::Verb> verbs = oracle::default_verbs();
  std::vector<features::ModalityKind> modalities{
      features::ModalityKind::kTraj3D, features::ModalityKind::kTraj2D,
      features::ModalityKind::kImage2D, features::ModalityKind::kImagePlusTraj2D,
      features::ModalityKind::kImagePlusTraj3D};

  sim::SceneConfig scene;
  oracle::OracleConfig oracle;
  features::Camera camera;

  train::PretrainHyper pretrain;
  GridConfig grid;
  train::FinetuneHyper finetune;
  /// Capped below the full train split to hold runtime.
  train::ProbeHyper probe{.optim = {}, .max_train_clips = 600};

  /// Input features of the untrained frozen encoder behind the Random row.
  features::ModalityKind random_modality = features::ModalityKind::kTraj3D;

  int bootstrap_draws = 1000;
  StressConfig stress;

  /// Throws ConfigError with the dotted path of the first invalid field.
  void validate() const;
};

/// Canonical JSON form; hashing it identifies a configuration.
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

/// Parses a configuration tree. Unknown keys are errors; missing keys keep
/// their defaults.
ExperimentConfig config_from_json(const nlohmann::json& tree);

/// Environment overrides: a variable PREFIX + "SECTION__KEY" (case
/// insensitive, "__" separating levels) replaces that key. The value is read
/// as YAML, so lists ("[1, 2]") and numbers work.
inline constexpr const char* kEnvPrefix = "TRAJVERB_";
void apply_env_overrides(nlohmann::json& tree, const std::map<std::string, std::string>& env);

/// Current process environment, restricted to kEnvPrefix variables.
std::map<std::string, std::string> prefixed_environment();

/// Reads a YAML file, applies overrides and validates.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::map<std::string, std::string>& env = {});

/// YAML text converted to a JSON tree (scalars typed as bool, integer, float
/// or string in that order of preference).
nlohmann::json yaml_to_json(const std::string& text);

}  // namespace trajverb::cli
