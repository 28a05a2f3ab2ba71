#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "trajverb/cli/pipeline.hpp"

using namespace trajverb;

int main(int argc, char** argv) {
  CLI::App app{"Trajectory verb-learning testbed"};
  std::string stage;
  std::string config_path;
  std::string out = "out";
  bool force = false;
  bool quiet = false;
  int jobs = 1;
  std::optional<std::uint64_t> seed_root;
  std::optional<int> episodes;

  app.add_option("stage", stage, "gen | label | featurize | gridsearch | pretrain | finetune | probe | report | all")
      ->required()
      ->check(CLI::IsMember(cli::kStages));
  app.add_option("--config", config_path, "YAML experiment config (defaults apply when omitted)");
  app.add_option("--out", out, "Artifact root directory");
  app.add_flag("--force", force, "Re-run stages even when their outputs are current");
  app.add_option("--jobs", jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
  app.add_option("--seed-root", seed_root, "Root seed (overrides the config)");
  app.add_option("--episodes", episodes, "Episode count (overrides the config)");
  app.add_flag("--quiet", quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const auto env = cli::prefixed_environment();
    cli::ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = cli::load_config(config_path, env);
    } else {
      nlohmann::json tree = nlohmann::json::object();
      cli::apply_env_overrides(tree, env);
      cfg = cli::config_from_json(tree);
    }
    if (seed_root) cfg.seed_root = *seed_root;
    if (episodes) cfg.episodes = *episodes;
    cfg.validate();

    cli::PipelineOptions opt;
    opt.out = out;
    opt.force = force;
    opt.jobs = jobs;
    opt.log = quiet ? nullptr : &std::cerr;
    cli::Pipeline pipeline(cfg, opt);
    pipeline.run(stage);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 1;
  } catch (const cli::MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return 2;
  } catch (const cli::PreconditionFailed& e) {
    std::cerr << "precondition failed: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
