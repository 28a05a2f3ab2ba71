#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajverb/eval/metrics.hpp"

namespace trajverb::eval {

/// Test-split outputs of one (condition, seed) run.
struct SeedResult {
  std::uint64_t seed = 0;
  /// One entry per test annotation, in annotation order.
  std::vector<ScoredEntry> test_scores;
  std::optional<double> probe_test_mse;
  std::optional<double> probe_dev_mse;
};

struct Condition {
  std::string id;     // "traj3d", "random", ...
  std::string label;  // table row label
  std::vector<SeedResult> seeds;
};

/// A metric over seeds: the per-seed values and their Student-t interval.
struct SeedStat {
  std::vector<double> per_seed;
  Interval ci;
};

struct ConditionSummary {
  std::string id;
  std::string label;
  std::vector<std::uint64_t> seeds;
  SeedStat micro;
  SeedStat macro;
  std::map<oracle::Verb, SeedStat> per_verb;
  /// Per verb: AP of the seed-averaged scores with a bootstrap interval over
  /// clips.
  std::map<oracle::Verb, Interval> per_verb_bootstrap;
  std::optional<SeedStat> probe_mse;
  std::optional<SeedStat> probe_dev_mse;
};

/// Seed-wise metrics for a condition. Needs >= 2 seeds with identical entry
/// lists (same clips and verbs in the same order).
ConditionSummary summarize(const Condition& cond, int bootstrap_draws, std::uint64_t seed);

/// Coin-flip condition over the same test entries: per seed, one uniform
/// score per entry drawn from derive_seed(seed_root, "chance", seed).
Condition chance_condition(const Condition& like, std::uint64_t seed_root);

/// How the chance scorer compares with the base rate of one verb.
struct CalibrationRow {
  oracle::Verb verb = oracle::Verb::kFall;
  int clips = 0;
  double prevalence = 0.0;
  /// Percentile bootstrap of the prevalence over clips.
  Interval prevalence_ci;
  /// Per-verb chance AP, one value per seed, and their mean.
  std::vector<double> per_seed_ap;
  double chance_ap = 0.0;

  bool within() const { return prevalence_ci.contains(chance_ap); }
};

/// Scores `entries` (labels only are used) with the chance scorer of each
/// seed, as chance_condition does, and compares the seed-mean per-verb AP
/// with a bootstrap interval of the verb's prevalence.
std::vector<CalibrationRow> chance_calibration(std::span<const ScoredEntry> entries,
                                               std::span<const std::uint64_t> seeds, int draws,
                                               std::uint64_t seed_root);

/// Non-overlapping intervals. Symmetric and false for identical intervals.
bool significant(const Interval& a, const Interval& b);

/// Held-out fall clips with heavy occlusion, scored by one condition.
struct StressResult {
  std::string id;
  std::string label;
  int clips = 0;
  int positives = 0;
  double occluded_fraction = 0.0;
  std::vector<double> per_seed_ap;
  /// AP of the seed-averaged scores and its bootstrap interval over clips.
  Interval ap;
};

struct ReportInput {
  std::vector<Condition> conditions;
  /// Seed for bootstrap resampling and the chance scorer.
  std::uint64_t seed_root = 0;
  int bootstrap_draws = 1000;
  std::vector<StressResult> stress;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

/// Writes per_seed.csv, table1/2/3 (.csv and .md), significance.csv,
/// per_verb.svg, chance_calibration.csv, summary.md, metadata.json and, when stress results are
/// given, fall_stress.csv. Output depends only on the input.
void make_report(const ReportInput& input, const std::filesystem::path& dir);

/// Percent with two decimals, as printed in the markdown tables.
std::string percent(double x);

}  // namespace trajverb::eval
