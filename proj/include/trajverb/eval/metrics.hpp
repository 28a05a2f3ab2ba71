#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "trajverb/oracle/annotation.hpp"

namespace trajverb::eval {

/// Mean of precision@k over the ranks k of the positives, ranking by score
/// descending. Tied scores keep their input order (std::stable_sort), so the
/// result is reproducible but depends on that order. Throws when there is no
/// positive.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct ScoredEntry {
  oracle::Verb verb = oracle::Verb::kFall;
  oracle::ClipRef clip;
  double score = 0.0;
  int label = 0;
};

struct MapScores {
  /// AP of all (verb, clip) entries pooled into one ranking.
  double micro = 0.0;
  /// Unweighted mean of per-verb APs.
  double macro = 0.0;
  /// In verb order; only verbs present in the scored set.
  std::vector<std::pair<oracle::Verb, double>> per_verb;

  double verb_ap(oracle::Verb verb) const;
};

/// Throws when a verb lacks a positive or a negative.
MapScores map_scores(std::span<const ScoredEntry> scored);

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  Interval clipped(double min = 0.0, double max = 1.0) const;
};

/// Student-t interval mean +- t(n-1, (1 + level) / 2) * s / sqrt(n). Needs at
/// least two samples. Not clipped.
Interval confidence_interval(std::span<const double> samples, double level = 0.95);

/// Percentile bootstrap: resamples n indices with replacement `draws` times,
/// evaluates `stat` on each resample and returns the (1 - level) / 2 and
/// (1 + level) / 2 quantiles around stat on the original indices. Resamples
/// where stat throws (e.g. no positive drawn) are redrawn.
Interval bootstrap_interval(std::size_t n,
                            const std::function<double(std::span<const std::size_t>)>& stat,
                            int draws, std::uint64_t seed, double level = 0.95);

/// Closed intervals sharing at least one point.
bool overlap(const Interval& a, const Interval& b);

/// Coin-flip scorer: one independent uniform score per entry.
std::vector<double> chance_scores(std::size_t n, std::uint64_t seed);

}  // namespace trajverb::eval
