#include "trajverb/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "trajverb/error.hpp"
#include "trajverb/rng.hpp"

namespace trajverb::eval {

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("average_precision: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  int hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw Error("average_precision: no positive labels");
  return sum / hits;
}

double MapScores::verb_ap(oracle::Verb verb) const {
  for (const auto& [v, ap] : per_verb) {
    if (v == verb) return ap;
  }
  throw Error(fmt::format("no AP for verb {}", oracle::to_string(verb)));
}

MapScores map_scores(std::span<const ScoredEntry> scored) {
  if (scored.empty()) throw Error("map_scores: empty scored set");
  std::vector<double> all_scores;
  std::vector<int> all_labels;
  for (const auto& e : scored) {
    all_scores.push_back(e.score);
    all_labels.push_back(e.label);
  }
  MapScores out;
  out.micro = average_precision(all_scores, all_labels);
  for (int vi = 0; vi < oracle::kVerbCount; ++vi) {
    const auto verb = static_cast<oracle::Verb>(vi);
    std::vector<double> s;
    std::vector<int> l;
    for (const auto& e : scored) {
      if (e.verb != verb) continue;
      s.push_back(e.score);
      l.push_back(e.label);
    }
    if (s.empty()) continue;
    const auto pos = std::count(l.begin(), l.end(), 1);
    if (pos == 0 || pos == static_cast<long>(l.size())) {
      throw Error(fmt::format("map_scores: verb {} needs both positives and negatives",
                              oracle::to_string(verb)));
    }
    out.per_verb.emplace_back(verb, average_precision(s, l));
  }
  double sum = 0.0;
  for (const auto& [v, ap] : out.per_verb) sum += ap;
  out.macro = sum / static_cast<double>(out.per_verb.size());
  return out;
}

Interval Interval::clipped(double min, double max) const {
  return {std::clamp(mean, min, max), std::clamp(lo, min, max), std::clamp(hi, min, max)};
}

Interval confidence_interval(std::span<const double> samples, double level) {
  if (samples.size() < 2) throw Error("confidence_interval needs at least two samples");
  if (!(level > 0.0 && level < 1.0)) throw Error("confidence level must lie in (0, 1)");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  const double half = t * sd / std::sqrt(n);
  return {mean, mean - half, mean + half};
}

Interval bootstrap_interval(std::size_t n,
                            const std::function<double(std::span<const std::size_t>)>& stat,
                            int draws, std::uint64_t seed, double level) {
  if (n == 0 || draws < 1) throw Error("bootstrap_interval needs data and at least one draw");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const double centre = stat(idx);
  Rng rng(seed);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(draws));
  int failures = 0;
  while (static_cast<int>(values.size()) < draws) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    try {
      values.push_back(stat(idx));
    } catch (const Error&) {
      if (++failures > 100 * draws) throw Error("bootstrap_interval: statistic undefined on resamples");
    }
  }
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {centre, quantile(0.5 - level / 2.0), quantile(0.5 + level / 2.0)};
}

bool overlap(const Interval& a, const Interval& b) { return a.lo <= b.hi && b.lo <= a.hi; }

std::vector<double> chance_scores(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> s(n);
  for (auto& x : s) x = rng.uniform();
  return s;
}

}  // namespace trajverb::eval
