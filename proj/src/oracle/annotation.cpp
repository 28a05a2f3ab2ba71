#include "trajverb/oracle/annotation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "json.hpp"
#include "trajverb/rng.hpp"

namespace trajverb::oracle {
namespace {

constexpr std::array<Split, 3> kSplits = {Split::kTrain, Split::kDev, Split::kTest};
constexpr int kBalanceAttempts = 64;

struct PooledClip {
  ClipRef ref;
  Split split;
  std::vector<bool> labels;  // indexed like `verbs`
};

std::array<int, 3> split_quotas(int per_verb) {
  const int train = static_cast<int>(std::lround(0.7 * per_verb));
  const int dev = static_cast<int>(std::lround(0.1 * per_verb));
  return {train, dev, per_verb - train - dev};
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw Error("unknown split '" + std::string(name) + "'");
}

std::vector<Annotation> AnnotationSet::for_verb(Verb verb) const {
  std::vector<Annotation> out;
  for (const auto& a : entries) {
    if (a.verb == verb) out.push_back(a);
  }
  return out;
}

double AnnotationSet::positive_fraction(Verb verb) const {
  int total = 0;
  int positives = 0;
  for (const auto& a : entries) {
    if (a.verb != verb) continue;
    ++total;
    positives += a.label ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(positives) / total;
}

std::map<std::uint64_t, Split> split_episodes(const std::vector<std::uint64_t>& seeds,
                                              std::uint64_t seed) {
  std::vector<std::uint64_t> order = seeds;
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  Rng rng(derive_seed(seed, "episode-split"));
  rng.shuffle(order.begin(), order.end());
  const auto n = order.size();
  const auto train = static_cast<std::size_t>(std::lround(0.7 * static_cast<double>(n)));
  const auto dev = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n)));
  std::map<std::uint64_t, Split> out;
  for (std::size_t i = 0; i < n; ++i) {
    out[order[i]] = i < train ? Split::kTrain : i < train + dev ? Split::kDev : Split::kTest;
  }
  return out;
}

AnnotationSet build_annotation_set(const std::vector<std::shared_ptr<const sim::Episode>>& episodes,
                                   const std::vector<Verb>& verbs, const OracleConfig& oracle,
                                   const AnnotationOptions& options) {
  if (options.per_verb < 10) throw Error("per_verb must be >= 10");
  oracle.validate();

  std::vector<std::uint64_t> seeds;
  for (const auto& ep : episodes) seeds.push_back(ep->seed);
  AnnotationSet set;
  set.per_verb_count = options.per_verb;
  set.episode_split = split_episodes(seeds, options.seed);

  std::vector<PooledClip> pool;
  for (const auto& ep : episodes) {
    for (const Clip& clip : extract_clips(ep, options.stride)) {
      PooledClip pc{{clip.episode_seed(), clip.start_frame()}, set.episode_split.at(ep->seed), {}};
      for (Verb v : verbs) pc.labels.push_back(label_clip(clip, v, oracle));
      pool.push_back(std::move(pc));
    }
  }

  const auto quotas = split_quotas(options.per_verb);
  for (std::size_t vi = 0; vi < verbs.size(); ++vi) {
    const Verb verb = verbs[vi];
    // by_split[split][label] -> pool indices
    std::array<std::array<std::vector<std::size_t>, 2>, 3> by_split;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      by_split[static_cast<int>(pool[i].split)][pool[i].labels[vi] ? 1 : 0].push_back(i);
    }

    Rng rng(derive_seed(options.seed, "annotate", static_cast<std::uint64_t>(verb)));
    bool placed = false;
    for (int attempt = 0; attempt < kBalanceAttempts && !placed; ++attempt) {
      const double target = rng.uniform(options.min_positive + 0.05, options.max_positive - 0.05);
      std::array<int, 3> positives{};
      int total_pos = 0;
      bool feasible = true;
      for (int s = 0; s < 3; ++s) {
        positives[s] = std::clamp(static_cast<int>(std::lround(target * quotas[s])), 1,
                                  quotas[s] - 1);
        total_pos += positives[s];
        feasible = feasible &&
                   static_cast<int>(by_split[s][1].size()) >= positives[s] &&
                   static_cast<int>(by_split[s][0].size()) >= quotas[s] - positives[s];
      }
      const double fraction = static_cast<double>(total_pos) / options.per_verb;
      if (!feasible || fraction < options.min_positive || fraction > options.max_positive) continue;

      for (int s = 0; s < 3; ++s) {
        for (int label = 1; label >= 0; --label) {
          auto candidates = by_split[s][label];
          rng.shuffle(candidates.begin(), candidates.end());
          const int take = label == 1 ? positives[s] : quotas[s] - positives[s];
          std::vector<std::size_t> chosen(candidates.begin(), candidates.begin() + take);
          std::sort(chosen.begin(), chosen.end());
          for (std::size_t idx : chosen) {
            set.entries.push_back({pool[idx].ref, verb, label == 1, kSplits[s]});
          }
        }
      }
      placed = true;
    }
    if (!placed) {
      throw Error(fmt::format("cannot balance verb '{}': pool has {}/{}/{} positives in train/dev/test",
                              to_string(verb), by_split[0][1].size(), by_split[1][1].size(),
                              by_split[2][1].size()));
    }
  }
  return set;
}

void write_annotations(const std::filesystem::path& path, const AnnotationSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& a : set.entries) {
    out << fmt::format(R"({{"episode_seed":{},"start_frame":{},"verb":"{}","label":"{}","split":"{}"}})",
                       a.clip.episode_seed, a.clip.start_frame, to_string(a.verb),
                       a.label ? "yes" : "no", to_string(a.split))
        << '\n';
  }
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  AnnotationSet set;
  std::map<Verb, int> counts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Annotation a;
    a.clip.episode_seed = j.at("episode_seed").get<std::uint64_t>();
    a.clip.start_frame = j.at("start_frame").get<int>();
    a.verb = verb_from_string(j.at("verb").get<std::string>());
    const auto label = j.at("label").get<std::string>();
    if (label != "yes" && label != "no") throw Error("bad label '" + label + "'");
    a.label = label == "yes";
    a.split = split_from_string(j.at("split").get<std::string>());
    set.episode_split[a.clip.episode_seed] = a.split;
    ++counts[a.verb];
    set.entries.push_back(a);
  }
  set.per_verb_count = counts.empty() ? 0 : counts.begin()->second;
  return set;
}

void write_splits(const std::filesystem::path& path, const std::map<std::uint64_t, Split>& splits) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [seed, split] : splits) j[std::to_string(seed)] = std::string(to_string(split));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

std::map<std::uint64_t, Split> read_splits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  const auto j = nlohmann::json::parse(in);
  std::map<std::uint64_t, Split> out;
  for (const auto& [key, value] : j.items()) {
    out[std::stoull(key)] = split_from_string(value.get<std::string>());
  }
  return out;
}

}  // namespace trajverb::oracle
