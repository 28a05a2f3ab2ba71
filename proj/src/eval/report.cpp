#include "trajverb/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "trajverb/error.hpp"
#include "trajverb/rng.hpp"
#include "trajverb/train/record.hpp"

namespace trajverb::eval {
namespace fs = std::filesystem;
using train::format_number;

namespace {

SeedStat seed_stat(std::vector<double> values) {
  SeedStat s;
  s.ci = confidence_interval(values);
  s.per_seed = std::move(values);
  return s;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// mean, half width, clipped bounds
std::string ci_columns(const Interval& ci, double lo_clip, double hi_clip) {
  const Interval c = ci.clipped(lo_clip, hi_clip);
  return fmt::format("{},{},{},{}", format_number(ci.mean), format_number(ci.hi - ci.mean),
                     format_number(c.lo), format_number(c.hi));
}

std::string pm(const Interval& ci) {
  return fmt::format("{} ± {}", percent(ci.mean), percent(ci.hi - ci.mean));
}

std::string pm_mse(const Interval& ci) {
  return fmt::format("{:.4f} ± {:.4f}", ci.mean, ci.hi - ci.mean);
}

std::vector<oracle::Verb> verbs_of(const ConditionSummary& s) {
  std::vector<oracle::Verb> out;
  for (const auto& [v, stat] : s.per_verb) out.push_back(v);
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* const kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

std::string per_verb_svg(const std::vector<ConditionSummary>& rows) {
  const auto verbs = verbs_of(rows.front());
  constexpr int kCols = 4;
  constexpr double kPanelW = 240.0;
  constexpr double kPanelH = 170.0;
  constexpr double kPlotTop = 26.0;
  constexpr double kPlotH = 110.0;
  constexpr double kPlotLeft = 34.0;
  constexpr double kPlotW = 196.0;
  const int panel_rows = (static_cast<int>(verbs.size()) + kCols - 1) / kCols;
  const double legend_h = 24.0 * std::ceil(static_cast<double>(rows.size()) / 4.0) + 12.0;
  const double width = kCols * kPanelW + 20.0;
  const double height = panel_rows * kPanelH + legend_h + 30.0;

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"10\">\n",
      width, height, width, height);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n", width, height);
  svg += "<text x=\"10\" y=\"18\" font-size=\"13\">Test AP per verb (mean over seeds, 95% CI)</text>\n";

  const double bar_slot = kPlotW / static_cast<double>(rows.size());
  for (std::size_t vi = 0; vi < verbs.size(); ++vi) {
    const double ox = 10.0 + static_cast<double>(vi % kCols) * kPanelW;
    const double oy = 30.0 + static_cast<double>(vi / kCols) * kPanelH;
    svg += fmt::format("<g transform=\"translate({:.1f},{:.1f})\">\n", ox, oy);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"14\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                       kPlotLeft + kPlotW / 2.0, oracle::to_string(verbs[vi]));
    for (int tick = 0; tick <= 100; tick += 25) {
      const double y = kPlotTop + kPlotH * (1.0 - tick / 100.0);
      svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#dddddd\"/>\n",
                         kPlotLeft, y, kPlotLeft + kPlotW, y);
      svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{}</text>\n",
                         kPlotLeft - 4.0, y + 3.0, tick);
    }
    for (std::size_t ci = 0; ci < rows.size(); ++ci) {
      const auto& stat = rows[ci].per_verb.at(verbs[vi]);
      const Interval c = stat.ci.clipped();
      const double x = kPlotLeft + bar_slot * static_cast<double>(ci) + bar_slot * 0.15;
      const double w = bar_slot * 0.7;
      const double y_mean = kPlotTop + kPlotH * (1.0 - std::clamp(c.mean, 0.0, 1.0));
      svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                         x, y_mean, w, kPlotTop + kPlotH - y_mean, kPalette[ci % std::size(kPalette)]);
      const double cx = x + w / 2.0;
      const double y_lo = kPlotTop + kPlotH * (1.0 - c.lo);
      const double y_hi = kPlotTop + kPlotH * (1.0 - c.hi);
      svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#222222\"/>\n",
                         cx, y_lo, cx, y_hi);
    }
    svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#444444\"/>\n",
                       kPlotLeft, kPlotTop + kPlotH, kPlotLeft + kPlotW, kPlotTop + kPlotH);
    svg += "</g>\n";
  }
  const double ly = 30.0 + panel_rows * kPanelH + 10.0;
  for (std::size_t ci = 0; ci < rows.size(); ++ci) {
    const double x = 10.0 + static_cast<double>(ci % 4) * kPanelW;
    const double y = ly + 24.0 * static_cast<double>(ci / 4);
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", x, y,
                       kPalette[ci % std::size(kPalette)]);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", x + 18.0, y + 10.0,
                       xml_escape(rows[ci].label));
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::string percent(double x) { return fmt::format("{:.2f}", 100.0 * x); }

bool significant(const Interval& a, const Interval& b) { return !overlap(a, b); }

ConditionSummary summarize(const Condition& cond, int bootstrap_draws, std::uint64_t seed) {
  if (cond.seeds.size() < 2) {
    throw Error(fmt::format("condition {} needs at least 2 seeds for confidence intervals", cond.id));
  }
  const auto& ref = cond.seeds.front().test_scores;
  for (const auto& s : cond.seeds) {
    bool same = s.test_scores.size() == ref.size();
    for (std::size_t i = 0; same && i < ref.size(); ++i) {
      same = s.test_scores[i].verb == ref[i].verb && s.test_scores[i].clip == ref[i].clip &&
             s.test_scores[i].label == ref[i].label;
    }
    if (!same) throw Error(fmt::format("condition {}: seeds were scored on different entries", cond.id));
  }

  ConditionSummary out;
  out.id = cond.id;
  out.label = cond.label;
  std::vector<double> micro;
  std::vector<double> macro;
  std::map<oracle::Verb, std::vector<double>> per_verb;
  for (const auto& s : cond.seeds) {
    out.seeds.push_back(s.seed);
    const auto m = map_scores(s.test_scores);
    micro.push_back(m.micro);
    macro.push_back(m.macro);
    for (const auto& [v, ap] : m.per_verb) per_verb[v].push_back(ap);
  }
  out.micro = seed_stat(micro);
  out.macro = seed_stat(macro);
  for (auto& [v, values] : per_verb) out.per_verb[v] = seed_stat(std::move(values));

  std::vector<double> avg(ref.size(), 0.0);
  for (const auto& s : cond.seeds) {
    for (std::size_t i = 0; i < ref.size(); ++i) avg[i] += s.test_scores[i].score;
  }
  for (auto& a : avg) a /= static_cast<double>(cond.seeds.size());
  for (const auto& [v, stat] : out.per_verb) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (ref[i].verb != v) continue;
      scores.push_back(avg[i]);
      labels.push_back(ref[i].label);
    }
    out.per_verb_bootstrap[v] = bootstrap_interval(
        scores.size(),
        [&](std::span<const std::size_t> idx) {
          std::vector<double> s;
          std::vector<int> l;
          for (const auto i : idx) {
            s.push_back(scores[i]);
            l.push_back(labels[i]);
          }
          return average_precision(s, l);
        },
        bootstrap_draws, derive_seed(seed, "verb-bootstrap", static_cast<std::uint64_t>(v)));
  }

  if (std::all_of(cond.seeds.begin(), cond.seeds.end(),
                  [](const SeedResult& s) { return s.probe_test_mse.has_value(); })) {
    std::vector<double> test;
    std::vector<double> dev;
    for (const auto& s : cond.seeds) {
      test.push_back(*s.probe_test_mse);
      dev.push_back(s.probe_dev_mse.value_or(std::nan("")));
    }
    out.probe_mse = seed_stat(test);
    if (std::all_of(dev.begin(), dev.end(), [](double d) { return std::isfinite(d); })) {
      out.probe_dev_mse = seed_stat(dev);
    }
  }
  return out;
}

Condition chance_condition(const Condition& like, std::uint64_t seed_root) {
  Condition out{"chance", "Chance", {}};
  for (const auto& s : like.seeds) {
    SeedResult r;
    r.seed = s.seed;
    r.test_scores = s.test_scores;
    const auto scores = chance_scores(r.test_scores.size(), derive_seed(seed_root, "chance", s.seed));
    for (std::size_t i = 0; i < scores.size(); ++i) r.test_scores[i].score = scores[i];
    out.seeds.push_back(std::move(r));
  }
  return out;
}

std::vector<CalibrationRow> chance_calibration(std::span<const ScoredEntry> entries,
                                               std::span<const std::uint64_t> seeds, int draws,
                                               std::uint64_t seed_root) {
  if (seeds.empty()) throw Error("chance_calibration needs at least one seed");
  std::vector<MapScores> per_seed;
  for (const auto s : seeds) {
    std::vector<ScoredEntry> scored(entries.begin(), entries.end());
    const auto scores = chance_scores(scored.size(), derive_seed(seed_root, "chance", s));
    for (std::size_t i = 0; i < scores.size(); ++i) scored[i].score = scores[i];
    per_seed.push_back(map_scores(scored));
  }
  std::vector<CalibrationRow> out;
  for (const auto& [verb, ap0] : per_seed.front().per_verb) {
    CalibrationRow row;
    row.verb = verb;
    std::vector<int> labels;
    for (const auto& e : entries) {
      if (e.verb == verb) labels.push_back(e.label);
    }
    row.clips = static_cast<int>(labels.size());
    const auto rate = [&](std::span<const std::size_t> idx) {
      double pos = 0.0;
      for (const auto i : idx) pos += labels[i];
      return pos / static_cast<double>(idx.size());
    };
    row.prevalence_ci = bootstrap_interval(labels.size(), rate, draws,
                                           derive_seed(seed_root, "prevalence-bootstrap",
                                                       static_cast<std::uint64_t>(verb)));
    row.prevalence = row.prevalence_ci.mean;
    for (const auto& m : per_seed) row.per_seed_ap.push_back(m.verb_ap(verb));
    double sum = 0.0;
    for (const double ap : row.per_seed_ap) sum += ap;
    row.chance_ap = sum / static_cast<double>(row.per_seed_ap.size());
    out.push_back(std::move(row));
  }
  return out;
}

void make_report(const ReportInput& input, const fs::path& dir) {
  if (input.conditions.empty()) throw Error("report needs at least one condition");
  fs::create_directories(dir);

  std::vector<ConditionSummary> rows;
  for (const auto& c : input.conditions) {
    rows.push_back(summarize(c, input.bootstrap_draws, input.seed_root));
  }
  const ConditionSummary chance =
      summarize(chance_condition(input.conditions.front(), input.seed_root), input.bootstrap_draws,
                input.seed_root);
  std::vector<ConditionSummary> with_chance = rows;
  with_chance.push_back(chance);
  const auto verbs = verbs_of(rows.front());

  // Per-seed values behind every interval.
  std::string per_seed = "condition,seed,metric,value\n";
  for (const auto& r : with_chance) {
    for (std::size_t k = 0; k < r.seeds.size(); ++k) {
      per_seed += fmt::format("{},{},micro,{}\n", r.id, r.seeds[k], format_number(r.micro.per_seed[k]));
      per_seed += fmt::format("{},{},macro,{}\n", r.id, r.seeds[k], format_number(r.macro.per_seed[k]));
      for (const auto v : verbs) {
        per_seed += fmt::format("{},{},ap.{},{}\n", r.id, r.seeds[k], oracle::to_string(v),
                                format_number(r.per_verb.at(v).per_seed[k]));
      }
      if (r.probe_mse) {
        per_seed += fmt::format("{},{},probe.test_mse,{}\n", r.id, r.seeds[k],
                                format_number(r.probe_mse->per_seed[k]));
      }
      if (r.probe_dev_mse) {
        per_seed += fmt::format("{},{},probe.dev_mse,{}\n", r.id, r.seeds[k],
                                format_number(r.probe_dev_mse->per_seed[k]));
      }
    }
  }
  write_file(dir / "per_seed.csv", per_seed);

  // Table 1: micro and macro mAP.
  std::string t1 = "condition,label,metric,n_seeds,mean,half_width,lo,hi\n";
  std::string t1md = "| Condition | mAP (% micro) | mAP (% macro) |\n|---|---|---|\n";
  for (const auto& r : with_chance) {
    t1 += fmt::format("{},{},micro,{},{}\n", r.id, r.label, r.seeds.size(), ci_columns(r.micro.ci, 0.0, 1.0));
    t1 += fmt::format("{},{},macro,{},{}\n", r.id, r.label, r.seeds.size(), ci_columns(r.macro.ci, 0.0, 1.0));
    t1md += fmt::format("| {} | {} | {} |\n", r.label, pm(r.micro.ci), pm(r.macro.ci));
  }
  t1md += fmt::format("\n95% Student-t intervals over {} seeds. Chance scores each clip with an "
                      "independent uniform draw.\n", rows.front().seeds.size());
  write_file(dir / "table1.csv", t1);
  write_file(dir / "table1.md", t1md);

  // Table 2: per-verb AP.
  std::string t2 = "condition,verb,n_seeds,mean,half_width,lo,hi,seed_avg_ap,boot_lo,boot_hi\n";
  std::string t2md = "| Verb |";
  std::string rule = "|---|";
  for (const auto& r : with_chance) {
    t2md += " " + r.label + " |";
    rule += "---|";
  }
  t2md += "\n" + rule + "\n";
  for (const auto& r : with_chance) {
    for (const auto v : verbs) {
      const auto& b = r.per_verb_bootstrap.at(v);
      t2 += fmt::format("{},{},{},{},{},{},{}\n", r.id, oracle::to_string(v), r.seeds.size(),
                        ci_columns(r.per_verb.at(v).ci, 0.0, 1.0), format_number(b.mean),
                        format_number(b.lo), format_number(b.hi));
    }
  }
  for (const auto v : verbs) {
    t2md += fmt::format("| {} |", oracle::to_string(v));
    for (const auto& r : with_chance) t2md += " " + pm(r.per_verb.at(v).ci) + " |";
    t2md += "\n";
  }
  t2md += fmt::format("\nAP (%) per verb, mean ± 95% Student-t half width over seeds. table2.csv "
                      "also holds a {}-draw bootstrap interval over clips for the seed-averaged "
                      "scores.\n", input.bootstrap_draws);
  write_file(dir / "table2.csv", t2);
  write_file(dir / "table2.md", t2md);

  // Table 3: probe MSE.
  std::string t3 = "condition,label,n_seeds,mean_test_mse,half_width,lo,hi,best_run_seed,best_run_dev_mse,best_run_test_mse\n";
  std::string t3md = "| Condition | MSE (mean ± CI) | MSE (best run) |\n|---|---|---|\n";
  for (const auto& r : rows) {
    if (!r.probe_mse) continue;
    // Best run is picked on dev MSE; its test MSE is reported.
    std::size_t best = 0;
    if (r.probe_dev_mse) {
      for (std::size_t k = 1; k < r.seeds.size(); ++k) {
        if (r.probe_dev_mse->per_seed[k] < r.probe_dev_mse->per_seed[best]) best = k;
      }
    }
    const double best_dev = r.probe_dev_mse ? r.probe_dev_mse->per_seed[best] : std::nan("");
    t3 += fmt::format("{},{},{},{},{},{},{}\n", r.id, r.label, r.seeds.size(),
                      ci_columns(r.probe_mse->ci, 0.0, INFINITY), r.seeds[best],
                      format_number(best_dev), format_number(r.probe_mse->per_seed[best]));
    t3md += fmt::format("| {} | {} | {:.4f} |\n", r.label, pm_mse(r.probe_mse->ci),
                        r.probe_mse->per_seed[best]);
  }
  t3md += "\nTest MSE of the z-scored final-frame object position. Each run uses its best dev "
          "epoch; the best run is the seed with the lowest dev MSE.\n";
  write_file(dir / "table3.csv", t3);
  write_file(dir / "table3.md", t3md);

  // Pairwise CI overlap.
  std::string sig = "metric,condition_a,condition_b,mean_a,mean_b,significant\n";
  const auto add_pairs = [&](const std::string& metric, auto&& get) {
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        const Interval& ia = get(rows[a]);
        const Interval& ib = get(rows[b]);
        sig += fmt::format("{},{},{},{},{},{}\n", metric, rows[a].id, rows[b].id,
                           format_number(ia.mean), format_number(ib.mean),
                           significant(ia, ib) ? "true" : "false");
      }
    }
  };
  add_pairs("micro", [](const ConditionSummary& r) -> const Interval& { return r.micro.ci; });
  add_pairs("macro", [](const ConditionSummary& r) -> const Interval& { return r.macro.ci; });
  for (const auto v : verbs) {
    add_pairs(fmt::format("ap.{}", oracle::to_string(v)),
              [v](const ConditionSummary& r) -> const Interval& { return r.per_verb.at(v).ci; });
  }
  write_file(dir / "significance.csv", sig);

  write_file(dir / "per_verb.svg", per_verb_svg(with_chance));

  std::vector<std::uint64_t> seeds;
  for (const auto& s : input.conditions.front().seeds) seeds.push_back(s.seed);
  const auto calibration = chance_calibration(input.conditions.front().seeds.front().test_scores, seeds,
                                              input.bootstrap_draws, input.seed_root);
  std::string cal = "verb,clips,prevalence,prevalence_lo,prevalence_hi,chance_ap,within\n";
  for (const auto& c : calibration) {
    cal += fmt::format("{},{},{},{},{},{},{}\n", oracle::to_string(c.verb), c.clips,
                       format_number(c.prevalence), format_number(c.prevalence_ci.lo),
                       format_number(c.prevalence_ci.hi), format_number(c.chance_ap),
                       c.within() ? "true" : "false");
  }
  write_file(dir / "chance_calibration.csv", cal);

  if (!input.stress.empty()) {
    std::string fs_csv = "condition,label,clips,positives,mean_occluded_fraction,ap,boot_lo,boot_hi,seed_aps\n";
    for (const auto& s : input.stress) {
      std::string seeds;
      for (const double ap : s.per_seed_ap) seeds += (seeds.empty() ? "" : ";") + format_number(ap);
      fs_csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", s.id, s.label, s.clips, s.positives,
                            format_number(s.occluded_fraction), format_number(s.ap.mean),
                            format_number(s.ap.lo), format_number(s.ap.hi), seeds);
    }
    write_file(dir / "fall_stress.csv", fs_csv);
  }

  // Findings that are read off the tables rather than gated on.
  std::string summary = "# Summary\n\n";
  {
    std::vector<const ConditionSummary*> core;
    for (const char* id : {"traj3d", "traj2d", "image2d"}) {
      for (const auto& r : rows) {
        if (r.id == id) core.push_back(&r);
      }
    }
    if (core.size() == 3) {
      int overlapping = 0;
      std::string pairs;
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b) {
          const bool ov = overlap(core[a]->micro.ci, core[b]->micro.ci);
          overlapping += ov;
          pairs += fmt::format("- {} vs {}: {}\n", core[a]->label, core[b]->label,
                               ov ? "overlapping" : "separated");
        }
      }
      summary += fmt::format("Micro mAP intervals of 3D Trajectory, 2D Trajectory and 2D Image "
                             "overlap in {} of 3 pairs.\n\n{}\nNo clear winner among the three: {}.\n\n",
                             overlapping, pairs, overlapping >= 2 ? "yes" : "NO (flagged)");
    }
    const auto random = std::find_if(rows.begin(), rows.end(), [](const ConditionSummary& r) {
      return r.id == "random";
    });
    if (random != rows.end()) {
      summary += "Macro mAP above the Random encoder (points):\n\n";
      for (const auto& r : rows) {
        if (&r == &*random) continue;
        summary += fmt::format("- {}: {:+.2f}{}\n", r.label, 100.0 * (r.macro.ci.mean - random->macro.ci.mean),
                               significant(r.macro.ci, random->macro.ci) ? "" : " (intervals overlap)");
      }
      summary += "\n";
    }
  }
  for (const auto& s : input.stress) {
    summary += fmt::format("Occluded fall stress set, {}: AP {} [{}, {}] over {} clips ({} falls).\n",
                           s.label, percent(s.ap.mean), percent(s.ap.lo), percent(s.ap.hi), s.clips,
                           s.positives);
  }
  if (input.stress.size() == 2) {
    summary += fmt::format("Stress intervals {}.\n",
                           significant(input.stress[0].ap, input.stress[1].ap) ? "do not overlap" : "overlap");
  }
  const auto within = std::count_if(calibration.begin(), calibration.end(),
                                    [](const CalibrationRow& c) { return c.within(); });
  summary += fmt::format("\nChance per-verb AP inside the bootstrap interval of the verb's prevalence: "
                         "{} of {} verbs.\n",
                         within, calibration.size());
  summary += "\nRanking ties keep input (annotation) order. Micro mAP pools every (verb, clip) "
             "entry into one ranking.\n";
  write_file(dir / "summary.md", summary);

  nlohmann::ordered_json meta = input.metadata;
  meta["ci_method"] = "Student-t over seeds, 95%";
  meta["bootstrap_draws"] = input.bootstrap_draws;
  meta["tie_breaking"] = "stable sort by descending score; ties keep annotation order";
  meta["micro_definition"] = "AP over all (verb, clip) entries pooled into one ranking";
  write_file(dir / "metadata.json", meta.dump(2) + "\n");
}

}  // namespace trajverb::eval
