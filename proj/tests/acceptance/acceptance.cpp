// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
// Criteria 4, 6 and 7 compare learned models and are findings about this
// world, not properties of the code: their FAIL lines are printed and counted
// but do not fail the process. Every other criterion, and any harness error
// (a stage exiting non-zero, a missing report file), sets a non-zero exit.
//
// The pipeline criteria run `trajverb all` twice on the committed preset, in
// two fresh directories under $ACCEPTANCE_OUT (default: a temp dir).
// Set ACCEPTANCE_KEEP=1 to leave them behind for inspection.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "trajverb/cli/config.hpp"
#include "trajverb/cli/pipeline.hpp"
#include "trajverb/eval/metrics.hpp"
#include "trajverb/eval/report.hpp"
#include "trajverb/nn/losses.hpp"
#include "trajverb/nn/model.hpp"
#include "trajverb/nn/optim.hpp"
#include "trajverb/oracle/annotation.hpp"
#include "trajverb/rng.hpp"
#include "trajverb/sim/physics.hpp"

namespace fs = std::filesystem;
using namespace trajverb;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
  bool error = false;
};

constexpr int kFindings[] = {4, 6, 7};

int g_failures = 0;
int g_gate_failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what(), true};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool finding = std::find(std::begin(kFindings), std::end(kFindings), id) != std::end(kFindings);
  if (!v.pass) ++g_failures;
  if (!v.pass && (!finding || v.error)) ++g_gate_failures;
  fmt::print("{} criterion {} ({}): {} [{:.1f}s]\n", v.pass ? "PASS" : "FAIL", id, name, v.detail,
             secs);
  std::fflush(stdout);
}

// ---------------------------------------------------------------- gradients

Tensor2 random_rows(int rows, int cols, Rng& rng) {
  Tensor2 t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

Verdict gradient_check() {
  using namespace nn;
  double worst = 0.0;
  std::string where;
  const auto track = [&](const GradCheckResult& r, const std::string& path, int draw) {
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = fmt::format("{} draw {} {}[{}]", path, draw, r.worst_block, r.worst_index);
    }
  };
  constexpr int kDraws = 24;
  for (int draw = 0; draw < kDraws; ++draw) {
    Rng rng(derive_seed(77, "grad", static_cast<std::uint64_t>(draw)));
    const int d = 1 + static_cast<int>(rng.below(4));
    const int h = 1 + static_cast<int>(rng.below(6));
    const int t = 2 + static_cast<int>(rng.below(7));
    const int horizon = 1 + static_cast<int>(rng.below(4));
    const int batch = 1 + static_cast<int>(rng.below(3));
    const int out = 1 + static_cast<int>(rng.below(4));
    EncoderParams enc = EncoderParams::random({d, h, 1 + static_cast<int>(rng.below(2))}, rng);
    enc.params.values() *= 1.5;
    const HeadParams head = HeadParams::random(h, out, rng);
    std::vector<Tensor2> in, fut;
    for (int b = 0; b < batch; ++b) {
      in.push_back(random_rows(t, d, rng));
      fut.push_back(random_rows(horizon, d, rng));
    }
    const SequenceBatch input = SequenceBatch::from(in);
    const SequenceBatch future = SequenceBatch::from(fut);
    Eigen::MatrixXd labels(out, batch), mask(out, batch), targets(out, batch);
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      labels.data()[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      mask.data()[i] = rng.bernoulli(0.7) ? 1.0 : 0.0;
      targets.data()[i] = rng.normal();
    }
    mask(0, 0) = 1.0;
    const double gamma = rng.uniform(0.5, 1.0);

    for (RolloutMode mode : {RolloutMode::kClosedLoop, RolloutMode::kTeacherForced}) {
      EncoderParams g;
      pretrain_loss(enc, input, future, gamma, mode, &g);
      track(check_gradients(
                [&](const ParamSet& ps) {
                  return pretrain_loss(EncoderParams{enc.shape, ps}, input, future, gamma, mode,
                                       nullptr);
                },
                enc.params, g.params),
            mode == RolloutMode::kClosedLoop ? "pretrain/closed" : "pretrain/teacher", draw);
    }
    {
      EncoderParams ge;
      HeadParams gh;
      classifier_loss(enc, head, input, labels, mask, &ge, &gh);
      track(check_gradients(
                [&](const ParamSet& ps) {
                  return classifier_loss(EncoderParams{enc.shape, ps}, head, input, labels, mask,
                                         nullptr, nullptr);
                },
                enc.params, ge.params),
            "bce/encoder", draw);
      track(check_gradients(
                [&](const ParamSet& ps) {
                  return classifier_loss(enc, HeadParams{head.in, head.out, ps}, input, labels,
                                         mask, nullptr, nullptr);
                },
                head.params, gh.params),
            "bce/head", draw);
    }
    {
      EncoderParams ge;
      HeadParams gh;
      regression_loss(enc, head, input, targets, &ge, &gh);
      track(check_gradients(
                [&](const ParamSet& ps) {
                  return regression_loss(EncoderParams{enc.shape, ps}, head, input, targets,
                                         nullptr, nullptr);
                },
                enc.params, ge.params),
            "mse/encoder", draw);
      track(check_gradients(
                [&](const ParamSet& ps) {
                  return regression_loss(enc, HeadParams{head.in, head.out, ps}, input, targets,
                                         nullptr, nullptr);
                },
                head.params, gh.params),
            "mse/head", draw);
    }
  }
  return {worst < 1e-4, fmt::format("{} draws x 3 loss paths, max relative error {:.2e} ({})",
                                    kDraws, worst, where)};
}

// --------------------------------------------------------------------- AP

// Precision at each positive's rank, ranks found by pairwise comparison.
double exhaustive_ap(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<std::pair<std::size_t, double>> hits;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    std::size_t rank = 1, pos = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i) continue;
      const bool ahead = s[j] > s[i] || (s[j] == s[i] && j < i);
      rank += ahead;
      pos += ahead && y[j];
    }
    hits.emplace_back(rank, static_cast<double>(pos) / static_cast<double>(rank));
  }
  std::sort(hits.begin(), hits.end());
  double sum = 0.0;
  for (const auto& h : hits) sum += h.second;
  return sum / static_cast<double>(hits.size());
}

Verdict ap_oracle() {
  Rng rng(4242);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(1 + rng.below(12));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so ties are common.
      s[i] = static_cast<double>(rng.below(5)) / 4.0;
      y[i] = rng.bernoulli(0.5);
    }
    y[rng.below(n)] = 1;
    mismatches += eval::average_precision(s, y) != exhaustive_ap(s, y);
  }
  return {mismatches == 0, fmt::format("{} of 500 instances differ", mismatches)};
}

// -------------------------------------------------------------- physics

Verdict physics() {
  using namespace sim;
  const Vec3 parked(3.0, 3.0, 2.0);
  std::vector<std::string> problems;

  double fall_err = 0.0;
  {
    SceneConfig cfg;
    Frame f;
    f.hand_pos = parked;
    f.obj_pos = Vec3(2.0, 0.5, 2.0);
    f.obj_vel = Vec3(0.4, -0.2, 1.0);
    const Vec3 p0 = f.obj_pos, v0 = f.obj_vel;
    for (int i = 1; i <= 30; ++i) {
      f = step(f, cfg, parked, false);
      const double t = i * kDt;
      const Vec3 expect = p0 + v0 * t + Vec3(0.0, 0.0, -0.5 * cfg.gravity * t * t);
      fall_err = std::max(fall_err, (f.obj_pos - expect).norm());
    }
  }
  if (fall_err > 2e-3) problems.push_back("free fall");

  double energy_gain = 0.0;
  double quat_drift = 0.0;
  Rng rng(808);
  for (int ep = 0; ep < 100; ++ep) {
    SceneConfig cfg;
    cfg.friction_mu = rng.uniform(0.05, 0.6);
    cfg.restitution = rng.uniform(0.0, 0.6);
    cfg.object_shape = rng.bernoulli(0.5) ? Shape::kSphere : Shape::kCube;
    Frame f;
    f.hand_pos = parked;
    f.obj_pos = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(1.0, 2.0));
    f.obj_vel = Vec3(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0));
    f.obj_angvel = Vec3(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    double energy = mechanical_energy(f, cfg);
    for (int i = 0; i < 300; ++i) {
      f = step(f, cfg, parked, false);
      const double next = mechanical_energy(f, cfg);
      energy_gain = std::max(energy_gain, next - energy);
      energy = next;
      quat_drift = std::max(quat_drift, std::abs(f.obj_rot.norm() - 1.0));
    }
  }
  if (energy_gain > 1e-6) problems.push_back("energy");
  if (quat_drift > 1e-6) problems.push_back("quaternion norm");
  std::string detail = fmt::format(
      "free-fall max error {:.2e} m over 0.5 s, max energy gain {:.2e} J over 100 episodes, "
      "max |q|-1 {:.2e}",
      fall_err, energy_gain, quat_drift);
  for (const auto& p : problems) detail += "; violated: " + p;
  return {problems.empty(), detail};
}

// ------------------------------------------------------------ pipeline

struct Csv {
  std::vector<std::map<std::string, std::string>> rows;

  static Csv read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    Csv csv;
    std::string line;
    std::vector<std::string> header;
    const auto split = [](const std::string& s) {
      std::vector<std::string> out;
      std::stringstream ss(s);
      std::string cell;
      while (std::getline(ss, cell, ',')) out.push_back(cell);
      return out;
    };
    std::getline(in, line);
    header = split(line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split(line);
      std::map<std::string, std::string> row;
      for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
      csv.rows.push_back(std::move(row));
    }
    return csv;
  }

  const std::map<std::string, std::string>& find(
      const std::map<std::string, std::string>& match) const {
    for (const auto& r : rows) {
      bool ok = true;
      for (const auto& [k, v] : match) ok = ok && r.count(k) && r.at(k) == v;
      if (ok) return r;
    }
    std::string key;
    for (const auto& [k, v] : match) key += k + "=" + v + " ";
    throw std::runtime_error("no csv row " + key);
  }
};

double num(const std::map<std::string, std::string>& row, const std::string& col) {
  return std::stod(row.at(col));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_all(const fs::path& config, const fs::path& out) {
  const std::string cmd = fmt::format("{} all --config {} --out {} --quiet", TRAJVERB_CLI,
                                      config.string(), out.string());
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Band {
  double mean, lo, hi;
};

Band table1(const Csv& t, const std::string& cond, const std::string& metric) {
  const auto& r = t.find({{"condition", cond}, {"metric", metric}});
  return {num(r, "mean"), num(r, "lo"), num(r, "hi")};
}

Verdict chance_calibration(const cli::ExperimentConfig& cfg, const fs::path& out) {
  const auto set = oracle::read_annotations(out / "data" / "annotations.jsonl");
  std::vector<eval::ScoredEntry> entries;
  for (const auto& a : set.entries) entries.push_back({a.verb, a.clip, 0.0, a.label ? 1 : 0});
  std::string low;
  for (const auto verb : cfg.verbs) {
    const double p = set.positive_fraction(verb);
    if (p < 0.3 || p > 0.6) low += fmt::format(" {}={:.2f}", oracle::to_string(verb), p);
  }
  if (!low.empty()) return {false, "prevalence outside [0.3, 0.6]:" + low};
  const auto rows = eval::chance_calibration(entries, cfg.seeds, cfg.bootstrap_draws, cfg.seed_root);
  int inside = 0;
  std::string outside;
  for (const auto& r : rows) {
    inside += r.within();
    if (!r.within()) {
      outside += fmt::format(" {} ap {:.3f} vs [{:.3f}, {:.3f}]", oracle::to_string(r.verb),
                             r.chance_ap, r.prevalence_ci.lo, r.prevalence_ci.hi);
    }
  }
  return {inside == static_cast<int>(rows.size()),
          fmt::format("{} of {} verbs: seed-mean chance AP inside the prevalence bootstrap CI "
                      "({} clips per verb, {} seeds){}",
                      inside, rows.size(), set.per_verb_count, cfg.seeds.size(), outside)};
}

Verdict above_random(const fs::path& report, const cli::ExperimentConfig& cfg) {
  const Csv t = Csv::read(report / "table1.csv");
  const Band rnd = table1(t, cli::kRandomCondition, "macro");
  bool ok = true;
  std::string detail = fmt::format("Random macro {:.2f} [{:.2f}, {:.2f}];", 100 * rnd.mean,
                                   100 * rnd.lo, 100 * rnd.hi);
  for (const auto kind : cfg.modalities) {
    const std::string id(features::to_string(kind));
    const Band b = table1(t, id, "macro");
    const double gap = 100 * (b.mean - rnd.mean);
    const bool apart = b.lo > rnd.hi;
    ok = ok && gap >= 15.0 && apart;
    detail += fmt::format(" {} {:+.2f} pts{}", id, gap, apart ? "" : " (CIs overlap)");
  }
  return {ok, detail};
}

Verdict no_clear_winner(const fs::path& report) {
  const Csv t = Csv::read(report / "table1.csv");
  const Csv sig = Csv::read(report / "significance.csv");
  const std::string summary = slurp(report / "summary.md");
  const std::vector<std::string> ids{"traj3d", "traj2d", "image2d"};
  int overlaps = 0;
  bool flags_ok = true;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const Band a = table1(t, ids[i], "micro"), b = table1(t, ids[j], "micro");
      const bool apart = a.hi < b.lo || b.hi < a.lo;
      overlaps += !apart;
      const auto& row =
          sig.find({{"metric", "micro"}, {"condition_a", ids[i]}, {"condition_b", ids[j]}});
      flags_ok = flags_ok && row.at("significant") == (apart ? "true" : "false");
    }
  }
  const bool stated =
      summary.find(fmt::format("overlap in {} of 3 pairs", overlaps)) != std::string::npos &&
      summary.find(fmt::format("No clear winner among the three: {}", overlaps >= 2 ? "yes" : "no")) !=
          std::string::npos;
  return {flags_ok && stated,
          fmt::format("micro CIs overlap in {} of 3 pairs ({}); significance flags {}, summary {}",
                      overlaps, overlaps >= 2 ? "replicated" : "not replicated, flagged in summary",
                      flags_ok ? "consistent" : "INCONSISTENT",
                      stated ? "states it" : "DOES NOT state it")};
}

Verdict probe_order(const fs::path& report, const cli::ExperimentConfig& cfg) {
  const Csv per = Csv::read(report / "per_seed.csv");
  const auto mse = [&](const std::string& cond, std::uint64_t s) {
    return num(per.find({{"condition", cond}, {"seed", std::to_string(s)}, {"metric", "probe.test_mse"}}),
               "value");
  };
  int a = 0, b = 0, c = 0, all = 0;
  for (const auto s : cfg.seeds) {
    const bool r1 = mse("traj3d", s) < mse("traj2d", s);
    const bool r2 = mse("traj2d", s) < mse(cli::kRandomCondition, s);
    const bool r3 = mse("image+traj2d", s) < mse("traj2d", s);
    a += r1;
    b += r2;
    c += r3;
    all += r1 && r2 && r3;
  }
  const int n = static_cast<int>(cfg.seeds.size());
  const int need = n - 1;
  return {all >= need,
          fmt::format("all three orderings hold in {} of {} seeds (need {}): Traj3D<Traj2D {}/{}, "
                      "Traj2D<Random {}/{}, Image+Traj2D<Traj2D {}/{}",
                      all, n, need, a, n, b, n, c, n)};
}

Verdict fall_stress(const fs::path& report) {
  const Csv s = Csv::read(report / "fall_stress.csv");
  const auto& t3 = s.find({{"condition", "traj3d"}});
  const auto& im = s.find({{"condition", "image2d"}});
  const double occluded = num(t3, "mean_occluded_fraction");
  const bool apart = num(t3, "boot_lo") > num(im, "boot_hi");
  const bool higher = num(t3, "ap") > num(im, "ap");
  return {occluded >= 0.3 && higher && apart,
          fmt::format("{} clips, mean occluded fraction {:.2f}; fall AP Traj3D {:.2f} [{:.2f}, "
                      "{:.2f}] vs Image2D {:.2f} [{:.2f}, {:.2f}]",
                      t3.at("clips"), occluded, 100 * num(t3, "ap"), 100 * num(t3, "boot_lo"),
                      100 * num(t3, "boot_hi"), 100 * num(im, "ap"), 100 * num(im, "boot_lo"),
                      100 * num(im, "boot_hi"))};
}

Verdict determinism(const fs::path& a, const fs::path& b) {
  int files = 0;
  std::string differ;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path other = b / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
      differ += " " + entry.path().filename().string();
    }
  }
  return {files > 0 && differ.empty(),
          differ.empty() ? fmt::format("{} report CSVs byte-identical across two runs", files)
                         : "differ:" + differ};
}

}  // namespace

int main() {
  report(1, "gradient correctness", gradient_check);
  report(2, "AP oracle equivalence", ap_oracle);
  report(8, "physics closed form", physics);

  const fs::path config = fs::path(TRAJVERB_SOURCE_DIR) / "configs" / "default.yaml";
  const char* dir_env = std::getenv("ACCEPTANCE_OUT");
  const fs::path root = dir_env ? fs::path(dir_env) : fs::temp_directory_path() / "trajverb_acceptance";
  const fs::path first = root / "a", second = root / "b";
  fs::remove_all(root);
  fs::create_directories(root);

  cli::ExperimentConfig cfg;
  int code_a = -1, code_b = -1;
  try {
    cfg = cli::load_config(config, cli::prefixed_environment());
    code_a = run_all(config, first);
  } catch (const std::exception& e) {
    fmt::print("pipeline setup failed: {}\n", e.what());
  }
  const fs::path report_a = first / "report" / cfg.experiment;
  const auto pipeline = [&](std::function<Verdict()> check) {
    return [&, check] {
      if (code_a != 0) return Verdict{false, fmt::format("`all` exited with {}", code_a), true};
      return check();
    };
  };

  report(3, "chance calibration", pipeline([&] { return chance_calibration(cfg, first); }));
  report(4, "above-random learning", pipeline([&] { return above_random(report_a, cfg); }));
  report(5, "no clear winner", pipeline([&] { return no_clear_winner(report_a); }));
  report(6, "probe ordering", pipeline([&] { return probe_order(report_a, cfg); }));
  report(7, "fall occlusion asymmetry", pipeline([&] { return fall_stress(report_a); }));
  report(9, "end-to-end determinism", pipeline([&] {
           code_b = run_all(config, second);
           if (code_b != 0) return Verdict{false, fmt::format("second `all` exited with {}", code_b), true};
           return determinism(report_a, second / "report" / cfg.experiment);
         }));

  const char* keep = std::getenv("ACCEPTANCE_KEEP");
  if (!(keep && std::string(keep) == "1")) fs::remove_all(root);
  fmt::print("{} criteria failed: {} findings (4, 6, 7 do not gate), {} gating\n", g_failures,
             g_failures - g_gate_failures, g_gate_failures);
  return g_gate_failures == 0 ? 0 : 1;
}
