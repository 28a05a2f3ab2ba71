#include "trajverb/cli/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "trajverb/cli/stress.hpp"
#include "trajverb/eval/report.hpp"
#include "trajverb/hash.hpp"
#include "trajverb/nn/checkpoint.hpp"
#include "trajverb/sim/episode_io.hpp"
#include "trajverb/sim/generator.hpp"
#include "trajverb/train/probe.hpp"

namespace trajverb::cli {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using features::ModalityKind;

namespace {

std::string key_of(std::initializer_list<std::string> parts) {
  Sha256 h;
  for (const auto& p : parts) {
    h.update(p);
    h.update(std::string_view("\x1f", 1));
  }
  return h.hex();
}

void require(const fs::path& stamp, const std::string& key, const std::string& stage,
             const std::string& what) {
  if (!fs::exists(stamp)) throw MissingArtifact(stage, what + " not found");
  if (read_text(stamp) != key) {
    throw MissingArtifact(stage, what + " was built from a different configuration");
  }
}

void write_scores_csv(const fs::path& path, const std::vector<eval::ScoredEntry>& scored) {
  std::string text = "verb,episode_seed,start_frame,label,score\n";
  for (const auto& e : scored) {
    text += fmt::format("{},{},{},{},{}\n", oracle::to_string(e.verb), e.clip.episode_seed,
                        e.clip.start_frame, e.label, train::format_number(e.score));
  }
  write_text_atomic(path, text);
}

std::vector<eval::ScoredEntry> read_scores_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<eval::ScoredEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw Error("malformed score row in " + path.string());
    eval::ScoredEntry e;
    e.verb = oracle::verb_from_string(f[0]);
    e.clip.episode_seed = std::stoull(f[1]);
    e.clip.start_frame = std::stoi(f[2]);
    e.label = std::stoi(f[3]);
    e.score = std::stod(f[4]);
    out.push_back(e);
  }
  return out;
}

std::string condition_label(const std::string& id) {
  if (id == kRandomCondition) return "Random";
  return std::string(features::display_name(features::modality_from_string(id)));
}

}  // namespace

struct Pipeline::State {
  std::mutex mu;
  std::vector<std::shared_ptr<const sim::Episode>> episodes;
  std::optional<oracle::AnnotationSet> annotations;
  std::map<ModalityKind, std::unique_ptr<features::FeatureTable>> tables;
};

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Pipeline::Pipeline(ExperimentConfig cfg, PipelineOptions options)
    : cfg_(std::move(cfg)), opt_(std::move(options)), state_(std::make_unique<State>()) {
  cfg_.validate();
}

Pipeline::~Pipeline() = default;

void Pipeline::run(const std::string& stage) {
  if (stage == "gen") return gen();
  if (stage == "label") return label();
  if (stage == "featurize") return featurize();
  if (stage == "gridsearch") return gridsearch();
  if (stage == "pretrain") return pretrain();
  if (stage == "finetune") return finetune();
  if (stage == "probe") return probe();
  if (stage == "report") return report();
  if (stage == "all") return all();
  throw ConfigError("stage", "unknown stage '" + stage + "'");
}

fs::path Pipeline::data_dir() const { return opt_.out / "data"; }

fs::path Pipeline::feature_path(ModalityKind kind) const {
  return opt_.out / "features" / (std::string(features::to_string(kind)) + ".vsfc");
}

fs::path Pipeline::run_dir(const std::string& condition, std::uint64_t seed) const {
  return opt_.out / "runs" / cfg_.experiment / condition / std::to_string(seed);
}

fs::path Pipeline::report_dir() const { return opt_.out / "report" / cfg_.experiment; }

std::vector<std::string> Pipeline::conditions() const {
  std::vector<std::string> out;
  for (const auto m : cfg_.modalities) out.emplace_back(features::to_string(m));
  out.emplace_back(kRandomCondition);
  return out;
}

ModalityKind Pipeline::condition_modality(const std::string& condition) const {
  if (condition == kRandomCondition) return cfg_.random_modality;
  return features::modality_from_string(condition);
}

std::uint64_t Pipeline::run_seed(std::uint64_t seed) const {
  return derive_seed(cfg_.seed_root, "run", seed);
}

void Pipeline::log(const std::string& line) const {
  if (opt_.log == nullptr) return;
  std::lock_guard lock(log_mu_);
  *opt_.log << line << '\n' << std::flush;
}

bool Pipeline::skip(const fs::path& stamp, const std::string& key) const {
  return !opt_.force && fs::exists(stamp) && read_text(stamp) == key;
}

// ---- stage keys ----

std::string Pipeline::gen_key() const {
  const auto full = to_json(cfg_);
  return key_of({"gen", full["scene"].dump(), std::to_string(cfg_.episodes),
                 std::to_string(cfg_.seed_root)});
}

std::string Pipeline::label_key() const {
  const auto full = to_json(cfg_);
  return key_of({"label", gen_key(), full["oracle"].dump(), full["verbs"].dump(),
                 std::to_string(cfg_.per_verb), std::to_string(cfg_.annotation_stride)});
}

std::string Pipeline::feature_key(ModalityKind kind) const {
  return key_of({"featurize", label_key(), std::string(features::to_string(kind)),
                 features::camera_hash(cfg_.camera), std::to_string(cfg_.clip_stride)});
}

std::string Pipeline::grid_key(ModalityKind kind) const {
  const auto full = to_json(cfg_);
  return key_of({"grid", feature_key(kind), full["grid"].dump(), full["pretrain"].dump()});
}

train::PretrainHyper Pipeline::pretrain_hyper(ModalityKind kind) const {
  train::PretrainHyper h = cfg_.pretrain;
  if (!cfg_.grid.enabled) return h;
  const fs::path dir = opt_.out / "runs" / cfg_.experiment / std::string(features::to_string(kind));
  require(dir / "grid.stamp", grid_key(kind), "gridsearch",
          fmt::format("grid search result for {}", features::to_string(kind)));
  const json best = json::parse(read_text(dir / "grid.json")).at("best");
  h.batch_size = best.at("batch_size").get<int>();
  h.learning_rate = best.at("learning_rate").get<double>();
  h.gamma = best.at("gamma").get<double>();
  h.hidden_width = best.at("hidden_width").get<int>();
  return h;
}

std::string Pipeline::pretrain_key(const std::string& condition, std::uint64_t seed) const {
  const auto kind = condition_modality(condition);
  auto hyper = pretrain_hyper(kind).to_json();
  return key_of({"pretrain", condition, feature_key(kind), hyper.dump(),
                 std::to_string(run_seed(seed))});
}

std::string Pipeline::finetune_key(const std::string& condition, std::uint64_t seed) const {
  return key_of({"finetune", pretrain_key(condition, seed), label_key(),
                 to_json(cfg_)["finetune"].dump()});
}

std::string Pipeline::probe_key(const std::string& condition, std::uint64_t seed) const {
  return key_of({"probe", pretrain_key(condition, seed), to_json(cfg_)["probe"].dump()});
}

// ---- shared inputs ----

const std::vector<std::shared_ptr<const sim::Episode>>& Pipeline::episodes() {
  std::lock_guard lock(state_->mu);
  if (state_->episodes.empty()) {
    require(data_dir() / "gen.stamp", gen_key(), "gen", "episodes");
    std::vector<std::shared_ptr<const sim::Episode>> eps(static_cast<std::size_t>(cfg_.episodes));
    parallel_for(eps.size(), opt_.jobs, [&](std::size_t i) {
      eps[i] = std::make_shared<const sim::Episode>(
          sim::read_episode(data_dir() / "episodes" / fmt::format("ep_{}.json", i)));
    });
    state_->episodes = std::move(eps);
  }
  return state_->episodes;
}

const oracle::AnnotationSet& Pipeline::annotations() {
  std::lock_guard lock(state_->mu);
  if (!state_->annotations) {
    require(data_dir() / "label.stamp", label_key(), "label", "annotations");
    auto set = oracle::read_annotations(data_dir() / "annotations.jsonl");
    set.episode_split = oracle::read_splits(data_dir() / "splits.json");
    state_->annotations = std::move(set);
  }
  return *state_->annotations;
}

const features::FeatureTable& Pipeline::table(ModalityKind kind) {
  std::lock_guard lock(state_->mu);
  auto& slot = state_->tables[kind];
  if (!slot) {
    const std::string key = feature_key(kind);
    const fs::path path = feature_path(kind);
    require(fs::path(path.string() + ".stamp"), key, "featurize",
            fmt::format("{} features", features::to_string(kind)));
    slot = std::make_unique<features::FeatureTable>(features::read_feature_table(path, key));
  }
  return *slot;
}

std::vector<oracle::Clip> Pipeline::table_clips(ModalityKind kind) {
  const auto& t = table(kind);
  std::map<std::uint64_t, std::shared_ptr<const sim::Episode>> by_seed;
  for (const auto& ep : episodes()) by_seed[ep->seed] = ep;
  std::vector<oracle::Clip> out;
  out.reserve(t.size());
  for (const auto& ref : t.clips()) out.emplace_back(by_seed.at(ref.episode_seed), ref.start_frame);
  return out;
}

// ---- stages ----

void Pipeline::gen() {
  const fs::path stamp = data_dir() / "gen.stamp";
  const std::string key = gen_key();
  if (skip(stamp, key)) {
    log("gen: up to date");
    return;
  }
  const fs::path dir = data_dir() / "episodes";
  fs::remove_all(dir);
  fs::remove(stamp);
  fs::create_directories(dir);
  std::atomic<int> done{0};
  parallel_for(static_cast<std::size_t>(cfg_.episodes), opt_.jobs, [&](std::size_t i) {
    const auto ep = sim::generate_episode(derive_seed(cfg_.seed_root, "episode", i), cfg_.scene);
    sim::write_episode(dir / fmt::format("ep_{}.json", i), ep);
    const int n = ++done;
    if (n % 50 == 0 || n == cfg_.episodes) log(fmt::format("gen: {}/{} episodes", n, cfg_.episodes));
  });
  write_text_atomic(stamp, key);
  std::lock_guard lock(state_->mu);
  state_->episodes.clear();
}

void Pipeline::label() {
  const fs::path stamp = data_dir() / "label.stamp";
  const std::string key = label_key();
  if (skip(stamp, key)) {
    log("label: up to date");
    return;
  }
  const auto& eps = episodes();
  oracle::AnnotationOptions opts;
  opts.per_verb = cfg_.per_verb;
  opts.stride = cfg_.annotation_stride;
  opts.seed = derive_seed(cfg_.seed_root, "annotations");
  const auto set = oracle::build_annotation_set(eps, cfg_.verbs, cfg_.oracle, opts);
  oracle::write_annotations(data_dir() / "annotations.jsonl", set);
  oracle::write_splits(data_dir() / "splits.json", set.episode_split);
  write_text_atomic(stamp, key);
  log(fmt::format("label: {} annotations over {} verbs", set.entries.size(), cfg_.verbs.size()));
  std::lock_guard lock(state_->mu);
  state_->annotations.reset();
}

void Pipeline::featurize() {
  std::vector<ModalityKind> kinds = cfg_.modalities;
  if (std::find(kinds.begin(), kinds.end(), cfg_.random_modality) == kinds.end()) {
    kinds.push_back(cfg_.random_modality);
  }
  std::vector<ModalityKind> todo;
  for (const auto k : kinds) {
    if (skip(fs::path(feature_path(k).string() + ".stamp"), feature_key(k))) {
      log(fmt::format("featurize {}: up to date", features::to_string(k)));
    } else {
      todo.push_back(k);
    }
  }
  if (todo.empty()) return;

  const auto& eps = episodes();
  const auto& ann = annotations();
  // Pretraining windows plus every annotated window, in (episode, start) order.
  std::map<oracle::ClipRef, oracle::Clip> clip_map;
  std::map<std::uint64_t, std::shared_ptr<const sim::Episode>> by_seed;
  for (const auto& ep : eps) {
    by_seed[ep->seed] = ep;
    for (auto& c : oracle::extract_clips(ep, cfg_.clip_stride)) {
      clip_map.emplace(oracle::ClipRef{c.episode_seed(), c.start_frame()}, c);
    }
  }
  for (const auto& a : ann.entries) {
    clip_map.emplace(a.clip, oracle::Clip(by_seed.at(a.clip.episode_seed), a.clip.start_frame));
  }
  std::vector<oracle::Clip> clips;
  std::vector<oracle::Clip> train_clips;
  for (const auto& [ref, clip] : clip_map) {
    clips.push_back(clip);
    if (ann.episode_split.at(ref.episode_seed) == oracle::Split::kTrain) train_clips.push_back(clip);
  }

  features::FeatureExtractor extractor(cfg_.camera);
  for (const auto k : todo) {
    const features::Modality m(k);
    const std::string key = feature_key(k);
    const auto norm = features::fit_normalizer(train_clips, m, extractor);
    const auto t = features::build_feature_table(clips, m, extractor, norm);
    const fs::path path = feature_path(k);
    fs::create_directories(path.parent_path());
    features::write_normalizer(fs::path(path).replace_extension(".norm.json"), norm);
    features::write_feature_table(path, t, key);
    write_text_atomic(fs::path(path.string() + ".stamp"), key);
    log(fmt::format("featurize {}: {} clips x {} dims", features::to_string(k), t.size(), t.dim()));
    std::lock_guard lock(state_->mu);
    state_->tables.erase(k);
  }
}

void Pipeline::gridsearch() {
  if (!cfg_.grid.enabled) {
    log("gridsearch: disabled in config, using pretrain settings as given");
    return;
  }
  const auto& splits = annotations().episode_split;
  parallel_for(cfg_.modalities.size(), opt_.jobs, [&](std::size_t i) {
    const auto kind = cfg_.modalities[i];
    const std::string id(features::to_string(kind));
    const fs::path dir = opt_.out / "runs" / cfg_.experiment / id;
    const std::string key = grid_key(kind);
    if (skip(dir / "grid.stamp", key)) {
      log(fmt::format("gridsearch {}: up to date", id));
      return;
    }
    train::SplitLoader loader(table(kind), splits);
    train::PretrainHyper base = cfg_.pretrain;
    base.seed = derive_seed(cfg_.seed_root, "grid");
    const auto cells = cfg_.grid.cells(base);
    std::size_t cell_index = 0;
    const auto result = train::grid_search(cells, loader, [&](const std::string&, int epoch, double, double dev) {
      if (epoch == 0) ++cell_index;
      log(fmt::format("gridsearch {} cell {}/{}: epoch {} dev {:.5f}", id, cell_index, cells.size(), epoch, dev));
    });
    ordered_json out;
    auto arr = ordered_json::array();
    for (const auto& c : result.cells) {
      ordered_json cell = c.hyper.to_json();
      cell["dev_loss"] = std::isfinite(c.dev_loss) ? ordered_json(c.dev_loss) : ordered_json(nullptr);
      cell["diverged"] = c.diverged;
      arr.push_back(cell);
    }
    out["cells"] = arr;
    out["best_index"] = result.best_index;
    out["best"] = result.best.to_json();
    write_text_atomic(dir / "grid.json", out.dump(2) + "\n");
    write_text_atomic(dir / "grid.stamp", key);
  });
}

void Pipeline::pretrain() {
  const auto conds = conditions();
  const auto& splits = annotations().episode_split;
  parallel_for(conds.size() * cfg_.seeds.size(), opt_.jobs, [&](std::size_t job) {
    const std::string& cond = conds[job / cfg_.seeds.size()];
    const std::uint64_t seed = cfg_.seeds[job % cfg_.seeds.size()];
    const fs::path dir = run_dir(cond, seed);
    const std::string key = pretrain_key(cond, seed);
    const std::string tag = fmt::format("{} seed {}", cond, seed);
    if (skip(dir / "pretrain.stamp", key)) {
      log(fmt::format("pretrain {}: up to date", tag));
      return;
    }
    const auto kind = condition_modality(cond);
    train::SplitLoader loader(table(kind), splits);
    train::PretrainHyper hyper = pretrain_hyper(kind);
    hyper.seed = run_seed(seed);

    nn::EncoderParams encoder;
    train::RunRecord record;
    if (cond == kRandomCondition) {
      // The untrained initialization a real pretraining run would start from.
      Rng init(derive_seed(hyper.seed, "encoder-init"));
      encoder = nn::EncoderParams::random({loader.table().dim(), hyper.hidden_width, hyper.ff_layers}, init);
      record.stage = "pretrain";
      record.modality = std::string(features::to_string(kind));
      record.seed = hyper.seed;
      record.hyper = hyper.to_json();
      record.hyper["untrained"] = true;
      const double train_loss = train::pretrain_eval(encoder, loader, loader.rows(oracle::Split::kTrain), hyper);
      const double dev_loss = train::pretrain_eval(encoder, loader, loader.rows(oracle::Split::kDev), hyper);
      record.pretrain_history.push_back({0, train_loss, dev_loss, std::nullopt});
      record.final_metrics["dev.loss"] = dev_loss;
    } else {
      auto result = train::pretrain(loader, hyper, [&](const std::string&, int epoch, double loss, double dev) {
        log(fmt::format("pretrain {}: epoch {} train {:.5f} dev {:.5f}", tag, epoch, loss, dev));
      });
      encoder = std::move(result.encoder);
      record = std::move(result.record);
    }
    fs::create_directories(dir);
    nn::write_checkpoint(dir / "pretrain.vsck", {static_cast<int>(kind), encoder, std::nullopt});
    train::write_record(dir / "pretrain.json", record);
    train::write_metrics_csv(dir / "pretrain_metrics.csv", record.pretrain_history);
    write_text_atomic(dir / "pretrain.stamp", key);
  });
}

void Pipeline::finetune() {
  const auto conds = conditions();
  const auto& ann = annotations();
  parallel_for(conds.size() * cfg_.seeds.size(), opt_.jobs, [&](std::size_t job) {
    const std::string& cond = conds[job / cfg_.seeds.size()];
    const std::uint64_t seed = cfg_.seeds[job % cfg_.seeds.size()];
    const fs::path dir = run_dir(cond, seed);
    const std::string tag = fmt::format("{} seed {}", cond, seed);
    require(dir / "pretrain.stamp", pretrain_key(cond, seed), "pretrain", "pretrained encoder for " + tag);
    const std::string key = finetune_key(cond, seed);
    if (skip(dir / "finetune.stamp", key)) {
      log(fmt::format("finetune {}: up to date", tag));
      return;
    }
    const auto kind = condition_modality(cond);
    train::SplitLoader loader(table(kind), ann.episode_split);
    const auto encoder = nn::read_checkpoint(dir / "pretrain.vsck").encoder;
    train::FinetuneHyper hyper = cfg_.finetune;
    hyper.seed = run_seed(seed);
    if (cond == kRandomCondition) hyper.freeze_encoder = true;
    auto result = train::finetune(encoder, loader, ann, cfg_.verbs, hyper,
                                  [&](const std::string&, int epoch, double loss, double dev) {
      log(fmt::format("finetune {}: epoch {} train {:.5f} dev mAP {:.4f}", tag, epoch, loss, dev));
    });
    const auto final_loader = loader.for_final_evaluation();
    const auto scored = train::score_annotations(result.model, final_loader, ann, cfg_.verbs, oracle::Split::kTest);
    train::record_test_scores(result.record, scored);
    nn::write_checkpoint(dir / "finetune.vsck", {static_cast<int>(kind), result.model.encoder, result.model.head});
    train::write_record(dir / "finetune.json", result.record);
    train::write_metrics_csv(dir / "metrics.csv", result.record.finetune_history);
    write_scores_csv(dir / "test_scores.csv", scored);
    write_text_atomic(dir / "finetune.stamp", key);
    log(fmt::format("finetune {}: test macro mAP {:.4f}", tag, result.record.final_metrics.at("test.macro")));
  });
}

void Pipeline::probe() {
  const auto conds = conditions();
  const auto& splits = annotations().episode_split;
  // Targets per modality, computed once.
  std::map<ModalityKind, train::ProbeTargets> targets;
  for (const auto& cond : conds) {
    const auto kind = condition_modality(cond);
    if (targets.count(kind)) continue;
    train::SplitLoader loader(table(kind), splits);
    const auto clips = table_clips(kind);
    targets[kind] = train::zscore_targets(train::final_positions(clips, table(kind)), loader);
  }
  parallel_for(conds.size() * cfg_.seeds.size(), opt_.jobs, [&](std::size_t job) {
    const std::string& cond = conds[job / cfg_.seeds.size()];
    const std::uint64_t seed = cfg_.seeds[job % cfg_.seeds.size()];
    const fs::path dir = run_dir(cond, seed);
    const std::string tag = fmt::format("{} seed {}", cond, seed);
    require(dir / "pretrain.stamp", pretrain_key(cond, seed), "pretrain", "pretrained encoder for " + tag);
    const std::string key = probe_key(cond, seed);
    if (skip(dir / "probe.stamp", key)) {
      log(fmt::format("probe {}: up to date", tag));
      return;
    }
    const auto kind = condition_modality(cond);
    train::SplitLoader loader(table(kind), splits);
    const auto encoder = nn::read_checkpoint(dir / "pretrain.vsck").encoder;
    train::ProbeHyper hyper = cfg_.probe;
    hyper.optim.seed = run_seed(seed);
    if (cond == kRandomCondition) hyper.optim.freeze_encoder = true;
    const auto& t = targets.at(kind);
    auto result = train::probe(encoder, loader, t, hyper, [&](const std::string&, int epoch, double loss, double dev) {
      log(fmt::format("probe {}: epoch {} train {:.5f} dev mse {:.5f}", tag, epoch, loss, dev));
    });
    const auto final_loader = loader.for_final_evaluation();
    const double test_mse = train::probe_mse(result.model, final_loader, t, final_loader.rows(oracle::Split::kTest));
    result.record.final_metrics["test.mse"] = test_mse;
    for (auto& e : result.record.history()) {
      if (e.epoch == result.record.best_epoch) e.test_metric = test_mse;
    }
    nn::write_checkpoint(dir / "probe.vsck", {static_cast<int>(kind), result.model.encoder, result.model.head});
    train::write_record(dir / "probe.json", result.record);
    train::write_metrics_csv(dir / "probe_metrics.csv", result.record.history());
    write_text_atomic(dir / "probe.stamp", key);
    log(fmt::format("probe {}: test mse {:.5f}", tag, test_mse));
  });
}

void Pipeline::report() {
  if (cfg_.seeds.size() < 2) {
    throw PreconditionFailed(fmt::format(
        "report needs at least 2 seeds per condition for confidence intervals; config lists {}",
        cfg_.seeds.size()));
  }
  const auto conds = conditions();
  std::string inputs;
  for (const auto& cond : conds) {
    for (const auto seed : cfg_.seeds) {
      const fs::path dir = run_dir(cond, seed);
      const std::string tag = fmt::format("{} seed {}", cond, seed);
      const std::string fk = finetune_key(cond, seed);
      const std::string pk = probe_key(cond, seed);
      require(dir / "finetune.stamp", fk, "finetune", "fine-tuned classifier for " + tag);
      require(dir / "probe.stamp", pk, "probe", "position probe for " + tag);
      inputs += fk + pk;
    }
  }
  const auto full = to_json(cfg_);
  const std::string key = key_of({"report", inputs, full["report"].dump(), full["stress"].dump(),
                                  full["scene"].dump(), full["oracle"].dump(), full["camera"].dump()});
  const fs::path dir = report_dir();
  if (skip(dir / "report.stamp", key)) {
    log("report: up to date");
    return;
  }

  eval::ReportInput input;
  input.seed_root = cfg_.seed_root;
  input.bootstrap_draws = cfg_.bootstrap_draws;
  for (const auto& cond : conds) {
    eval::Condition c{cond, condition_label(cond), {}};
    for (const auto seed : cfg_.seeds) {
      const fs::path rd = run_dir(cond, seed);
      eval::SeedResult r;
      r.seed = seed;
      r.test_scores = read_scores_csv(rd / "test_scores.csv");
      const auto probe_rec = train::read_record(rd / "probe.json");
      r.probe_test_mse = probe_rec.final_metrics.at("test.mse");
      r.probe_dev_mse = probe_rec.final_metrics.at("dev.mse");
      c.seeds.push_back(std::move(r));
    }
    input.conditions.push_back(std::move(c));
  }

  const auto fall_it = std::find(cfg_.verbs.begin(), cfg_.verbs.end(), oracle::Verb::kFall);
  const auto has = [&](ModalityKind k) {
    return std::find(cfg_.modalities.begin(), cfg_.modalities.end(), k) != cfg_.modalities.end();
  };
  if (cfg_.stress.enabled && fall_it != cfg_.verbs.end() && has(ModalityKind::kTraj3D) &&
      has(ModalityKind::kImage2D)) {
    log("report: building occlusion stress pool");
    const auto pool = build_stress_pool(cfg_);
    const auto fall_row = static_cast<Eigen::Index>(fall_it - cfg_.verbs.begin());
    std::vector<int> labels;
    double occluded = 0.0;
    for (const auto& s : pool) {
      labels.push_back(s.fall ? 1 : 0);
      occluded += s.occluded_fraction;
    }
    for (const auto kind : {ModalityKind::kTraj3D, ModalityKind::kImage2D}) {
      const std::string id(features::to_string(kind));
      const features::Modality m(kind);
      const auto norm = features::read_normalizer(fs::path(feature_path(kind)).replace_extension(".norm.json"));
      features::FeatureExtractor extractor(cfg_.camera);
      std::vector<Tensor2> xs;
      for (const auto& s : pool) xs.push_back(features::featurize(s.clip, m, extractor, norm).values);
      Eigen::VectorXd mean_score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pool.size()));
      eval::StressResult sr;
      sr.id = id;
      sr.label = std::string(features::display_name(kind));
      sr.clips = static_cast<int>(pool.size());
      sr.positives = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
      sr.occluded_fraction = occluded / static_cast<double>(pool.size());
      for (const auto seed : cfg_.seeds) {
        const auto ck = nn::read_checkpoint(run_dir(id, seed) / "finetune.vsck");
        std::vector<double> scores;
        constexpr std::size_t kChunk = 128;
        for (std::size_t first = 0; first < xs.size(); first += kChunk) {
          const auto n = std::min(kChunk, xs.size() - first);
          const auto logits = nn::head_forward(
              ck.encoder, *ck.head, nn::SequenceBatch::from(std::span<const Tensor2>(xs).subspan(first, n)));
          for (Eigen::Index j = 0; j < logits.cols(); ++j) scores.push_back(logits(fall_row, j));
        }
        for (std::size_t j = 0; j < scores.size(); ++j) mean_score[static_cast<Eigen::Index>(j)] += scores[j];
        sr.per_seed_ap.push_back(eval::average_precision(scores, labels));
      }
      mean_score /= static_cast<double>(cfg_.seeds.size());
      const std::vector<double> ms(mean_score.data(), mean_score.data() + mean_score.size());
      sr.ap = eval::bootstrap_interval(
          pool.size(),
          [&](std::span<const std::size_t> idx) {
            std::vector<double> s;
            std::vector<int> l;
            for (const auto i : idx) {
              s.push_back(ms[i]);
              l.push_back(labels[i]);
            }
            return eval::average_precision(s, l);
          },
          cfg_.stress.bootstrap_draws, derive_seed(cfg_.seed_root, "stress-bootstrap"));
      log(fmt::format("report: stress fall AP {} = {:.4f} [{:.4f}, {:.4f}]", id, sr.ap.mean, sr.ap.lo, sr.ap.hi));
      input.stress.push_back(std::move(sr));
    }
  }

  ordered_json meta;
  meta["experiment"] = cfg_.experiment;
  meta["config_hash"] = sha256_hex(full.dump());
  meta["seed_root"] = cfg_.seed_root;
  meta["seeds"] = cfg_.seeds;
  meta["random_condition"] = {
      {"encoder", "untrained random initialization, frozen; head trained"},
      {"modality", std::string(features::to_string(cfg_.random_modality))}};
  meta["config"] = full;
  input.metadata = meta;

  fs::remove_all(dir);
  eval::make_report(input, dir);
  write_text_atomic(dir / "report.stamp", key);
  log("report: written to " + dir.string());
}

void Pipeline::all() {
  gen();
  label();
  featurize();
  gridsearch();
  pretrain();
  finetune();
  probe();
  report();
}

}  // namespace trajverb::cli
