#include "trajverb/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cerrno>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

extern char** environ;

namespace trajverb::cli {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

json scalar_to_json(const YAML::Node& node) {
  const std::string& text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  const std::string l = lower(text);
  if (l == "true") return true;
  if (l == "false") return false;
  if (l == "null" || l == "~" || text.empty()) return nullptr;
  {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(text.c_str(), &end, 10);
    if (errno == 0 && end != text.c_str() && *end == '\0') return v;
    errno = 0;
    const unsigned long long u = std::strtoull(text.c_str(), &end, 10);
    if (errno == 0 && end != text.c_str() && *end == '\0' && text[0] != '-') return u;
  }
  {
    char* end = nullptr;
    const double d = std::strtod(text.c_str(), &end);
    if (end != text.c_str() && *end == '\0') return d;
  }
  return text;
}

json node_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = node_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : node) arr.push_back(node_to_json(item));
      return arr;
    }
    case YAML::NodeType::Scalar:
      return scalar_to_json(node);
    default:
      return nullptr;
  }
}

// Typed reader over one config section; remembers which keys were consumed
// so leftovers can be reported as typos.
class Section {
 public:
  Section(const json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ != nullptr && !node_->is_null() && !node_->is_object()) {
      throw ConfigError(path_.empty() ? "<root>" : path_, "must be a mapping");
    }
  }

  Section sub(const std::string& key) { return Section(find(key), field(key)); }

  template <typename T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (v == nullptr || v->is_null()) return;
    out = convert<T>(*v, field(key));
  }

  template <typename T, typename F>
  void get_list(const std::string& key, std::vector<T>& out, F&& parse) {
    const json* v = find(key);
    if (v == nullptr || v->is_null()) return;
    if (!v->is_array()) throw ConfigError(field(key), "must be a list");
    out.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      out.push_back(parse((*v)[i], fmt::format("{}[{}]", field(key), i)));
    }
  }

  void finish() const {
    if (node_ == nullptr || node_->is_null()) return;
    for (const auto& [k, v] : node_->items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, json>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "must be true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(where, "must be a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(where, "must be a non-negative integer");
      }
      return v.get<std::uint64_t>();
    } else {
      static_assert(std::is_same_v<T, int>);
      if (!v.is_number_integer()) throw ConfigError(where, "must be an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError(where, "out of range");
      }
      return static_cast<int>(x);
    }
  }

 private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    if (node_ == nullptr || node_->is_null()) return nullptr;
    const auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  const json* node_;
  std::string path_;
  std::set<std::string> seen_;
};

sim::Vec3 parse_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where, "must be a list of 3 numbers");
  sim::Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = Section::convert<double>(v[static_cast<std::size_t>(i)], where);
  return out;
}

template <typename Fn>
auto enum_field(Fn&& parse, const json& v, const std::string& where) {
  const auto name = Section::convert<std::string>(v, where);
  try {
    return parse(name);
  } catch (const ConfigError&) {
    throw ConfigError(where, "unknown value '" + name + "'");
  } catch (const Error&) {
    throw ConfigError(where, "unknown value '" + name + "'");
  }
}

void read_pretrain(Section s, train::PretrainHyper& h) {
  s.get("batch_size", h.batch_size);
  s.get("learning_rate", h.learning_rate);
  s.get("gamma", h.gamma);
  s.get("hidden_width", h.hidden_width);
  s.get("ff_layers", h.ff_layers);
  s.get("epochs", h.epochs);
  s.get("clip_norm", h.clip_norm);
  std::string rollout;
  s.get("rollout", rollout);
  if (rollout == "closed_loop") {
    h.rollout = nn::RolloutMode::kClosedLoop;
  } else if (rollout == "teacher_forced") {
    h.rollout = nn::RolloutMode::kTeacherForced;
  } else if (!rollout.empty()) {
    throw ConfigError(s.field("rollout"), "must be closed_loop or teacher_forced");
  }
  s.finish();
}

void read_finetune(Section& s, train::FinetuneHyper& h) {
  s.get("batch_size", h.batch_size);
  s.get("learning_rate", h.learning_rate);
  s.get("max_epochs", h.max_epochs);
  s.get("patience", h.patience);
  s.get("freeze_encoder", h.freeze_encoder);
  s.get("clip_norm", h.clip_norm);
}

ordered_json pretrain_json(const train::PretrainHyper& h) {
  ordered_json j = h.to_json();
  j.erase("seed");
  return j;
}

ordered_json finetune_json(const train::FinetuneHyper& h) {
  ordered_json j = h.to_json();
  j.erase("seed");
  return j;
}

}  // namespace

std::vector<train::PretrainHyper> GridConfig::cells(const train::PretrainHyper& base) const {
  std::vector<train::PretrainHyper> out;
  for (const int b : batch_size) {
    for (const double lr : learning_rate) {
      for (const double g : gamma) {
        for (const int h : hidden_width) {
          train::PretrainHyper c = base;
          c.batch_size = b;
          c.learning_rate = lr;
          c.gamma = g;
          c.hidden_width = h;
          c.epochs = epochs;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (experiment.empty() ||
      experiment.find_first_of("/\\") != std::string::npos || experiment == "." || experiment == "..") {
    throw ConfigError("experiment", "must be a plain directory name");
  }
  if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) throw ConfigError("seeds", "must be distinct");
  if (episodes < 10) throw ConfigError("dataset.episodes", "must be >= 10");
  if (clip_stride < 1) throw ConfigError("dataset.clip_stride", "must be >= 1");
  if (annotation_stride < 1) throw ConfigError("dataset.annotation_stride", "must be >= 1");
  if (per_verb < 10) throw ConfigError("dataset.per_verb", "must be >= 10");
  if (verbs.empty()) throw ConfigError("verbs", "must not be empty");
  if (std::set<oracle::Verb>(verbs.begin(), verbs.end()).size() != verbs.size()) {
    throw ConfigError("verbs", "must be distinct");
  }
  if (modalities.empty()) throw ConfigError("modalities", "must not be empty");
  if (std::set<features::ModalityKind>(modalities.begin(), modalities.end()).size() !=
      modalities.size()) {
    throw ConfigError("modalities", "must be distinct");
  }
  scene.validate();
  oracle.validate();
  camera.validate();
  pretrain.validate();
  finetune.validate("finetune");
  probe.optim.validate("probe");
  if (probe.max_train_clips < 0) throw ConfigError("probe.max_train_clips", "must be >= 0");
  if (grid.epochs < 1) throw ConfigError("grid.epochs", "must be >= 1");
  if (grid.batch_size.empty() || grid.learning_rate.empty() || grid.gamma.empty() ||
      grid.hidden_width.empty()) {
    throw ConfigError("grid", "every axis needs at least one value");
  }
  for (const auto& c : grid.cells(pretrain)) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("grid" + e.field().substr(e.field().find('.')), "invalid grid value");
    }
  }
  if (bootstrap_draws < 10) throw ConfigError("report.bootstrap_draws", "must be >= 10");
  if (stress.episodes < 10) throw ConfigError("stress.episodes", "must be >= 10");
  if (!(stress.min_occluded_fraction >= 0.0 && stress.min_occluded_fraction <= 1.0)) {
    throw ConfigError("stress.min_occluded_fraction", "must lie in [0, 1]");
  }
  if (stress.bootstrap_draws < 10) throw ConfigError("stress.bootstrap_draws", "must be >= 10");
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["experiment"] = c.experiment;
  j["seed_root"] = c.seed_root;
  j["seeds"] = c.seeds;
  j["dataset"] = {{"episodes", c.episodes},
                  {"clip_stride", c.clip_stride},
                  {"per_verb", c.per_verb},
                  {"annotation_stride", c.annotation_stride}};
  auto verbs = ordered_json::array();
  for (const auto v : c.verbs) verbs.push_back(std::string(oracle::to_string(v)));
  j["verbs"] = verbs;
  auto mods = ordered_json::array();
  for (const auto m : c.modalities) mods.push_back(std::string(features::to_string(m)));
  j["modalities"] = mods;
  const auto& s = c.scene;
  j["scene"] = {{"gravity", s.gravity},
                {"counter_height", s.counter_height},
                {"counter_extent", s.counter_extent},
                {"object_shape", std::string(sim::to_string(s.object_shape))},
                {"object_radius", s.object_radius},
                {"friction_mu", s.friction_mu},
                {"restitution", s.restitution},
                {"hand_speed", s.hand_speed},
                {"randomize_materials", s.randomize_materials}};
  const auto& o = c.oracle;
  j["oracle"] = {{"fall_drop", o.fall_drop},         {"rise_height", o.rise_height},
                 {"contact_travel", o.contact_travel}, {"slip_speed", o.slip_speed},
                 {"roll_spin", o.roll_spin},           {"bounce_rebound", o.bounce_rebound},
                 {"spin_rate", o.spin_rate},           {"spin_travel", o.spin_travel},
                 {"moving_speed", o.moving_speed},     {"rest_speed", o.rest_speed},
                 {"rest_frames", o.rest_frames},       {"push_cos", o.push_cos},
                 {"push_min_speed", o.push_min_speed}, {"push_min_frames", o.push_min_frames},
                 {"drop_window", o.drop_window},       {"toss_speed", o.toss_speed}};
  const auto vec = [](const sim::Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); };
  j["camera"] = {{"position", vec(c.camera.position)},
                 {"look_at", vec(c.camera.look_at)},
                 {"up", vec(c.camera.up)},
                 {"vertical_fov", c.camera.vertical_fov_deg},
                 {"image_width", c.camera.image_width},
                 {"image_height", c.camera.image_height}};
  j["pretrain"] = pretrain_json(c.pretrain);
  j["grid"] = {{"enabled", c.grid.enabled},
               {"epochs", c.grid.epochs},
               {"batch_size", c.grid.batch_size},
               {"learning_rate", c.grid.learning_rate},
               {"gamma", c.grid.gamma},
               {"hidden_width", c.grid.hidden_width}};
  j["finetune"] = finetune_json(c.finetune);
  ordered_json probe = finetune_json(c.probe.optim);
  probe["max_train_clips"] = c.probe.max_train_clips;
  j["probe"] = probe;
  j["random_baseline"] = {{"modality", std::string(features::to_string(c.random_modality))}};
  j["report"] = {{"bootstrap_draws", c.bootstrap_draws}};
  j["stress"] = {{"enabled", c.stress.enabled},
                 {"episodes", c.stress.episodes},
                 {"min_occluded_fraction", c.stress.min_occluded_fraction},
                 {"bootstrap_draws", c.stress.bootstrap_draws}};
  return j;
}

ExperimentConfig config_from_json(const json& tree) {
  ExperimentConfig c;
  Section root(&tree, "");
  root.get("experiment", c.experiment);
  root.get("seed_root", c.seed_root);
  root.get_list("seeds", c.seeds, [](const json& v, const std::string& where) {
    return Section::convert<std::uint64_t>(v, where);
  });
  {
    Section s = root.sub("dataset");
    s.get("episodes", c.episodes);
    s.get("clip_stride", c.clip_stride);
    s.get("per_verb", c.per_verb);
    s.get("annotation_stride", c.annotation_stride);
    s.finish();
  }
  root.get_list("verbs", c.verbs, [](const json& v, const std::string& where) {
    return enum_field([](const std::string& n) { return oracle::verb_from_string(n); }, v, where);
  });
  root.get_list("modalities", c.modalities, [](const json& v, const std::string& where) {
    return enum_field([](const std::string& n) { return features::modality_from_string(n); }, v,
                      where);
  });
  {
    Section s = root.sub("scene");
    s.get("gravity", c.scene.gravity);
    s.get("counter_height", c.scene.counter_height);
    s.get("counter_extent", c.scene.counter_extent);
    std::string shape;
    s.get("object_shape", shape);
    if (!shape.empty()) {
      c.scene.object_shape = enum_field([](const std::string& n) { return sim::shape_from_string(n); },
                                        json(shape), s.field("object_shape"));
    }
    s.get("object_radius", c.scene.object_radius);
    s.get("friction_mu", c.scene.friction_mu);
    s.get("restitution", c.scene.restitution);
    s.get("hand_speed", c.scene.hand_speed);
    s.get("randomize_materials", c.scene.randomize_materials);
    s.finish();
  }
  {
    Section s = root.sub("oracle");
    auto& o = c.oracle;
    s.get("fall_drop", o.fall_drop);
    s.get("rise_height", o.rise_height);
    s.get("contact_travel", o.contact_travel);
    s.get("slip_speed", o.slip_speed);
    s.get("roll_spin", o.roll_spin);
    s.get("bounce_rebound", o.bounce_rebound);
    s.get("spin_rate", o.spin_rate);
    s.get("spin_travel", o.spin_travel);
    s.get("moving_speed", o.moving_speed);
    s.get("rest_speed", o.rest_speed);
    s.get("rest_frames", o.rest_frames);
    s.get("push_cos", o.push_cos);
    s.get("push_min_speed", o.push_min_speed);
    s.get("push_min_frames", o.push_min_frames);
    s.get("drop_window", o.drop_window);
    s.get("toss_speed", o.toss_speed);
    s.finish();
  }
  {
    Section s = root.sub("camera");
    for (const auto& [key, target] : {std::pair<const char*, sim::Vec3*>{"position", &c.camera.position},
                                      {"look_at", &c.camera.look_at},
                                      {"up", &c.camera.up}}) {
      json raw;
      s.get(key, raw);
      if (!raw.is_null()) *target = parse_vec3(raw, s.field(key));
    }
    s.get("vertical_fov", c.camera.vertical_fov_deg);
    s.get("image_width", c.camera.image_width);
    s.get("image_height", c.camera.image_height);
    s.finish();
  }
  read_pretrain(root.sub("pretrain"), c.pretrain);
  {
    Section s = root.sub("grid");
    s.get("enabled", c.grid.enabled);
    s.get("epochs", c.grid.epochs);
    const auto as_int = [](const json& v, const std::string& w) { return Section::convert<int>(v, w); };
    const auto as_double = [](const json& v, const std::string& w) {
      return Section::convert<double>(v, w);
    };
    s.get_list("batch_size", c.grid.batch_size, as_int);
    s.get_list("learning_rate", c.grid.learning_rate, as_double);
    s.get_list("gamma", c.grid.gamma, as_double);
    s.get_list("hidden_width", c.grid.hidden_width, as_int);
    s.finish();
  }
  {
    Section s = root.sub("finetune");
    read_finetune(s, c.finetune);
    s.finish();
  }
  {
    Section s = root.sub("probe");
    read_finetune(s, c.probe.optim);
    s.get("max_train_clips", c.probe.max_train_clips);
    s.finish();
  }
  {
    Section s = root.sub("random_baseline");
    std::string m;
    s.get("modality", m);
    if (!m.empty()) {
      c.random_modality = enum_field(
          [](const std::string& n) { return features::modality_from_string(n); }, json(m),
          s.field("modality"));
    }
    s.finish();
  }
  {
    Section s = root.sub("report");
    s.get("bootstrap_draws", c.bootstrap_draws);
    s.finish();
  }
  {
    Section s = root.sub("stress");
    s.get("enabled", c.stress.enabled);
    s.get("episodes", c.stress.episodes);
    s.get("min_occluded_fraction", c.stress.min_occluded_fraction);
    s.get("bootstrap_draws", c.stress.bootstrap_draws);
    s.finish();
  }
  root.finish();
  return c;
}

json yaml_to_json(const std::string& text) {
  try {
    return node_to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("<file>", std::string("YAML parse error: ") + e.what());
  }
}

void apply_env_overrides(json& tree, const std::map<std::string, std::string>& env) {
  const std::string prefix = kEnvPrefix;
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) continue;
    const std::string key = lower(name.substr(prefix.size()));
    if (!tree.is_object()) tree = json::object();
    json* node = &tree;
    std::size_t start = 0;
    while (true) {
      const auto sep = key.find("__", start);
      const std::string part = key.substr(start, sep == std::string::npos ? sep : sep - start);
      if (part.empty()) throw ConfigError(name, "malformed override name");
      if (sep == std::string::npos) {
        (*node)[part] = yaml_to_json(value);
        break;
      }
      json& child = (*node)[part];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) throw ConfigError(name, "override descends into a non-mapping");
      node = &child;
      start = sep + 2;
    }
  }
}

std::map<std::string, std::string> prefixed_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(0, eq);
    if (name.rfind(kEnvPrefix, 0) == 0) out[name] = entry.substr(eq + 1);
  }
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::map<std::string, std::string>& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json tree = yaml_to_json(ss.str());
  if (tree.is_null()) tree = json::object();
  apply_env_overrides(tree, env);
  ExperimentConfig cfg = config_from_json(tree);
  cfg.validate();
  return cfg;
}

}  // namespace trajverb::cli
