#include "trajverb/train/record.hpp"

#include <fstream>

#include <fmt/format.h>

#include "trajverb/error.hpp"

namespace trajverb::train {
namespace {

nlohmann::ordered_json history_json(const std::vector<EpochStat>& h) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : h) {
    nlohmann::ordered_json row;
    row["epoch"] = e.epoch;
    row["train_loss"] = e.train_loss;
    row["dev_metric"] = e.dev_metric;
    if (e.test_metric) row["test_metric"] = *e.test_metric;
    arr.push_back(std::move(row));
  }
  return arr;
}

std::vector<EpochStat> history_from(const nlohmann::json& arr) {
  std::vector<EpochStat> h;
  for (const auto& row : arr) {
    EpochStat e;
    e.epoch = row.at("epoch").get<int>();
    e.train_loss = row.at("train_loss").get<double>();
    e.dev_metric = row.at("dev_metric").get<double>();
    if (row.contains("test_metric")) e.test_metric = row["test_metric"].get<double>();
    h.push_back(e);
  }
  return h;
}

}  // namespace

const std::vector<EpochStat>& RunRecord::history() const {
  return stage == "pretrain" ? pretrain_history : finetune_history;
}

std::vector<EpochStat>& RunRecord::history() {
  return stage == "pretrain" ? pretrain_history : finetune_history;
}

nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["stage"] = r.stage;
  j["modality"] = r.modality;
  j["seed"] = r.seed;
  j["hyper"] = r.hyper;
  j["best_epoch"] = r.best_epoch;
  j["pretrain_history"] = history_json(r.pretrain_history);
  j["finetune_history"] = history_json(r.finetune_history);
  auto metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.final_metrics) metrics[k] = v;
  j["final_metrics"] = metrics;
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.stage = j.at("stage").get<std::string>();
  r.modality = j.at("modality").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.hyper = j.at("hyper");
  r.best_epoch = j.at("best_epoch").get<int>();
  r.pretrain_history = history_from(j.at("pretrain_history"));
  r.finetune_history = history_from(j.at("finetune_history"));
  for (const auto& [k, v] : j.at("final_metrics").items()) r.final_metrics[k] = v.get<double>();
  return r;
}

void write_record(const std::filesystem::path& path, const RunRecord& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(r).dump(1) << '\n';
}

RunRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return record_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed run record " + path.string() + ": " + e.what());
  }
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochStat>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,train_loss,dev_metric,test_metric\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << format_number(e.train_loss) << ',' << format_number(e.dev_metric) << ','
        << (e.test_metric ? format_number(*e.test_metric) : "") << '\n';
  }
}

std::string format_number(double x) { return fmt::format("{}", x); }

}  // namespace trajverb::train
