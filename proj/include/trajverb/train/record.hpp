#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace trajverb::train {

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
  /// Set only on the row of the selected (best dev) epoch.
  std::optional<double> test_metric;
};

/// Everything a single training run reports. Epoch 0 is the model before any
/// update.
struct RunRecord {
  std::string stage;  // "pretrain", "finetune" or "probe"
  std::string modality;
  std::uint64_t seed = 0;
  nlohmann::ordered_json hyper = nlohmann::ordered_json::object();
  std::vector<EpochStat> pretrain_history;
  std::vector<EpochStat> finetune_history;
  int best_epoch = 0;
  /// Sorted by key so serialization is stable.
  std::map<std::string, double> final_metrics;

  /// History of this run's own stage.
  const std::vector<EpochStat>& history() const;
  std::vector<EpochStat>& history();
};

nlohmann::ordered_json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

void write_record(const std::filesystem::path& path, const RunRecord& r);
RunRecord read_record(const std::filesystem::path& path);

/// CSV with header epoch,train_loss,dev_metric,test_metric; the test column is
/// empty except on the selected epoch.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochStat>& history);

/// Shortest round-trip decimal form, used for every number written to text.
std::string format_number(double x);

}  // namespace trajverb::train
