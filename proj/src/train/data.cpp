#include "trajverb/train/data.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace trajverb::train {

SplitLoader::SplitLoader(const features::FeatureTable& table,
                         const std::map<std::uint64_t, oracle::Split>& episode_split)
    : table_(&table) {
  split_.reserve(table.size());
  for (const auto& ref : table.clips()) {
    const auto it = episode_split.find(ref.episode_seed);
    if (it == episode_split.end()) {
      throw Error(fmt::format("episode {} has no split assignment", ref.episode_seed));
    }
    split_.push_back(it->second);
  }
}

std::vector<std::size_t> SplitLoader::rows(oracle::Split split) const {
  if (split == oracle::Split::kTest && !test_open_) {
    throw SplitGuardError("test split requested before final evaluation");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_.size(); ++i) {
    if (split_[i] == split) out.push_back(i);
  }
  return out;
}

void SplitLoader::guard(std::span<const std::size_t> rows) const {
  if (test_open_) return;
  for (const auto r : rows) {
    if (split_.at(r) == oracle::Split::kTest) {
      throw SplitGuardError("test clip read before final evaluation");
    }
  }
}

nn::SequenceBatch SplitLoader::gather(std::span<const std::size_t> rows, int first,
                                      int count) const {
  guard(rows);
  const int d = table_->dim();
  const auto n = static_cast<Eigen::Index>(rows.size());
  nn::SequenceBatch batch;
  batch.at.assign(static_cast<std::size_t>(count), Eigen::MatrixXd(d, n));
  const float* base = table_->values().data();
  for (Eigen::Index b = 0; b < n; ++b) {
    const std::size_t row = rows[static_cast<std::size_t>(b)];
    const float* clip = base + (row * features::FeatureTable::kRowsPerClip + first) *
                                   static_cast<std::size_t>(d);
    for (int t = 0; t < count; ++t) {
      auto col = batch.at[static_cast<std::size_t>(t)].col(b);
      for (int k = 0; k < d; ++k) col[k] = clip[static_cast<std::size_t>(t) * d + k];
    }
  }
  return batch;
}

nn::SequenceBatch SplitLoader::inputs(std::span<const std::size_t> rows) const {
  return gather(rows, 0, sim::kClipFrames);
}

nn::SequenceBatch SplitLoader::futures(std::span<const std::size_t> rows) const {
  return gather(rows, sim::kClipFrames, sim::kFutureFrames);
}

SplitLoader SplitLoader::for_final_evaluation() const {
  SplitLoader open = *this;
  open.test_open_ = true;
  return open;
}

LabeledClips labeled_clips(const SplitLoader& loader, const oracle::AnnotationSet& annotations,
                           const std::vector<oracle::Verb>& verbs, oracle::Split split) {
  if (split == oracle::Split::kTest && !loader.test_open()) {
    throw SplitGuardError("test annotations requested before final evaluation");
  }
  std::map<oracle::ClipRef, std::vector<std::pair<int, bool>>> by_clip;
  for (const auto& a : annotations.entries) {
    if (a.split != split) continue;
    const auto v = std::find(verbs.begin(), verbs.end(), a.verb);
    if (v == verbs.end()) continue;
    by_clip[a.clip].emplace_back(static_cast<int>(v - verbs.begin()), a.label);
  }
  LabeledClips out;
  const auto n = static_cast<Eigen::Index>(by_clip.size());
  const auto nv = static_cast<Eigen::Index>(verbs.size());
  out.labels = Eigen::MatrixXd::Zero(nv, n);
  out.mask = Eigen::MatrixXd::Zero(nv, n);
  Eigen::Index j = 0;
  for (const auto& [ref, judged] : by_clip) {
    out.rows.push_back(loader.table().index_of(ref));
    out.clips.push_back(ref);
    for (const auto& [verb, label] : judged) {
      out.labels(verb, j) = label ? 1.0 : 0.0;
      out.mask(verb, j) = 1.0;
    }
    ++j;
  }
  return out;
}

Eigen::MatrixXd final_positions(std::span<const oracle::Clip> clips,
                                const features::FeatureTable& table) {
  std::map<oracle::ClipRef, const oracle::Clip*> lookup;
  for (const auto& c : clips) lookup[{c.episode_seed(), c.start_frame()}] = &c;
  Eigen::MatrixXd out(3, static_cast<Eigen::Index>(table.size()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto it = lookup.find(table.clips()[i]);
    if (it == lookup.end()) throw Error("final_positions: clip missing from the clip list");
    out.col(static_cast<Eigen::Index>(i)) = it->second->frames().back().obj_pos;
  }
  return out;
}

}  // namespace trajverb::train
