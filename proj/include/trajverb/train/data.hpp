#pragma once

#include <map>
#include <span>
#include <vector>

#include "trajverb/error.hpp"
#include "trajverb/features/cache.hpp"
#include "trajverb/nn/model.hpp"
#include "trajverb/oracle/annotation.hpp"

namespace trajverb::train {

/// Raised when training code asks for test-split data before final
/// evaluation.
class SplitGuardError : public Error {
 public:
  using Error::Error;
};

/// Split-tagged access to a feature table. Test rows are refused until a
/// copy is explicitly opened with for_final_evaluation().
class SplitLoader {
 public:
  SplitLoader(const features::FeatureTable& table,
              const std::map<std::uint64_t, oracle::Split>& episode_split);

  const features::FeatureTable& table() const { return *table_; }
  oracle::Split split_of(std::size_t row) const { return split_[row]; }
  bool test_open() const { return test_open_; }

  /// Table rows whose episode belongs to `split`, in table order.
  std::vector<std::size_t> rows(oracle::Split split) const;

  /// Input windows (90 x d per clip) for the given rows, as a batch.
  nn::SequenceBatch inputs(std::span<const std::size_t> rows) const;
  /// Future windows (60 x d per clip).
  nn::SequenceBatch futures(std::span<const std::size_t> rows) const;

  SplitLoader for_final_evaluation() const;

 private:
  void guard(std::span<const std::size_t> rows) const;
  nn::SequenceBatch gather(std::span<const std::size_t> rows, int first, int count) const;

  const features::FeatureTable* table_;
  std::vector<oracle::Split> split_;
  bool test_open_ = false;
};

/// Annotated clips of one split in multi-label form: for each distinct clip,
/// a column of labels and a mask marking which verbs were judged.
struct LabeledClips {
  std::vector<std::size_t> rows;
  std::vector<oracle::ClipRef> clips;
  Eigen::MatrixXd labels;  // verbs x clips
  Eigen::MatrixXd mask;    // verbs x clips

  std::size_t size() const { return rows.size(); }
};

LabeledClips labeled_clips(const SplitLoader& loader, const oracle::AnnotationSet& annotations,
                           const std::vector<oracle::Verb>& verbs, oracle::Split split);

/// Final-frame object position (x, y, z) of every table row, 3 x rows.
Eigen::MatrixXd final_positions(std::span<const oracle::Clip> clips,
                                const features::FeatureTable& table);

}  // namespace trajverb::train
