#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace trajverb::nn {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;

/// Named parameter blocks packed into one flat vector. Each block is a
/// column-major matrix view into that vector; block order is declaration
/// order and fixes the checkpoint layout.
class ParamSet {
 public:
  struct Block {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    Eigen::Index size() const { return rows * cols; }
  };

  void add(std::string name, Eigen::Index rows, Eigen::Index cols);

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block(const std::string& name) const;
  bool has(const std::string& name) const;

  MatMap mat(const std::string& name);
  ConstMatMap mat(const std::string& name) const;

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

  /// Same layout, all zeros.
  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& other) const;

  /// Throws naming the first block that holds a NaN or infinity.
  void check_finite(const std::string& what) const;

 private:
  std::vector<Block> blocks_;
  Eigen::VectorXd values_;
};

}  // namespace trajverb::nn
