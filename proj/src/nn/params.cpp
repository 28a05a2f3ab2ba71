#include "trajverb/nn/params.hpp"

#include <algorithm>

#include "trajverb/error.hpp"

namespace trajverb::nn {

void ParamSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (has(name)) throw Error("duplicate parameter block " + name);
  Block b{std::move(name), values_.size(), rows, cols};
  values_.conservativeResize(values_.size() + b.size());
  values_.tail(b.size()).setZero();
  blocks_.push_back(std::move(b));
}

const ParamSet::Block& ParamSet::block(const std::string& name) const {
  const auto it = std::find_if(blocks_.begin(), blocks_.end(),
                               [&](const Block& b) { return b.name == name; });
  if (it == blocks_.end()) throw Error("no parameter block " + name);
  return *it;
}

bool ParamSet::has(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.name == name; });
}

MatMap ParamSet::mat(const std::string& name) {
  const auto& b = block(name);
  return MatMap(values_.data() + b.offset, b.rows, b.cols);
}

ConstMatMap ParamSet::mat(const std::string& name) const {
  const auto& b = block(name);
  return ConstMatMap(values_.data() + b.offset, b.rows, b.cols);
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out = *this;
  out.values_.setZero();
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

void ParamSet::check_finite(const std::string& what) const {
  for (const auto& b : blocks_) {
    if (!values_.segment(b.offset, b.size()).allFinite()) {
      throw Error("non-finite " + what + " in block " + b.name);
    }
  }
}

}  // namespace trajverb::nn
