#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace trajverb {

/// Incremental SHA-256 used for content hashes of artifacts.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  Sha256& update(std::span<const double> values);
  /// Lowercase hex digest; the hasher cannot be updated afterwards.
  std::string hex();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace trajverb
