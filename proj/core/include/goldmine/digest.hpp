#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace goldmine {

/// Incremental 64-bit FNV-1a. Used for dataset/config/weight fingerprints,
/// not for anything security related.
class Digest {
 public:
  Digest& update(std::string_view bytes);
  Digest& update(std::span<const double> values);
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string digest_hex(std::string_view bytes);
std::string digest_hex(std::span<const double> values);

}  // namespace goldmine
