#include "goldmine/digest.hpp"

#include <bit>
#include <cstdio>

namespace goldmine {

Digest& Digest::update(std::string_view bytes) {
  for (unsigned char c : bytes) {
    state_ ^= c;
    state_ *= 0x100000001b3ULL;
  }
  return *this;
}

Digest& Digest::update(std::span<const double> values) {
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      state_ ^= (bits >> (8 * i)) & 0xffU;
      state_ *= 0x100000001b3ULL;
    }
  }
  return *this;
}

std::string Digest::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

std::string digest_hex(std::string_view bytes) { return Digest{}.update(bytes).hex(); }

std::string digest_hex(std::span<const double> values) { return Digest{}.update(values).hex(); }

}  // namespace goldmine
