#include "dloop/ids.hpp"

#include <array>
#include <cctype>

namespace dloop {

RandomIdSource::RandomIdSource() : rng_(std::random_device{}()) {}

RandomIdSource::RandomIdSource(std::uint64_t seed) : rng_(seed) {}

std::string RandomIdSource::next() {
  std::lock_guard lock(mutex_);
  const auto hi = rng_();
  const auto lo = rng_();
  return format_uuid_v4(hi, lo);
}

std::string format_uuid_v4(std::uint64_t hi, std::uint64_t lo) {
  hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
  lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;

  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(36);
  auto emit = [&](std::uint64_t word, int nibbles_from, int nibbles_to) {
    for (int i = nibbles_from; i < nibbles_to; ++i) {
      out.push_back(kHex[(word >> (60 - 4 * i)) & 0xF]);
    }
  };
  emit(hi, 0, 8);
  out.push_back('-');
  emit(hi, 8, 12);
  out.push_back('-');
  emit(hi, 12, 16);
  out.push_back('-');
  emit(lo, 0, 4);
  out.push_back('-');
  emit(lo, 4, 16);
  return out;
}

bool is_uuid_v4(std::string_view text) {
  if (text.size() != 36) return false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (c != '-') return false;
    } else if (!std::isxdigit(static_cast<unsigned char>(c)) ||
               std::isupper(static_cast<unsigned char>(c))) {
      return false;
    }
  }
  if (text[14] != '4') return false;
  const char variant = text[19];
  return variant == '8' || variant == '9' || variant == 'a' || variant == 'b';
}

}  // namespace dloop
