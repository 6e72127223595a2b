#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <type_traits>

namespace earcount {

/// 64-bit FNV-1a; stable across runs and platforms.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= b[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  Fnv1a& add(T v) {
    return bytes(&v, sizeof v);
  }
  Fnv1a& add(std::string_view s) {
    add<std::uint64_t>(s.size());
    return bytes(s.data(), s.size());
  }
  template <typename T>
  Fnv1a& add_span(std::span<const T> s) {
    add<std::uint64_t>(s.size());
    return bytes(s.data(), s.size_bytes());
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// splitmix64 finaliser; decorrelates derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(base) ^ a) ^ b);
}

}  // namespace earcount
