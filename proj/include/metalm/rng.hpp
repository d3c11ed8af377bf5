// Copyright (c) 2026 The metalm authors
// SPDX-License-Identifier: Apache-2.0
//
// Splittable deterministic RNG streams. A stream is keyed by
// (seed, purpose, a, b); the same key always yields the same sequence, on any
// platform, so experiments replay bit-for-bit. No libstdc++ distributions
// (their output is implementation-defined).

#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace metalm {

class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::string_view purpose, std::uint64_t a = 0,
            std::uint64_t b = 0) {
    std::uint64_t s = mix(seed ^ 0x9e3779b97f4a7c15ull);
    for (char ch : purpose) s = mix(s ^ static_cast<std::uint64_t>(ch));
    s = mix(s ^ a);
    s = mix(s ^ b);
    state_ = s;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // [0, 1), 53-bit resolution
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Uniform in [0, n), unbiased via rejection.
  std::int64_t next_below(std::int64_t n) {
    if (n <= 0) throw std::invalid_argument("StreamRng::next_below: n <= 0");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0ull - un) % un;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return static_cast<std::int64_t>(r % un);
    }
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      const std::int64_t j = next_below(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  // k distinct values from [0, n), in partial-Fisher-Yates order.
  std::vector<std::int64_t> sample_distinct(std::int64_t n, std::int64_t k) {
    if (k > n) throw std::invalid_argument("sample_distinct: k > n");
    std::vector<std::int64_t> pool(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < k; ++i) {
      const std::int64_t j = i + next_below(n - i);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      out.push_back(pool[static_cast<std::size_t>(i)]);
    }
    return out;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace metalm
