// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fusionforge {

/// Counter-based generator: output i is splitmix64(key + i * golden gamma).
/// Streams can be derived without consuming state, so every random draw in
/// the library is addressable by (seed, stream id).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t operator()() noexcept;
  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Seedable random source with platform-independent distributions.
///
/// The raw engine is chosen by name ("splitmix64" is the default,
/// "mt19937_64" is also accepted). Distributions are implemented here
/// rather than through <random> because the standard distributions are not
/// specified bit-for-bit across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::string_view engine = "splitmix64");

  static bool is_known_engine(std::string_view engine);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent generator for a named sub-stream. Does not advance *this.
  Rng derive(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  const std::string& engine_name() const noexcept { return engine_name_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::string engine_name_;
  std::variant<SplitMix64, std::mt19937_64> engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Stateless 64-bit finalizer, exposed for deriving seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace fusionforge
