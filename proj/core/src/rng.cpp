// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/rng.hpp"

#include <cmath>
#include <numbers>

#include "fusionforge/error.hpp"

namespace fusionforge {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::operator()() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGoldenGamma);
}

bool Rng::is_known_engine(std::string_view engine) {
  return engine == "splitmix64" || engine == "mt19937_64";
}

Rng::Rng(std::uint64_t seed, std::string_view engine)
    : seed_(seed), engine_name_(engine), engine_(SplitMix64(mix64(seed))) {
  if (engine == "mt19937_64") {
    engine_ = std::mt19937_64(seed);
  } else if (engine != "splitmix64") {
    throw ConfigError("unknown rng engine '" + std::string(engine) +
                      "' (expected splitmix64 or mt19937_64)");
  }
}

std::uint64_t Rng::next_u64() {
  return std::visit([](auto& e) -> std::uint64_t { return e(); }, engine_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("Rng::below: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n + 1) % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x <= limit) return x % n;
  }
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ValidationError("Rng::between: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next_u64());
  return lo + static_cast<std::int64_t>(below(span));
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(theta);
  has_spare_normal_ = true;
  return radius * std::cos(theta);
}

Rng Rng::derive(std::uint64_t stream) const {
  return Rng(mix64(seed_ ^ mix64(stream + kGoldenGamma)), engine_name_);
}

}  // namespace fusionforge
