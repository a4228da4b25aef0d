#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace bestscore {

// SplitMix64 step; used to expand seeds and to derive independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

// Mixes a base seed with two stream coordinates (e.g. example hash and round
// index) into a new seed. Distinct coordinates give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// FNV-1a; stable across platforms and standard library versions, unlike
// std::hash.
std::uint64_t stable_hash(std::string_view text);

// xoshiro256** generator. Cheap to construct, so a fresh stream can be
// created per (example, round) pair.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Log of a Gamma(shape, 1) variate. Working in log space keeps shapes far
  // below one usable: their variates underflow a double routinely.
  double log_gamma_variate(double shape);

 private:
  std::uint64_t s_[4];
};

}  // namespace bestscore
