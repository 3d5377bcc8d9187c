#pragma once

#include "msl/linalg.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace msl {

/// Seedable source of standard normal draws.
///
/// Draws come from std::mt19937_64 fed through std::normal_distribution
/// (libstdc++ implements the Marsaglia polar method). Streams are
/// reproducible for a given standard library, not across implementations.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return dist_(engine_); }

  /// rows x cols matrix of i.i.d. N(0, stddev^2), filled column by column.
  Matrix matrix(Index rows, Index cols, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

/// Independent per-role seed: splitmix64 finalizer over base seed and an
/// FNV-1a hash of the role tag ("truth", "operator", "init", ...).
std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view role);

}  // namespace msl
