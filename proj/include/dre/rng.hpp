#pragma once

#include <cstdint>
#include <random>

#include "dre/types.hpp"

namespace dre {

/// Reproducible random stream. Engine: std::mt19937_64 (its output sequence is
/// fixed by the standard). Substreams are keyed by SplitMix64(seed, stream) and
/// doubles use the top 53 bits, so values agree across platforms.
class Rng {
 public:
  static constexpr const char* kName = "mt19937_64+splitmix64/v1";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent generator for a named substream of the same seed.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream); }

  double uniform01();
  /// rows x cols matrix, uniform on [0, 1), filled column by column.
  Matrix uniform(Index rows, Index cols);
  /// Standard normal via Box-Muller on uniform01().
  double normal();
  Matrix normal(Index rows, Index cols);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dre
