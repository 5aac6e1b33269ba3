#pragma once

#include <cstdint>
#include <random>

namespace simplex_uq {

/// Mixes a master seed with stream counters into an independent 64-bit seed
/// (splitmix64 finalizer applied per counter). Used to give every trial,
/// replication and chunk its own stream so results do not depend on the
/// order in which they are executed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Caller-owned random stream. Not thread safe; give each worker its own.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  double exponential() { return exponential_(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exponential_{1.0};
};

}  // namespace simplex_uq
