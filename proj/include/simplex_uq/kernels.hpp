#pragma once

// Data-parallel kernels. Every OpenMP kernel here has a serial reference
// next to it; the parallel versions split work into fixed, index-addressed
// units with their own random streams so their output matches the serial
// reference regardless of thread count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "simplex_uq/simplex.hpp"
#include "simplex_uq/types.hpp"

namespace simplex_uq {

/// Draws per random stream in the moment kernels.
inline constexpr std::size_t kMomentChunk = 1u << 14;

/// Running sums of the per-draw coordinate-averaged statistics
/// mean_i U_i^2 and mean_{i != j} U_i U_j.
struct MomentAccumulator {
  double count = 0.0;
  double sum_sigma = 0.0;
  double sumsq_sigma = 0.0;
  double sum_beta = 0.0;
  double sumsq_beta = 0.0;

  void add(const Vector& m);
  void merge(const MomentAccumulator& other);
  MomentEstimate estimate() const;
};

MomentAccumulator accumulate_moments_serial(const MixtureDesign& design, std::size_t n,
                                            std::uint64_t seed);
MomentAccumulator accumulate_moments_parallel(const MixtureDesign& design, std::size_t n,
                                              std::uint64_t seed, int threads);

/// (1/divisor) * sum_i r_i r_i^T over the columns of `residuals` (T x N).
Matrix residual_covariance_serial(const Matrix& residuals, double divisor);
Matrix residual_covariance_parallel(const Matrix& residuals, double divisor, int threads);

/// Inputs for replicated training: every replication draws fresh observation
/// noise (and fresh compositions when `redraw_compositions`) from
/// derive_seed(seed, replication).
struct ReplicationPlan {
  Matrix true_operator;  // T x M
  MixtureDesign design;
  std::size_t samples = 0;  // N
  Vector noise_sd;          // length T
  std::size_t replications = 0;
  bool redraw_compositions = true;
  std::uint64_t seed = 0;
};

struct ReplicatedEstimate {
  Matrix a_tilde;
  Vector r;
};

std::vector<ReplicatedEstimate> replicate_estimates_serial(const ReplicationPlan& plan);
std::vector<ReplicatedEstimate> replicate_estimates_parallel(const ReplicationPlan& plan,
                                                             int threads);

/// Runs body(i) for i in [0, n). threads <= 1 runs the plain loop in order.
/// The first exception thrown by any body is rethrown after the loop.
void parallel_for_index(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace simplex_uq
