#include "simplex_uq/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "simplex_uq/error.hpp"
#include "simplex_uq/random.hpp"
#include "simplex_uq/synth.hpp"
#include "simplex_uq/training.hpp"

namespace simplex_uq {

void MomentAccumulator::add(const Vector& m) {
  const double dim = static_cast<double>(m.size());
  const double sq = m.squaredNorm();
  const double total = m.sum();
  const double s = sq / dim;
  const double b = (total * total - sq) / (dim * (dim - 1.0));
  count += 1.0;
  sum_sigma += s;
  sumsq_sigma += s * s;
  sum_beta += b;
  sumsq_beta += b * b;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  count += other.count;
  sum_sigma += other.sum_sigma;
  sumsq_sigma += other.sumsq_sigma;
  sum_beta += other.sum_beta;
  sumsq_beta += other.sumsq_beta;
}

MomentEstimate MomentAccumulator::estimate() const {
  MomentEstimate out;
  out.samples = static_cast<std::size_t>(count);
  out.moments.sigma = sum_sigma / count;
  out.moments.beta = sum_beta / count;
  const auto se = [this](double sum, double sumsq) {
    const double mean = sum / count;
    const double var = std::max(0.0, (sumsq - count * mean * mean) / (count - 1.0));
    return std::sqrt(var / count);
  };
  out.sigma_se = se(sum_sigma, sumsq_sigma);
  out.beta_se = se(sum_beta, sumsq_beta);
  return out;
}

namespace {

MomentAccumulator moment_chunk(const MixtureDesign& design, std::size_t begin, std::size_t end,
                               std::uint64_t seed, std::size_t chunk) {
  Rng rng(derive_seed(seed, chunk));
  MomentAccumulator acc;
  for (std::size_t i = begin; i < end; ++i) acc.add(sample_composition(design, rng, i));
  return acc;
}

std::size_t chunk_count(std::size_t n) { return (n + kMomentChunk - 1) / kMomentChunk; }

// Random designs can leave an endmember unsampled at small N; such draws are
// redrawn, so estimates are conditional on a full-rank training set.
constexpr int kMaxCompositionDraws = 1000;

bool full_rank(const Matrix& compositions) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(compositions * compositions.transpose(),
                                                  Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  return top > 0.0 && eig.eigenvalues().minCoeff() > top / kMaxGramCondition;
}

Matrix full_rank_compositions(const ReplicationPlan& plan, Rng& rng) {
  for (int attempt = 0; attempt < kMaxCompositionDraws; ++attempt) {
    Matrix c = sample_compositions(plan.design, plan.samples, rng);
    if (full_rank(c)) return c;
  }
  throw RankDeficiencyError("no full-rank composition matrix in " +
                            std::to_string(kMaxCompositionDraws) + " draws of N=" +
                            std::to_string(plan.samples) + "; more training samples are required",
                            std::numeric_limits<double>::infinity());
}

ReplicatedEstimate one_replication(const ReplicationPlan& plan, const Matrix& fixed_compositions,
                                   std::size_t replication) {
  Rng rng(derive_seed(plan.seed, replication));
  Matrix compositions =
      plan.redraw_compositions ? full_rank_compositions(plan, rng) : fixed_compositions;
  TrainingSet ts = make_training_set_from_compositions(plan.true_operator, std::move(compositions),
                                                       plan.noise_sd, rng);
  OperatorEstimate op = estimate_operator(ts);
  return {std::move(op.a_tilde), std::move(op.r)};
}

Matrix fixed_compositions_for(const ReplicationPlan& plan) {
  if (plan.redraw_compositions) return {};
  Rng rng(derive_seed(plan.seed, ~std::uint64_t{0}));
  return full_rank_compositions(plan, rng);
}

}  // namespace

MomentAccumulator accumulate_moments_serial(const MixtureDesign& design, std::size_t n,
                                            std::uint64_t seed) {
  MomentAccumulator total;
  const std::size_t chunks = chunk_count(n);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kMomentChunk;
    total.merge(moment_chunk(design, begin, std::min(n, begin + kMomentChunk), seed, c));
  }
  return total;
}

MomentAccumulator accumulate_moments_parallel(const MixtureDesign& design, std::size_t n,
                                              std::uint64_t seed, int threads) {
  const std::size_t chunks = chunk_count(n);
  std::vector<MomentAccumulator> parts(chunks);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, threads))
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kMomentChunk;
    parts[c] = moment_chunk(design, begin, std::min(n, begin + kMomentChunk), seed,
                            static_cast<std::size_t>(c));
  }
  MomentAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

Matrix residual_covariance_serial(const Matrix& residuals, double divisor) {
  const Eigen::Index t = residuals.rows();
  Matrix out = Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < residuals.cols(); ++i) {
    const auto r = residuals.col(i);
    for (Eigen::Index b = 0; b < t; ++b) {
      for (Eigen::Index a = b; a < t; ++a) out(a, b) += r[a] * r[b];
    }
  }
  for (Eigen::Index b = 0; b < t; ++b) {
    for (Eigen::Index a = b; a < t; ++a) {
      out(a, b) /= divisor;
      out(b, a) = out(a, b);
    }
  }
  return out;
}

Matrix residual_covariance_parallel(const Matrix& residuals, double divisor, int threads) {
  const Eigen::Index t = residuals.rows();
  const Eigen::Index n = residuals.cols();
  Matrix out(t, t);
  // Row-major access to each index's residual series keeps dot products contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = residuals;
#pragma omp parallel for schedule(dynamic, 4) num_threads(std::max(1, threads))
  for (Eigen::Index a = 0; a < t; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += rows(a, i) * rows(b, i);
      out(a, b) = acc / divisor;
      out(b, a) = out(a, b);
    }
  }
  return out;
}

std::vector<ReplicatedEstimate> replicate_estimates_serial(const ReplicationPlan& plan) {
  const Matrix fixed = fixed_compositions_for(plan);
  std::vector<ReplicatedEstimate> out;
  out.reserve(plan.replications);
  for (std::size_t r = 0; r < plan.replications; ++r) out.push_back(one_replication(plan, fixed, r));
  return out;
}

std::vector<ReplicatedEstimate> replicate_estimates_parallel(const ReplicationPlan& plan,
                                                             int threads) {
  const Matrix fixed = fixed_compositions_for(plan);
  std::vector<ReplicatedEstimate> out(plan.replications);
  parallel_for_index(plan.replications, threads,
                     [&](std::size_t r) { out[r] = one_replication(plan, fixed, r); });
  return out;
}

void parallel_for_index(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  // Keep the error from the lowest failing index so reports do not depend on scheduling.
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace simplex_uq
