#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "simplex_uq/simplex.hpp"
#include "simplex_uq/types.hpp"

namespace simplex_uq {

/// Gram condition numbers above this are treated as rank deficient.
inline constexpr double kMaxGramCondition = 1e12;

/// Paired training data in column convention: compositions is M x N (each
/// column a composition), observations is T x N.
struct TrainingSet {
  Matrix compositions;
  Matrix observations;

  Eigen::Index endmembers() const { return compositions.rows(); }
  Eigen::Index samples() const { return compositions.cols(); }
  Eigen::Index observation_length() const { return observations.rows(); }
};

/// Checks shapes and that every composition column is on the simplex.
/// Throws ShapeError or ValidationError.
void validate_training_set(const TrainingSet& ts, double tolerance = kSimplexSumTolerance);

struct GramInverse {
  Matrix inverse;  // (M M^T)^{-1}
  double condition_number = 0.0;
};

/// Inverts M M^T by Cholesky after checking its spectral condition number.
/// Throws RankDeficiencyError when the Gram is singular or cond > 1e12.
GramInverse invert_gram(const Matrix& compositions);

/// Trained operator. `a_tilde` doubles as the mean operator A0 for inversion.
struct OperatorEstimate {
  Matrix a_tilde;   // T x M
  Matrix b_matrix;  // N x M, B = M^T (M M^T)^{-1}
  Vector r;         // empirical variance scaling factors diag((M M^T)^{-1})
  double gram_condition = 0.0;
};

/// Least-squares / MAP operator S M^T (M M^T)^{-1}.
OperatorEstimate estimate_operator(const TrainingSet& ts);

Vector empirical_scaling_factors(const Matrix& compositions);

/// trace((M M^T)^{-1}).
double summed_scaling_factor(const Matrix& compositions);

/// Closed-form worst-case factor per design for N training samples:
/// pure M/N, binary M(4M-3)/N, multinomial M/N, dmult-replace (2M-1)/N,
/// dmult-noreplace (2M + M/(M-2))/N, uniform M^2/N.
/// Pseudo-uniform throws UnsupportedClosedFormError.
double analytic_scaling_factor(const MixtureDesign& design, std::size_t samples);

/// Per-endmember closed forms. Identical entries except for repeated binary
/// mixtures, where r_i = (4(M-i)+1)/K with K = N/M.
Vector analytic_scaling_factors(const MixtureDesign& design, std::size_t samples);

/// r = (alpha + (M-1) beta) / (N alpha (alpha + M beta)).
double scaling_factor_from_moments(const MomentPair& moments, int endmembers, std::size_t samples);

/// Empirical-to-theoretical variance ratio per endmember over an index set:
/// the mean over t in `indices` of Var_t(a~_j) / (r_j Sigma_tt), using the
/// unbiased variance across replications.
Vector gamma_ratio(std::span<const Matrix> replicated_estimates, const Vector& noise_variance,
                   const Vector& r, std::span<const std::size_t> indices);

}  // namespace simplex_uq
