#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "simplex_uq/covariance.hpp"
#include "simplex_uq/random.hpp"
#include "simplex_uq/simplex.hpp"
#include "simplex_uq/training.hpp"
#include "simplex_uq/types.hpp"

namespace simplex_uq {

enum class OperatorModel { kFixed, kStochastic };

std::string_view model_name(OperatorModel model);
OperatorModel parse_model(std::string_view name);

/// A new observation together with the trained mean operator A0, its
/// per-column scaling factors r and the noise precision C = Sigma^{-1}.
/// The normal matrix A0^T C A0 and A0^T C s are cached so that misfits cost
/// O(M^2) instead of O(T^2).
class InversionProblem {
 public:
  InversionProblem(Vector observation, Matrix mean_operator, Vector r, Matrix precision,
                   OperatorModel model);

  static InversionProblem from_training(const Vector& observation, const OperatorEstimate& op,
                                        const CovarianceEstimate& cov, OperatorModel model);

  const Vector& observation() const { return observation_; }
  const Matrix& mean_operator() const { return mean_operator_; }
  const Vector& r() const { return r_; }
  const Matrix& precision() const { return precision_; }
  OperatorModel model() const { return model_; }
  Eigen::Index endmembers() const { return mean_operator_.cols(); }
  Eigen::Index observation_length() const { return mean_operator_.rows(); }

  const Matrix& normal_matrix() const { return normal_; }
  const Vector& projected_observation() const { return projected_; }

  /// (s - A0 m)^T C (s - A0 m).
  double misfit(const Vector& m) const;

  InversionProblem with_model(OperatorModel model) const;
  InversionProblem with_scaling_factors(Vector r) const;

 private:
  Vector observation_;
  Matrix mean_operator_;
  Vector r_;
  Matrix precision_;
  OperatorModel model_;
  Matrix normal_;
  Vector projected_;
  double energy_ = 0.0;
};

struct SimplexQpResult {
  Vector solution;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Minimizes 0.5 x^T H x - c^T x over the unit simplex with a primal
/// active-set method. H must be symmetric positive definite
/// (NonUniqueSolutionError otherwise).
SimplexQpResult solve_simplex_qp(const Matrix& hessian, const Vector& linear);

/// Largest violation of the simplex KKT conditions at x: spread of the
/// gradient over the support plus any negative multiplier on the zero set.
double simplex_kkt_residual(const Matrix& hessian, const Vector& linear, const Vector& x);

/// MAP of the fixed-operator posterior: argmin of the C-weighted misfit on the simplex.
Composition map_fixed_operator(const InversionProblem& p);

/// Mode of the stochastic-operator marginal posterior, found by sequential
/// quadratic steps with backtracking, started at the fixed-operator MAP.
Composition map_stochastic_operator(const InversionProblem& p);

/// Operator-uncertainty inflation b(m) = 1 + sum m_j^2 r_j and its bound 1 + max r_j.
struct UncertaintyFactor {
  double b = 1.0;
  double b_max = 1.0;
};
UncertaintyFactor uncertainty_factor(const Vector& m, const Vector& r);

/// -(T/2) log b(m) - misfit(m) / (2 b(m)); -inf outside the simplex.
double log_marginal_posterior(const Vector& m, const InversionProblem& p);
/// -misfit(m) / 2; -inf outside the simplex.
double log_fixed_posterior(const Vector& m, const InversionProblem& p);
/// Dispatches on p.model().
double log_posterior(const Vector& m, const InversionProblem& p);

/// Factor L with L L^T equal to the proposal covariance (A0^T C A0)^{-1}
/// conditioned on a zero coordinate sum. Steps L xi therefore stay on the
/// plane of the simplex.
Matrix proposal_factor(const InversionProblem& p);

struct Proposal {
  Vector candidate;
  int attempts = 1;
  bool resampled() const { return attempts > 1; }
};

/// Maximum consecutive out-of-simplex draws before giving up.
inline constexpr int kMaxProposalAttempts = 10000;

/// m + scale * L xi, redrawn until inside the simplex. Throws StepScaleError
/// after kMaxProposalAttempts misses.
Proposal propose(const Vector& m, const Matrix& factor, double scale, Rng& rng);

/// Monte Carlo estimate of the proposal mass inside the simplex from m,
/// smoothed as (hits + 1) / (samples + 2).
double proposal_simplex_mass(const Vector& m, const Matrix& factor, double scale,
                             std::size_t samples, Rng& rng);

/// Metropolis-Hastings acceptance probability for m -> m_cand under the
/// problem's model, multiplied by the normalization ratio Z(m)/Z(m_cand).
double acceptance_ratio(const Vector& m, const Vector& m_cand, const InversionProblem& p,
                        double z_ratio = 1.0);

struct McmcConfig {
  std::size_t chain_length = 50000;  // total steps including burn-in
  std::size_t burn_in = 10000;
  std::size_t thinning = 10;
  double scale = 1.0;
  bool adapt_scale = true;
  double target_acceptance = 0.3;
  /// Jump length above which Z(m)/Z(m') is re-estimated. Negative: half the
  /// mean proposal step measured in the second half of burn-in.
  double z_threshold = -1.0;
  std::size_t z_mc_samples = 256;
  bool z_correction = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChainMeta {
  std::size_t burn_in = 0;
  std::size_t thinning = 1;
  std::uint64_t seed = 0;
  std::size_t z_reeval_count = 0;
  std::size_t resampled_proposals = 0;
  double final_scale = 0.0;
  double z_threshold = 0.0;
};

struct PosteriorEnsemble {
  Matrix draws;  // M x n, one composition per column
  Vector log_densities;
  double acceptance_rate = 0.0;
  Vector mean;
  Matrix covariance;
  Vector map_draw;
  ChainMeta meta;
  std::vector<std::string> warnings;

  Eigen::Index size() const { return draws.cols(); }
};

/// Runs the chain from the fixed-operator MAP; scale adapts toward the target
/// acceptance in the first half of burn-in and is frozen afterwards.
PosteriorEnsemble mh_sample(const InversionProblem& p, const McmcConfig& config);

struct EnsembleSummary {
  Vector mean;
  Matrix covariance;  // unbiased
  Vector map_draw;
};

EnsembleSummary summarize(const Matrix& draws, const Vector& log_densities);

/// chi-square(2) quantile at `level`.
double chi_square2_quantile(double level);

/// 2D confidence ellipse of coordinates (first, second) from a mean and covariance.
struct ConfidenceEllipse {
  Eigen::Index first = 0;
  Eigen::Index second = 1;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double level = 0.95;
  double quantile = 0.0;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double angle = 0.0;  // radians, major axis from the first coordinate axis

  /// Mahalanobis test; for degenerate covariances points off the support are excluded.
  bool contains(const Vector& m) const;
};

ConfidenceEllipse confidence_ellipse(const Vector& mean, const Matrix& covariance,
                                     Eigen::Index first, Eigen::Index second, double level);

/// Ellipses for every coordinate pair (i < j).
std::vector<ConfidenceEllipse> pairwise_ellipses(const Vector& mean, const Matrix& covariance,
                                                 double level);

}  // namespace simplex_uq
