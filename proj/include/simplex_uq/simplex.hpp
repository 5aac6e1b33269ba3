#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "simplex_uq/random.hpp"
#include "simplex_uq/types.hpp"

namespace simplex_uq {

/// Absolute tolerance on the coordinate sum of a composition.
inline constexpr double kSimplexSumTolerance = 1e-9;
/// Negative entries at or above this value are rounding noise and are clamped.
inline constexpr double kNegativeClamp = -1e-12;

/// A point on the unit simplex: nonnegative fractions summing to one.
class Composition {
 public:
  const Vector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }

 private:
  friend Composition validate_composition(const Vector& v, double tolerance);
  explicit Composition(Vector v) : values_(std::move(v)) {}
  Vector values_;
};

/// Accepts `v` when every entry is nonnegative (entries in [-1e-12, 0) are
/// clamped to zero) and |sum - 1| <= tolerance; the sum is then renormalized
/// to exactly one. Throws ValidationError naming the offending index
/// (-1 for a bad sum).
Composition validate_composition(const Vector& v, double tolerance = kSimplexSumTolerance);

/// True when `v` is on the simplex within `tolerance` (no clamping).
bool in_simplex(const Vector& v, double tolerance = kSimplexSumTolerance);

enum class DesignKind {
  kRepeatedPure,
  kRepeatedBinary,
  kMultinomial,
  kDoubleMultinomialWithReplacement,
  kDoubleMultinomialWithoutReplacement,
  kUniformSimplex,
  kPseudoUniform,
};

/// Short stable names used by the CLI and in reports
/// (pure, binary, multinomial, dmult-replace, dmult-noreplace, uniform, pseudo-uniform).
std::string_view design_name(DesignKind kind);
DesignKind parse_design(std::string_view name);

/// How training compositions are chosen. Repeated designs cycle through
/// `unique_compositions()` fixed columns `repetitions` times.
struct MixtureDesign {
  DesignKind kind = DesignKind::kMultinomial;
  int endmembers = 2;
  int repetitions = 1;

  bool is_repeated() const {
    return kind == DesignKind::kRepeatedPure || kind == DesignKind::kRepeatedBinary;
  }
  bool has_closed_form_moments() const;
  int unique_compositions() const { return endmembers; }
  /// Throws ParameterError on M < 2, K < 1, or M < 3 for dmult-noreplace.
  void validate() const;
};

/// Second moments of an exchangeable composition: sigma = E[U1^2], beta = E[U1 U2].
struct MomentPair {
  double sigma = 0.0;
  double beta = 0.0;
  double alpha() const { return sigma - beta; }
};

struct MomentEstimate {
  MomentPair moments;
  double sigma_se = 0.0;
  double beta_se = 0.0;
  std::size_t samples = 0;
};

/// One composition from the design's law. For repeated designs the result is
/// column `draw_index % C` of the unique-composition matrix and `rng` is untouched.
Vector sample_composition(const MixtureDesign& design, Rng& rng, std::size_t draw_index = 0);

/// M x n matrix of compositions, column i drawn with draw_index i.
Matrix sample_compositions(const MixtureDesign& design, std::size_t n, Rng& rng);

/// Closed-form (E[U1^2], E[U1 U2]) for multinomial, both double-multinomials
/// and the uniform simplex. Other designs throw UnsupportedClosedFormError.
MomentPair exact_moments(const MixtureDesign& design);

/// Monte Carlo moments averaged over all coordinates and ordered pairs, with
/// standard errors. Requires n_samples >= 1000. A seed is drawn from `rng` and
/// the work is split into fixed chunks, so the result does not depend on `threads`.
MomentEstimate numeric_moments(const MixtureDesign& design, std::size_t n_samples, Rng& rng,
                               int threads = 1);

/// Corr(U1, U2) = (beta - 1/M^2) / (sigma - 1/M^2).
double pairwise_correlation(const MomentPair& moments, int endmembers);
double pairwise_correlation(const MixtureDesign& design);

/// Adjacent-pair binary mixtures with the last endmember pure (M x M, invertible).
Matrix binary_design_matrix(int endmembers);

/// Unique columns M0 of a repeated design (identity or the binary matrix).
Matrix unique_design_matrix(const MixtureDesign& design);

}  // namespace simplex_uq
