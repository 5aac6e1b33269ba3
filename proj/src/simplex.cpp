#include "simplex_uq/simplex.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "simplex_uq/error.hpp"
#include "simplex_uq/kernels.hpp"

namespace simplex_uq {

namespace {

constexpr std::array<std::pair<DesignKind, std::string_view>, 7> kDesignNames{{
    {DesignKind::kRepeatedPure, "pure"},
    {DesignKind::kRepeatedBinary, "binary"},
    {DesignKind::kMultinomial, "multinomial"},
    {DesignKind::kDoubleMultinomialWithReplacement, "dmult-replace"},
    {DesignKind::kDoubleMultinomialWithoutReplacement, "dmult-noreplace"},
    {DesignKind::kUniformSimplex, "uniform"},
    {DesignKind::kPseudoUniform, "pseudo-uniform"},
}};

}  // namespace

Composition validate_composition(const Vector& v, double tolerance) {
  Vector out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw ValidationError("composition entry " + std::to_string(i) + " is not finite", i);
    }
    if (out[i] < 0.0) {
      if (out[i] >= kNegativeClamp) {
        out[i] = 0.0;
      } else {
        std::ostringstream msg;
        msg << "composition entry " << i << " is negative (" << out[i] << ")";
        throw ValidationError(msg.str(), i);
      }
    }
  }
  const double sum = out.sum();
  if (out.size() == 0 || std::abs(sum - 1.0) > tolerance) {
    std::ostringstream msg;
    msg << "composition sums to " << sum << ", expected 1 within " << tolerance;
    throw ValidationError(msg.str(), -1);
  }
  out /= sum;
  return Composition(std::move(out));
}

bool in_simplex(const Vector& v, double tolerance) {
  if (v.size() == 0) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) return false;
  }
  return std::abs(v.sum() - 1.0) <= tolerance;
}

std::string_view design_name(DesignKind kind) {
  for (const auto& [k, name] : kDesignNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

DesignKind parse_design(std::string_view name) {
  for (const auto& [k, n] : kDesignNames) {
    if (n == name) return k;
  }
  throw ParameterError("unknown design '" + std::string(name) +
                       "' (expected pure, binary, multinomial, dmult-replace, dmult-noreplace, "
                       "uniform or pseudo-uniform)");
}

bool MixtureDesign::has_closed_form_moments() const {
  switch (kind) {
    case DesignKind::kMultinomial:
    case DesignKind::kDoubleMultinomialWithReplacement:
    case DesignKind::kDoubleMultinomialWithoutReplacement:
    case DesignKind::kUniformSimplex:
      return true;
    default:
      return false;
  }
}

void MixtureDesign::validate() const {
  if (endmembers < 2) {
    throw ParameterError("design " + std::string(design_name(kind)) +
                         " needs at least 2 endmembers, got " + std::to_string(endmembers));
  }
  if (kind == DesignKind::kDoubleMultinomialWithoutReplacement && endmembers < 3) {
    throw ParameterError("dmult-noreplace needs at least 3 endmembers (factor M/(M-2))");
  }
  if (is_repeated() && repetitions < 1) {
    throw ParameterError("repeated designs need at least one repetition");
  }
}

Vector sample_composition(const MixtureDesign& design, Rng& rng, std::size_t draw_index) {
  design.validate();
  const int m = design.endmembers;
  Vector out = Vector::Zero(m);
  switch (design.kind) {
    case DesignKind::kRepeatedPure:
      out[static_cast<Eigen::Index>(draw_index % m)] = 1.0;
      break;
    case DesignKind::kRepeatedBinary: {
      const auto col = static_cast<Eigen::Index>(draw_index % m);
      if (col == m - 1) {
        out[col] = 1.0;
      } else {
        out[col] = 0.5;
        out[col + 1] = 0.5;
      }
      break;
    }
    case DesignKind::kMultinomial:
      out[static_cast<Eigen::Index>(rng.index(m))] = 1.0;
      break;
    case DesignKind::kDoubleMultinomialWithReplacement: {
      const auto k = static_cast<Eigen::Index>(rng.index(m));
      const auto l = static_cast<Eigen::Index>(rng.index(m));
      out[k] += 0.5;
      out[l] += 0.5;
      break;
    }
    case DesignKind::kDoubleMultinomialWithoutReplacement: {
      const auto k = static_cast<Eigen::Index>(rng.index(m));
      auto l = static_cast<Eigen::Index>(rng.index(m - 1));
      if (l >= k) ++l;
      out[k] = 0.5;
      out[l] = 0.5;
      break;
    }
    case DesignKind::kUniformSimplex: {
      for (int i = 0; i < m; ++i) out[i] = rng.exponential();
      out /= out.sum();
      break;
    }
    case DesignKind::kPseudoUniform: {
      for (int i = 0; i < m; ++i) out[i] = rng.uniform();
      const double sum = out.sum();
      if (sum > 0.0) {
        out /= sum;
      } else {
        out.setConstant(1.0 / m);
      }
      break;
    }
  }
  return out;
}

Matrix sample_compositions(const MixtureDesign& design, std::size_t n, Rng& rng) {
  design.validate();
  Matrix out(design.endmembers, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out.col(static_cast<Eigen::Index>(i)) = sample_composition(design, rng, i);
  }
  return out;
}

MomentPair exact_moments(const MixtureDesign& design) {
  design.validate();
  const double m = design.endmembers;
  switch (design.kind) {
    case DesignKind::kMultinomial:
      return {1.0 / m, 0.0};
    case DesignKind::kDoubleMultinomialWithReplacement:
      return {(m + 1.0) / (2.0 * m * m), 1.0 / (2.0 * m * m)};
    case DesignKind::kDoubleMultinomialWithoutReplacement:
      return {1.0 / (2.0 * m), 1.0 / (2.0 * m * (m - 1.0))};
    case DesignKind::kUniformSimplex:
      return {2.0 / (m * (m + 1.0)), 1.0 / (m * (m + 1.0))};
    default:
      throw UnsupportedClosedFormError("no closed-form moments for design " +
                                       std::string(design_name(design.kind)) +
                                       "; use numeric_moments");
  }
}

MomentEstimate numeric_moments(const MixtureDesign& design, std::size_t n_samples, Rng& rng,
                               int threads) {
  design.validate();
  if (n_samples < 1000) {
    throw ParameterError("numeric_moments needs at least 1000 samples");
  }
  const std::uint64_t seed = rng.engine()();
  const MomentAccumulator acc = threads > 1
                                    ? accumulate_moments_parallel(design, n_samples, seed, threads)
                                    : accumulate_moments_serial(design, n_samples, seed);
  return acc.estimate();
}

double pairwise_correlation(const MomentPair& moments, int endmembers) {
  if (endmembers < 2) throw ParameterError("correlation needs at least 2 endmembers");
  const double mu2 = 1.0 / (static_cast<double>(endmembers) * endmembers);
  const double var = moments.sigma - mu2;
  if (!(var > 1e-15)) {
    throw UndefinedCorrelationError(
        "coordinate variance is zero (deterministic barycentric composition); correlation "
        "undefined");
  }
  return (moments.beta - mu2) / var;
}

double pairwise_correlation(const MixtureDesign& design) {
  return pairwise_correlation(exact_moments(design), design.endmembers);
}

Matrix binary_design_matrix(int endmembers) {
  if (endmembers < 2) {
    throw ParameterError("binary design matrix needs M >= 2, got " + std::to_string(endmembers));
  }
  const Eigen::Index m = endmembers;
  Matrix out = Matrix::Zero(m, m);
  for (Eigen::Index j = 0; j + 1 < m; ++j) {
    out(j, j) = 0.5;
    out(j + 1, j) = 0.5;
  }
  out(m - 1, m - 1) = 1.0;
  return out;
}

Matrix unique_design_matrix(const MixtureDesign& design) {
  design.validate();
  switch (design.kind) {
    case DesignKind::kRepeatedPure:
      return Matrix::Identity(design.endmembers, design.endmembers);
    case DesignKind::kRepeatedBinary:
      return binary_design_matrix(design.endmembers);
    default:
      throw ParameterError("design " + std::string(design_name(design.kind)) +
                           " has no fixed unique-composition matrix");
  }
}

}  // namespace simplex_uq
