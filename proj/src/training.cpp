#include "simplex_uq/training.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "simplex_uq/error.hpp"

namespace simplex_uq {

void validate_training_set(const TrainingSet& ts, double tolerance) {
  if (ts.compositions.cols() != ts.observations.cols()) {
    std::ostringstream msg;
    msg << "training set has " << ts.compositions.cols() << " compositions but "
        << ts.observations.cols() << " observations";
    throw ShapeError(msg.str());
  }
  if (ts.endmembers() < 1 || ts.samples() < 1 || ts.observation_length() < 1) {
    throw ShapeError("training set is empty");
  }
  for (Eigen::Index i = 0; i < ts.samples(); ++i) {
    try {
      validate_composition(ts.compositions.col(i), tolerance);
    } catch (const ValidationError& e) {
      throw ValidationError("training sample " + std::to_string(i) + ": " + e.what(), e.index());
    }
  }
}

GramInverse invert_gram(const Matrix& compositions) {
  const Eigen::Index m = compositions.rows();
  if (compositions.cols() < m) {
    std::ostringstream msg;
    msg << "only " << compositions.cols() << " training samples for " << m
        << " endmembers; the Gram matrix is singular, more training samples are required";
    throw RankDeficiencyError(msg.str(), std::numeric_limits<double>::infinity());
  }
  const Matrix gram = compositions * compositions.transpose();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxGramCondition)) {
    std::ostringstream msg;
    msg << "Gram matrix of training compositions is rank deficient (condition number " << cond
        << "); more training samples are required";
    throw RankDeficiencyError(msg.str(), cond);
  }
  const Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw RankDeficiencyError("Cholesky factorization of the Gram matrix failed", cond);
  }
  return {llt.solve(Matrix::Identity(m, m)), cond};
}

OperatorEstimate estimate_operator(const TrainingSet& ts) {
  if (ts.compositions.cols() != ts.observations.cols()) {
    throw ShapeError("compositions and observations disagree on the sample count");
  }
  GramInverse gi = invert_gram(ts.compositions);
  OperatorEstimate out;
  out.b_matrix = ts.compositions.transpose() * gi.inverse;
  out.a_tilde = ts.observations * out.b_matrix;
  out.r = gi.inverse.diagonal();
  out.gram_condition = gi.condition_number;
  return out;
}

Vector empirical_scaling_factors(const Matrix& compositions) {
  return invert_gram(compositions).inverse.diagonal();
}

double summed_scaling_factor(const Matrix& compositions) {
  return invert_gram(compositions).inverse.trace();
}

double analytic_scaling_factor(const MixtureDesign& design, std::size_t samples) {
  design.validate();
  if (samples < 1) throw ParameterError("scaling factor needs N >= 1");
  const double m = design.endmembers;
  const double n = static_cast<double>(samples);
  switch (design.kind) {
    case DesignKind::kRepeatedPure:
    case DesignKind::kMultinomial:
      return m / n;
    case DesignKind::kRepeatedBinary:
      return m * (4.0 * m - 3.0) / n;
    case DesignKind::kDoubleMultinomialWithReplacement:
      return (2.0 * m - 1.0) / n;
    case DesignKind::kDoubleMultinomialWithoutReplacement:
      return (2.0 * m + m / (m - 2.0)) / n;
    case DesignKind::kUniformSimplex:
      return m * m / n;
    case DesignKind::kPseudoUniform:
      break;
  }
  throw UnsupportedClosedFormError(
      "pseudo-uniform design has no closed-form scaling factor; estimate moments numerically");
}

Vector analytic_scaling_factors(const MixtureDesign& design, std::size_t samples) {
  const double worst = analytic_scaling_factor(design, samples);
  const int m = design.endmembers;
  if (design.kind != DesignKind::kRepeatedBinary) return Vector::Constant(m, worst);
  const double k = static_cast<double>(samples) / m;
  Vector out(m);
  for (int i = 0; i < m; ++i) out[i] = (4.0 * (m - (i + 1)) + 1.0) / k;
  return out;
}

double scaling_factor_from_moments(const MomentPair& moments, int endmembers,
                                   std::size_t samples) {
  const double alpha = moments.alpha();
  const double m = endmembers;
  const double denom = alpha + m * moments.beta;
  if (!(alpha > 0.0) || !(denom > 0.0)) {
    throw DegenerateDesignError("degenerate design moments: alpha = " + std::to_string(alpha));
  }
  return (alpha + (m - 1.0) * moments.beta) / (static_cast<double>(samples) * alpha * denom);
}

Vector gamma_ratio(std::span<const Matrix> replicated_estimates, const Vector& noise_variance,
                   const Vector& r, std::span<const std::size_t> indices) {
  const std::size_t reps = replicated_estimates.size();
  if (reps < 2) {
    throw VarianceUndefinedError("gamma ratio needs at least 2 replicated estimates");
  }
  if (indices.empty()) throw ParameterError("gamma ratio needs a nonempty index set");
  const Matrix& first = replicated_estimates.front();
  const Eigen::Index t = first.rows();
  const Eigen::Index m = first.cols();
  if (noise_variance.size() != t || r.size() != m) {
    throw ShapeError("gamma ratio: noise variance or scaling factors do not match the operator");
  }
  Matrix mean = Matrix::Zero(t, m);
  for (const auto& a : replicated_estimates) mean += a;
  mean /= static_cast<double>(reps);
  Matrix var = Matrix::Zero(t, m);
  for (const auto& a : replicated_estimates) var += (a - mean).cwiseAbs2();
  var /= static_cast<double>(reps - 1);

  Vector out = Vector::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t idx : indices) {
      const auto tt = static_cast<Eigen::Index>(idx);
      if (tt >= t) throw ShapeError("gamma ratio index out of range");
      acc += var(tt, j) / (r[j] * noise_variance[tt]);
    }
    out[j] = acc / static_cast<double>(indices.size());
  }
  return out;
}

}  // namespace simplex_uq
