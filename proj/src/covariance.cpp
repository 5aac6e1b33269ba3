#include "simplex_uq/covariance.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "simplex_uq/error.hpp"
#include "simplex_uq/kernels.hpp"

namespace simplex_uq {

namespace {

constexpr double kMaxCovarianceCondition = 1e12;

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + " must be square");
}

}  // namespace

std::string mode_label(const CovarianceEstimate& cov) {
  switch (cov.mode) {
    case CovarianceMode::kMle:
      return "mle";
    case CovarianceMode::kSample:
      return "sample";
    case CovarianceMode::kDiagonal:
      return "diag";
    case CovarianceMode::kBanded:
      return "band:" + std::to_string(cov.band_width);
  }
  return "unknown";
}

CovarianceModeSpec parse_cov_mode(const std::string& text) {
  if (text == "mle") return {CovarianceMode::kMle, 0};
  if (text == "sample") return {CovarianceMode::kSample, 0};
  if (text == "diag") return {CovarianceMode::kDiagonal, 0};
  if (text.rfind("band:", 0) == 0) {
    const std::string digits = text.substr(5);
    std::size_t used = 0;
    int k = -1;
    try {
      k = std::stoi(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == digits.size() && !digits.empty() && k >= 0) return {CovarianceMode::kBanded, k};
  }
  throw ParameterError("invalid covariance mode '" + text +
                       "' (expected mle, sample, diag or band:<K> with K >= 0)");
}

Matrix training_residuals(const TrainingSet& ts, const OperatorEstimate& op) {
  if (op.a_tilde.rows() != ts.observations.rows() || op.a_tilde.cols() != ts.compositions.rows() ||
      ts.compositions.cols() != ts.observations.cols()) {
    throw ShapeError("operator estimate does not match the training set dimensions");
  }
  return ts.observations - op.a_tilde * ts.compositions;
}

CovarianceEstimate covariance_from_residuals(const Matrix& residuals, CovarianceMode mode,
                                             int threads) {
  const auto n = static_cast<double>(residuals.cols());
  double divisor = n;
  if (mode == CovarianceMode::kSample) {
    if (residuals.cols() < 2) {
      throw VarianceUndefinedError("sample covariance needs at least 2 residuals");
    }
    divisor = n - 1.0;
  } else if (mode != CovarianceMode::kMle) {
    throw ParameterError("residual covariance mode must be mle or sample");
  }
  if (residuals.cols() < 1) throw VarianceUndefinedError("no residuals");
  CovarianceEstimate out;
  out.matrix = threads > 1 ? residual_covariance_parallel(residuals, divisor, threads)
                           : residual_covariance_serial(residuals, divisor);
  out.mode = mode;
  out.n_samples = static_cast<std::size_t>(residuals.cols());
  return out;
}

CovarianceEstimate mle_covariance(const TrainingSet& ts, const OperatorEstimate& op, int threads) {
  return covariance_from_residuals(training_residuals(ts, op), CovarianceMode::kMle, threads);
}

CovarianceEstimate sample_covariance(const TrainingSet& ts, const OperatorEstimate& op,
                                     int threads) {
  return covariance_from_residuals(training_residuals(ts, op), CovarianceMode::kSample, threads);
}

CovarianceEstimate estimate_covariance(const TrainingSet& ts, const OperatorEstimate& op,
                                       const CovarianceModeSpec& spec, int threads) {
  switch (spec.mode) {
    case CovarianceMode::kMle:
      return mle_covariance(ts, op, threads);
    case CovarianceMode::kSample:
      return sample_covariance(ts, op, threads);
    case CovarianceMode::kDiagonal:
      return diagonalize(mle_covariance(ts, op, threads));
    case CovarianceMode::kBanded:
      return band(sample_covariance(ts, op, threads), spec.band_width);
  }
  throw ParameterError("unknown covariance mode");
}

CovarianceEstimate diagonalize(const CovarianceEstimate& cov) {
  require_square(cov.matrix, "covariance");
  CovarianceEstimate out = cov;
  out.matrix = cov.matrix.diagonal().asDiagonal();
  out.mode = CovarianceMode::kDiagonal;
  out.band_width = 0;
  return out;
}

CovarianceEstimate band(const CovarianceEstimate& cov, int band_width) {
  require_square(cov.matrix, "covariance");
  if (band_width < 0) throw ParameterError("band width must be >= 0");
  CovarianceEstimate out = cov;
  const Eigen::Index t = cov.matrix.rows();
  for (Eigen::Index j = 0; j < t; ++j) {
    for (Eigen::Index i = 0; i < t; ++i) {
      if (std::abs(i - j) > band_width) out.matrix(i, j) = 0.0;
    }
  }
  out.mode = CovarianceMode::kBanded;
  out.band_width = band_width;
  return out;
}

double correlation_coefficient(const Matrix& cov, Eigen::Index i, Eigen::Index j) {
  require_square(cov, "covariance");
  if (i < 0 || j < 0 || i >= cov.rows() || j >= cov.rows()) {
    throw ShapeError("correlation index out of range");
  }
  const double vi = cov(i, i);
  const double vj = cov(j, j);
  if (!(vi > 0.0) || !(vj > 0.0)) {
    throw UndefinedCorrelationError("zero variance at index " + std::to_string(vi > 0.0 ? j : i));
  }
  return cov(i, j) / std::sqrt(vi * vj);
}

double correlation_coefficient(const CovarianceEstimate& cov, Eigen::Index i, Eigen::Index j) {
  return correlation_coefficient(cov.matrix, i, j);
}

double weighted_l2_distance(const Vector& a, const Vector& b, const Matrix& precision) {
  if (a.size() != b.size() || precision.rows() != a.size() || precision.cols() != a.size()) {
    throw ShapeError("weighted distance: vector and precision shapes disagree");
  }
  const Vector d = a - b;
  return d.dot(precision * d);
}

Matrix invert_covariance(const CovarianceEstimate& cov) {
  require_square(cov.matrix, "covariance");
  const Eigen::Index t = cov.matrix.rows();
  if (cov.mode == CovarianceMode::kDiagonal) {
    const Vector d = cov.matrix.diagonal();
    for (Eigen::Index i = 0; i < t; ++i) {
      if (!(d[i] > 0.0)) {
        throw SingularCovarianceError("diagonal covariance has a nonpositive entry at index " +
                                      std::to_string(i));
      }
    }
    return d.cwiseInverse().asDiagonal();
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.matrix, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCovarianceCondition) {
    std::ostringstream msg;
    msg << "covariance (" << mode_label(cov) << ", " << cov.n_samples << " samples, T = " << t
        << ") is rank deficient or not positive definite (eigenvalues in [" << lo << ", " << hi
        << "]); use a diagonal (--cov-mode diag) or banded covariance";
    throw SingularCovarianceError(msg.str());
  }
  const Eigen::LLT<Matrix> llt(cov.matrix);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("Cholesky factorization of the covariance failed; use --cov-mode diag");
  }
  Matrix inv = llt.solve(Matrix::Identity(t, t));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace simplex_uq
