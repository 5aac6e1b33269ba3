#pragma once

#include <cstddef>
#include <string>

#include "simplex_uq/training.hpp"
#include "simplex_uq/types.hpp"

namespace simplex_uq {

enum class CovarianceMode { kMle, kSample, kDiagonal, kBanded };

/// Noise covariance (T x T, squared signal units) with the regularization
/// that produced it. `band_width` is meaningful for kBanded only.
struct CovarianceEstimate {
  Matrix matrix;
  CovarianceMode mode = CovarianceMode::kMle;
  int band_width = 0;
  std::size_t n_samples = 0;
};

/// "mle", "sample", "diag" or "band:<K>".
std::string mode_label(const CovarianceEstimate& cov);

/// Parsed form of a --cov-mode value.
struct CovarianceModeSpec {
  CovarianceMode mode = CovarianceMode::kDiagonal;
  int band_width = 0;
};
CovarianceModeSpec parse_cov_mode(const std::string& text);

/// r_i = s_i - A~ m_i for every training sample (T x N).
Matrix training_residuals(const TrainingSet& ts, const OperatorEstimate& op);

/// (1/N) sum r_i r_i^T. `threads` > 1 uses the OpenMP kernel.
CovarianceEstimate mle_covariance(const TrainingSet& ts, const OperatorEstimate& op,
                                  int threads = 1);
/// Same sum divided by N - 1.
CovarianceEstimate sample_covariance(const TrainingSet& ts, const OperatorEstimate& op,
                                     int threads = 1);
/// Covariance of given zero-mean residual columns, mode kMle or kSample.
CovarianceEstimate covariance_from_residuals(const Matrix& residuals, CovarianceMode mode,
                                             int threads = 1);

/// Applies a --cov-mode choice: diag and band:K regularize the sample-style
/// estimate (MLE for diag, N-1 sample covariance for band).
CovarianceEstimate estimate_covariance(const TrainingSet& ts, const OperatorEstimate& op,
                                       const CovarianceModeSpec& spec, int threads = 1);

CovarianceEstimate diagonalize(const CovarianceEstimate& cov);

/// Keeps entry (i, j) iff |i - j| <= K.
CovarianceEstimate band(const CovarianceEstimate& cov, int band_width);

double correlation_coefficient(const CovarianceEstimate& cov, Eigen::Index i, Eigen::Index j);
double correlation_coefficient(const Matrix& cov, Eigen::Index i, Eigen::Index j);

/// (a - b)^T precision (a - b).
double weighted_l2_distance(const Vector& a, const Vector& b, const Matrix& precision);

/// Sigma^{-1}. Diagonal mode inverts entrywise; other modes must be symmetric
/// positive definite with condition number <= 1e12, otherwise
/// SingularCovarianceError.
Matrix invert_covariance(const CovarianceEstimate& cov);

}  // namespace simplex_uq
