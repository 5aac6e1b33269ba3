#include "simplex_uq/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "simplex_uq/error.hpp"

namespace simplex_uq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNormalRankTolerance = 1e-12;

bool on_simplex(const Vector& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!(m[i] >= 0.0)) return false;
  }
  return std::abs(m.sum() - 1.0) <= kSimplexSumTolerance;
}

void require_full_rank(const Matrix& h) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > kNormalRankTolerance * hi)) {
    std::ostringstream msg;
    msg << "normal matrix A^T Sigma^-1 A is rank deficient (eigenvalues in [" << lo << ", " << hi
        << "]); the simplex-constrained MAP is not unique";
    throw NonUniqueSolutionError(msg.str());
  }
}

std::string describe(const Vector& m) {
  std::ostringstream out;
  out.precision(17);
  out << "[";
  for (Eigen::Index i = 0; i < m.size(); ++i) out << (i ? ", " : "") << m[i];
  out << "]";
  return out.str();
}

}  // namespace

std::string_view model_name(OperatorModel model) {
  return model == OperatorModel::kFixed ? "fixed" : "stochastic";
}

OperatorModel parse_model(std::string_view name) {
  if (name == "fixed") return OperatorModel::kFixed;
  if (name == "stochastic") return OperatorModel::kStochastic;
  throw ParameterError("unknown model '" + std::string(name) + "' (expected fixed or stochastic)");
}

InversionProblem::InversionProblem(Vector observation, Matrix mean_operator, Vector r,
                                   Matrix precision, OperatorModel model)
    : observation_(std::move(observation)),
      mean_operator_(std::move(mean_operator)),
      r_(std::move(r)),
      precision_(std::move(precision)),
      model_(model) {
  const Eigen::Index t = mean_operator_.rows();
  const Eigen::Index m = mean_operator_.cols();
  if (observation_.size() != t || precision_.rows() != t || precision_.cols() != t ||
      r_.size() != m) {
    std::ostringstream msg;
    msg << "inversion problem shapes disagree: operator " << t << "x" << m << ", observation "
        << observation_.size() << ", precision " << precision_.rows() << "x" << precision_.cols()
        << ", scaling factors " << r_.size();
    throw ShapeError(msg.str());
  }
  if (model_ == OperatorModel::kStochastic) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!(r_[j] > 0.0)) {
        throw ParameterError("stochastic-operator model needs every scaling factor > 0 (r[" +
                             std::to_string(j) + "] = " + std::to_string(r_[j]) + ")");
      }
    }
  }
  const Matrix ca = precision_ * mean_operator_;
  normal_ = mean_operator_.transpose() * ca;
  normal_ = 0.5 * (normal_ + normal_.transpose()).eval();
  projected_ = ca.transpose() * observation_;
  energy_ = observation_.dot(precision_ * observation_);
}

InversionProblem InversionProblem::from_training(const Vector& observation,
                                                 const OperatorEstimate& op,
                                                 const CovarianceEstimate& cov,
                                                 OperatorModel model) {
  return InversionProblem(observation, op.a_tilde, op.r, invert_covariance(cov), model);
}

double InversionProblem::misfit(const Vector& m) const {
  const double q = energy_ - 2.0 * projected_.dot(m) + m.dot(normal_ * m);
  return std::max(0.0, q);
}

InversionProblem InversionProblem::with_model(OperatorModel model) const {
  InversionProblem out = *this;
  out.model_ = model;
  return out;
}

InversionProblem InversionProblem::with_scaling_factors(Vector r) const {
  return InversionProblem(observation_, mean_operator_, std::move(r), precision_, model_);
}

double simplex_kkt_residual(const Matrix& hessian, const Vector& linear, const Vector& x) {
  const Vector grad = hessian * x - linear;
  double nu = 0.0;
  int support = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) {
      nu += grad[i];
      ++support;
    }
  }
  if (support == 0) return std::numeric_limits<double>::infinity();
  nu /= support;
  double residual = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double mu = grad[i] - nu;
    residual = std::max(residual, x[i] > 0.0 ? std::abs(mu) : std::max(0.0, -mu));
  }
  return residual;
}

SimplexQpResult solve_simplex_qp(const Matrix& hessian, const Vector& linear) {
  const Eigen::Index n = hessian.rows();
  if (hessian.cols() != n || linear.size() != n || n < 1) {
    throw ShapeError("simplex QP: Hessian and linear term shapes disagree");
  }
  if (n == 1) return {Vector::Ones(1), 0.0, 0};
  require_full_rank(hessian);

  Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
  std::vector<bool> active(static_cast<std::size_t>(n), false);
  const double scale = std::max({1.0, hessian.cwiseAbs().maxCoeff(), linear.cwiseAbs().maxCoeff()});
  const double step_tol = 1e-14;
  const double mult_tol = 1e-13 * scale;
  const int max_iter = 100 + 20 * static_cast<int>(n);

  // After an unblocked step the iterate already minimizes over the working set.
  bool at_subspace_min = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    const Vector grad = hessian * x - linear;

    // Equality-constrained step on the free set: [H_FF 1; 1^T 0][p; nu] = [-g_F; 0].
    Matrix kkt = Matrix::Zero(nf + 1, nf + 1);
    Vector rhs = Vector::Zero(nf + 1);
    for (Eigen::Index a = 0; a < nf; ++a) {
      for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = hessian(free[a], free[b]);
      kkt(a, nf) = 1.0;
      kkt(nf, a) = 1.0;
      rhs[a] = -grad[free[a]];
    }
    const Vector sol = kkt.fullPivLu().solve(rhs);
    Vector p = Vector::Zero(n);
    for (Eigen::Index a = 0; a < nf; ++a) p[free[a]] = sol[a];
    const double nu = sol[nf];

    if (at_subspace_min || p.cwiseAbs().maxCoeff() <= step_tol) {
      at_subspace_min = false;
      // Stationary on the working set; check bound multipliers mu_i = g_i + nu.
      Eigen::Index worst = -1;
      double worst_mu = -mult_tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        const double mu = grad[i] + nu;
        if (mu < worst_mu) {
          worst_mu = mu;
          worst = i;
        }
      }
      if (worst < 0) break;
      active[static_cast<std::size_t>(worst)] = false;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i : free) {
      if (p[i] < 0.0) {
        const double limit = -x[i] / p[i];
        if (limit < alpha) {
          alpha = limit;
          blocking = i;
        }
      }
    }
    x += alpha * p;
    at_subspace_min = blocking < 0;
    if (blocking >= 0) {
      x[blocking] = 0.0;
      active[static_cast<std::size_t>(blocking)] = true;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] < 0.0) x[i] = 0.0;
    }
    x /= x.sum();
  }
  if (iter == max_iter) {
    throw NumericError("simplex QP active-set iteration did not converge");
  }
  return {x, simplex_kkt_residual(hessian, linear, x), iter};
}

Composition map_fixed_operator(const InversionProblem& p) {
  const SimplexQpResult qp = solve_simplex_qp(p.normal_matrix(), p.projected_observation());
  return validate_composition(qp.solution);
}

UncertaintyFactor uncertainty_factor(const Vector& m, const Vector& r) {
  if (m.size() != r.size()) throw ShapeError("uncertainty factor: m and r sizes differ");
  return {1.0 + m.cwiseAbs2().dot(r), 1.0 + (r.size() ? r.maxCoeff() : 0.0)};
}

double log_fixed_posterior(const Vector& m, const InversionProblem& p) {
  if (m.size() != p.endmembers() || !on_simplex(m)) return kNegInf;
  return -0.5 * p.misfit(m);
}

double log_marginal_posterior(const Vector& m, const InversionProblem& p) {
  if (m.size() != p.endmembers() || !on_simplex(m)) return kNegInf;
  const double b = 1.0 + m.cwiseAbs2().dot(p.r());
  const double t = static_cast<double>(p.observation_length());
  return -0.5 * t * std::log(b) - 0.5 * p.misfit(m) / b;
}

double log_posterior(const Vector& m, const InversionProblem& p) {
  return p.model() == OperatorModel::kFixed ? log_fixed_posterior(m, p)
                                            : log_marginal_posterior(m, p);
}

Composition map_stochastic_operator(const InversionProblem& p) {
  Vector x = map_fixed_operator(p).values();
  if (p.model() == OperatorModel::kFixed || x.size() == 1) return validate_composition(x);
  const Matrix& h = p.normal_matrix();
  const Vector& c = p.projected_observation();
  const double t = static_cast<double>(p.observation_length());
  auto objective = [&](const Vector& m) { return -log_marginal_posterior(m, p); };

  double fx = objective(x);
  for (int iter = 0; iter < 200; ++iter) {
    const double b = 1.0 + x.cwiseAbs2().dot(p.r());
    const double q = p.misfit(x);
    const Vector grad_b = 2.0 * p.r().cwiseProduct(x);
    const Vector grad_q = 2.0 * (h * x - c);
    const Vector grad = (0.5 * t / b - 0.5 * q / (b * b)) * grad_b + grad_q / (2.0 * b);
    const Matrix model_h = h / b;
    // Quadratic model with curvature H/b and the exact gradient at x.
    const Vector target = solve_simplex_qp(model_h, model_h * x - grad).solution;
    const Vector dir = target - x;
    if (dir.norm() < 1e-13) break;
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Vector trial = x + step * dir;
      for (Eigen::Index i = 0; i < trial.size(); ++i) trial[i] = std::max(0.0, trial[i]);
      trial /= trial.sum();
      const double ft = objective(trial);
      if (ft <= fx + 1e-4 * step * grad.dot(dir)) {
        x = trial;
        fx = ft;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return validate_composition(x);
}

Matrix proposal_factor(const InversionProblem& p) {
  const Eigen::Index m = p.endmembers();
  if (m == 1) return Matrix::Zero(1, 1);
  require_full_rank(p.normal_matrix());
  const Matrix cov = p.normal_matrix().llt().solve(Matrix::Identity(m, m));
  const Vector cov_one = cov.rowwise().sum();
  const double total = cov_one.sum();
  Matrix conditioned = cov - cov_one * cov_one.transpose() / total;
  conditioned = 0.5 * (conditioned + conditioned.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(conditioned);
  Vector roots = eig.eigenvalues();
  const double top = roots.maxCoeff();
  for (Eigen::Index i = 0; i < m; ++i) {
    roots[i] = roots[i] > 1e-13 * top ? std::sqrt(roots[i]) : 0.0;
  }
  return eig.eigenvectors() * roots.asDiagonal();
}

namespace {

Vector raw_step(const Matrix& factor, Rng& rng) {
  Vector xi(factor.cols());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  Vector step = factor * xi;
  step.array() -= step.mean();
  return step;
}

bool nonnegative(const Vector& v) { return (v.array() >= 0.0).all(); }

}  // namespace

Proposal propose(const Vector& m, const Matrix& factor, double scale, Rng& rng) {
  if (scale == 0.0 || m.size() == 1) return {m, 1};
  for (int attempt = 1; attempt <= kMaxProposalAttempts; ++attempt) {
    Vector cand = m + scale * raw_step(factor, rng);
    if (nonnegative(cand)) return {std::move(cand), attempt};
  }
  std::ostringstream msg;
  msg << kMaxProposalAttempts << " consecutive proposals left the simplex from " << describe(m)
      << " at scale " << scale << "; use a smaller proposal scale";
  throw StepScaleError(msg.str());
}

double proposal_simplex_mass(const Vector& m, const Matrix& factor, double scale,
                             std::size_t samples, Rng& rng) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    if (nonnegative(m + scale * raw_step(factor, rng))) ++hits;
  }
  return (static_cast<double>(hits) + 1.0) / (static_cast<double>(samples) + 2.0);
}

double acceptance_ratio(const Vector& m, const Vector& m_cand, const InversionProblem& p,
                        double z_ratio) {
  const double lp = log_posterior(m, p);
  const double lc = log_posterior(m_cand, p);
  if (lc == kNegInf) return 0.0;
  if (lp == kNegInf) return 1.0;
  return std::min(1.0, std::exp(lc - lp) * z_ratio);
}

void McmcConfig::validate() const {
  if (chain_length <= burn_in) throw ParameterError("chain_length must exceed burn_in");
  if (thinning < 1) throw ParameterError("thinning must be >= 1");
  if ((chain_length - burn_in) / thinning < 1) {
    throw ParameterError("chain keeps no draws after burn-in and thinning");
  }
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ParameterError("scale must be >= 0");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw ParameterError("target acceptance must be in (0, 1)");
  }
  if (z_correction && z_mc_samples < 1) throw ParameterError("z_mc_samples must be >= 1");
}

PosteriorEnsemble mh_sample(const InversionProblem& p, const McmcConfig& config) {
  config.validate();
  const Eigen::Index m_dim = p.endmembers();
  const std::size_t kept = (config.chain_length - config.burn_in) / config.thinning;

  PosteriorEnsemble out;
  out.meta.burn_in = config.burn_in;
  out.meta.thinning = config.thinning;
  out.meta.seed = config.seed;
  out.draws.resize(m_dim, static_cast<Eigen::Index>(kept));
  out.log_densities.resize(static_cast<Eigen::Index>(kept));

  Rng rng(config.seed);
  Vector current = map_fixed_operator(p).values();
  double current_lp = log_posterior(current, p);
  if (!std::isfinite(current_lp)) {
    throw NumericError("non-finite log density at the initial state " + describe(current));
  }

  if (m_dim == 1) {
    out.draws.setOnes();
    out.log_densities.setConstant(current_lp);
    out.acceptance_rate = 1.0;
    out.meta.final_scale = config.scale;
    out.mean = Vector::Ones(1);
    out.covariance = Matrix::Zero(1, 1);
    out.map_draw = Vector::Ones(1);
    return out;
  }

  const Matrix factor = proposal_factor(p);
  double scale = config.scale;
  const std::size_t adapt_end = config.adapt_scale ? config.burn_in / 2 : 0;
  constexpr std::size_t kAdaptBatch = 50;
  std::size_t batch_accepted = 0;
  std::size_t batch_attempts = 0;
  double jump_sum = 0.0;
  std::size_t jump_count = 0;
  double z_threshold = config.z_threshold >= 0.0 ? config.z_threshold
                                                 : std::numeric_limits<double>::infinity();
  std::size_t accepted_after_burn = 0;
  std::size_t kept_index = 0;

  for (std::size_t step = 0; step < config.chain_length; ++step) {
    const bool sampling = step >= config.burn_in;
    Proposal prop = propose(current, factor, scale, rng);
    if (prop.resampled()) ++out.meta.resampled_proposals;
    const double jump = (prop.candidate - current).norm();

    double z_ratio = 1.0;
    if (sampling && config.z_correction && jump > z_threshold) {
      const double z_here = proposal_simplex_mass(current, factor, scale, config.z_mc_samples, rng);
      const double z_there =
          proposal_simplex_mass(prop.candidate, factor, scale, config.z_mc_samples, rng);
      z_ratio = z_here / z_there;
      ++out.meta.z_reeval_count;
    }

    const double cand_lp = log_posterior(prop.candidate, p);
    if (!std::isfinite(cand_lp) && on_simplex(prop.candidate)) {
      throw NumericError("non-finite log density at " + describe(prop.candidate));
    }
    const double accept = std::min(1.0, std::exp(cand_lp - current_lp) * z_ratio);
    const bool take = rng.uniform() < accept;
    if (take) {
      current = std::move(prop.candidate);
      current_lp = cand_lp;
    }

    if (step < adapt_end) {
      // Out-of-simplex draws count as rejections, otherwise resampling hides an oversized scale.
      if (take) ++batch_accepted;
      batch_attempts += static_cast<std::size_t>(prop.attempts);
      if ((step + 1) % kAdaptBatch == 0) {
        const double rate =
            static_cast<double>(batch_accepted) / static_cast<double>(batch_attempts);
        scale = std::clamp(scale * std::exp(rate - config.target_acceptance), 1e-8, 1e3);
        batch_accepted = 0;
        batch_attempts = 0;
      }
    } else if (!sampling) {
      jump_sum += jump;
      ++jump_count;
    }
    if (step + 1 == config.burn_in && config.z_threshold < 0.0 && jump_count > 0) {
      z_threshold = 0.5 * jump_sum / static_cast<double>(jump_count);
    }

    if (sampling) {
      if (take) ++accepted_after_burn;
      if ((step - config.burn_in + 1) % config.thinning == 0 && kept_index < kept) {
        out.draws.col(static_cast<Eigen::Index>(kept_index)) = current;
        out.log_densities[static_cast<Eigen::Index>(kept_index)] = current_lp;
        ++kept_index;
      }
    }
  }

  out.acceptance_rate = static_cast<double>(accepted_after_burn) /
                        static_cast<double>(config.chain_length - config.burn_in);
  out.meta.final_scale = scale;
  out.meta.z_threshold = z_threshold;
  if (out.acceptance_rate < 0.01) {
    std::ostringstream msg;
    msg << "poor mixing: acceptance rate " << out.acceptance_rate << " after burn-in";
    out.warnings.push_back(msg.str());
  }
  if (kept >= 2) {
    EnsembleSummary s = summarize(out.draws, out.log_densities);
    out.mean = std::move(s.mean);
    out.covariance = std::move(s.covariance);
    out.map_draw = std::move(s.map_draw);
  } else {
    out.mean = out.draws.col(0);
    out.covariance = Matrix::Zero(m_dim, m_dim);
    out.map_draw = out.draws.col(0);
  }
  return out;
}

EnsembleSummary summarize(const Matrix& draws, const Vector& log_densities) {
  const Eigen::Index n = draws.cols();
  if (n < 2) throw VarianceUndefinedError("ensemble summary needs at least 2 draws");
  if (log_densities.size() != n) throw ShapeError("one log density per draw is required");
  EnsembleSummary out;
  out.mean = draws.rowwise().mean();
  const Matrix centered = draws.colwise() - out.mean;
  out.covariance = centered * centered.transpose() / static_cast<double>(n - 1);
  Eigen::Index best = 0;
  log_densities.maxCoeff(&best);
  out.map_draw = draws.col(best);
  return out;
}

double chi_square2_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("confidence level must be in (0, 1)");
  return -2.0 * std::log1p(-level);
}

ConfidenceEllipse confidence_ellipse(const Vector& mean, const Matrix& covariance,
                                     Eigen::Index first, Eigen::Index second, double level) {
  const Eigen::Index m = mean.size();
  if (covariance.rows() != m || covariance.cols() != m || first < 0 || second < 0 ||
      first >= m || second >= m || first == second) {
    throw ShapeError("confidence ellipse: bad coordinate pair or covariance shape");
  }
  ConfidenceEllipse e;
  e.first = first;
  e.second = second;
  e.level = level;
  e.quantile = chi_square2_quantile(level);
  e.center << mean[first], mean[second];
  e.covariance << covariance(first, first), covariance(first, second), covariance(second, first),
      covariance(second, second);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(e.covariance);
  const Eigen::Vector2d lam = eig.eigenvalues().cwiseMax(0.0);
  e.semi_major = std::sqrt(e.quantile * lam[1]);
  e.semi_minor = std::sqrt(e.quantile * lam[0]);
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  e.angle = std::atan2(major[1], major[0]);
  return e;
}

bool ConfidenceEllipse::contains(const Vector& m) const {
  const Eigen::Vector2d d(m[first] - center[0], m[second] - center[1]);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(covariance);
  const double top = std::max(eig.eigenvalues()[1], 0.0);
  double dist = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double lam = eig.eigenvalues()[k];
    const double proj = eig.eigenvectors().col(k).dot(d);
    if (lam <= 1e-14 * top || lam <= 1e-300) {
      if (std::abs(proj) > 1e-12) return false;
    } else {
      dist += proj * proj / lam;
    }
  }
  return dist <= quantile;
}

std::vector<ConfidenceEllipse> pairwise_ellipses(const Vector& mean, const Matrix& covariance,
                                                 double level) {
  std::vector<ConfidenceEllipse> out;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    for (Eigen::Index j = i + 1; j < mean.size(); ++j) {
      out.push_back(confidence_ellipse(mean, covariance, i, j, level));
    }
  }
  return out;
}

}  // namespace simplex_uq
