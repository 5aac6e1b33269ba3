#include "simplex_uq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "simplex_uq/error.hpp"
#include "simplex_uq/kernels.hpp"

namespace simplex_uq {

namespace {

constexpr double kHighNoiseSd = 0.5;
constexpr double kLowNoiseSd = 0.05;
constexpr double kMapAgreementTolerance = 0.01;

std::size_t noisy_band_end(std::size_t length) { return std::max<std::size_t>(1, 3 * length / 8); }

void throw_if_any(const std::vector<std::string>& problems, const std::string& what) {
  if (problems.empty()) return;
  std::ostringstream msg;
  msg << "invalid " << what << ":";
  for (const auto& p : problems) msg << "\n  - " << p;
  throw ParameterError(msg.str());
}

// 0-based indices of a band.
std::vector<std::size_t> band_indices(const NoiseBand& band) {
  std::vector<std::size_t> out;
  for (std::size_t t = band.first; t <= band.last; ++t) out.push_back(t - 1);
  return out;
}

std::vector<std::string> band_problems(const std::vector<NoiseBand>& bands, std::size_t length,
                                       bool allow_zero_sd = false) {
  std::vector<std::string> out;
  std::vector<int> cover(length, 0);
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const NoiseBand& band = bands[b];
    const std::string tag = "noise band " + std::to_string(b);
    if (!(band.sd > 0.0) && !(allow_zero_sd && band.sd == 0.0)) out.push_back(tag + ": sd must be > 0");
    if (band.first < 1 || band.last < band.first || band.last > length) {
      out.push_back(tag + ": range [" + std::to_string(band.first) + ", " +
                    std::to_string(band.last) + "] is not inside [1, " + std::to_string(length) +
                    "]");
      continue;
    }
    for (std::size_t t = band.first; t <= band.last; ++t) ++cover[t - 1];
  }
  for (std::size_t t = 0; t < length; ++t) {
    if (cover[t] != 1) {
      out.push_back("noise bands must cover index " + std::to_string(t + 1) +
                    " exactly once (covered " + std::to_string(cover[t]) + " times)");
      break;
    }
  }
  return out;
}

MixtureDesign design_for(DesignKind kind, int endmembers, std::size_t samples) {
  MixtureDesign d{kind, endmembers, 1};
  if (d.is_repeated()) d.repetitions = static_cast<int>(samples / static_cast<std::size_t>(endmembers));
  return d;
}

std::vector<std::string> design_problems(DesignKind kind, int endmembers,
                                         const std::vector<std::size_t>& grid) {
  std::vector<std::string> out;
  const std::string tag = std::string(design_name(kind)) + " with M=" + std::to_string(endmembers);
  try {
    MixtureDesign{kind, endmembers, 1}.validate();
  } catch (const Error& e) {
    out.push_back(tag + ": " + e.what());
    return out;
  }
  for (std::size_t n : grid) {
    if (n < static_cast<std::size_t>(endmembers)) {
      out.push_back(tag + ": N=" + std::to_string(n) + " is smaller than M");
    } else if (MixtureDesign{kind, endmembers, 1}.is_repeated() &&
               n % static_cast<std::size_t>(endmembers) != 0) {
      out.push_back(tag + ": N=" + std::to_string(n) + " is not a multiple of M");
    }
  }
  return out;
}

std::vector<std::string> mcmc_problems(const McmcConfig& mcmc) {
  try {
    mcmc.validate();
  } catch (const Error& e) {
    return {std::string("mcmc: ") + e.what()};
  }
  return {};
}

}  // namespace

std::string_view separability_name(Separability s) {
  switch (s) {
    case Separability::kEasy:
      return "easy";
    case Separability::kHard:
      return "hard";
    case Separability::kCustom:
      break;
  }
  return "custom";
}

Separability parse_separability(std::string_view name) {
  if (name == "easy") return Separability::kEasy;
  if (name == "hard") return Separability::kHard;
  if (name == "custom") return Separability::kCustom;
  throw ParameterError("unknown preset '" + std::string(name) + "' (expected easy or hard)");
}

void SpectraConfig::validate() const {
  std::vector<std::string> problems;
  if (length < 1) problems.push_back("length must be >= 1");
  for (std::size_t j = 0; j < peaks.size(); ++j) {
    for (std::size_t k = 0; k < peaks[j].size(); ++k) {
      const Peak& p = peaks[j][k];
      const std::string tag = "endmember " + std::to_string(j) + " peak " + std::to_string(k);
      if (!(p.center >= 1.0 && p.center <= static_cast<double>(length))) {
        problems.push_back(tag + ": center outside [1, " + std::to_string(length) + "]");
      }
      if (!(p.width > 0.0)) problems.push_back(tag + ": width must be > 0");
      if (!std::isfinite(p.amplitude)) problems.push_back(tag + ": amplitude must be finite");
    }
  }
  if (length >= 1) {
    auto bands = band_problems(noise_bands, length);
    problems.insert(problems.end(), bands.begin(), bands.end());
  }
  throw_if_any(problems, "spectra config");
}

SpectraConfig spectra_preset(Separability preset, int endmembers, std::size_t length) {
  if (endmembers < 1) throw ParameterError("spectra preset needs M >= 1");
  if (length < 16) throw ParameterError("spectra preset needs length >= 16");
  SpectraConfig cfg;
  cfg.length = length;
  cfg.preset = preset;
  const std::size_t split = noisy_band_end(length);
  cfg.noise_bands = {{1, split, kHighNoiseSd}, {split + 1, length, kLowNoiseSd}};
  cfg.peaks.assign(static_cast<std::size_t>(endmembers), {});
  const auto m = static_cast<std::size_t>(endmembers);

  switch (preset) {
    case Separability::kEasy: {
      // 3M evenly spaced peaks in the quiet band, interleaved across endmembers;
      // each peak's +-3 width support fits inside its own slot.
      const double start = static_cast<double>(split + 1);
      const double gap = static_cast<double>(length - split - 1) / static_cast<double>(3 * m);
      for (std::size_t k = 0; k < 3 * m; ++k) {
        const double center = start + gap * (static_cast<double>(k) + 0.5);
        cfg.peaks[k % m].push_back({center, gap / 6.0, 1.0});
      }
      break;
    }
    case Separability::kHard: {
      // Three broad peaks per endmember in the noisy band, offset by two widths so neighbours overlap.
      const double span = static_cast<double>(split);
      const double width = span / 16.0;
      const double shift = 2.0 * width;
      const double base[3] = {0.2, 0.5, 0.8};
      for (std::size_t j = 0; j < m; ++j) {
        for (double b : base) {
          const double center = 0.5 + b * span + shift * (static_cast<double>(j) -
                                                           0.5 * static_cast<double>(m - 1));
          cfg.peaks[j].push_back({std::clamp(center, 1.0, span), width, 1.0});
        }
      }
      break;
    }
    case Separability::kCustom:
      throw ParameterError("the custom preset has no default peaks");
  }
  return cfg;
}

Vector noise_sd_from_bands(const std::vector<NoiseBand>& bands, std::size_t length) {
  throw_if_any(band_problems(bands, length, true), "noise bands");
  Vector sd(static_cast<Eigen::Index>(length));
  for (const auto& band : bands) {
    for (std::size_t t = band.first; t <= band.last; ++t) sd[static_cast<Eigen::Index>(t - 1)] = band.sd;
  }
  return sd;
}

Matrix make_operator(const SpectraConfig& cfg, int endmembers) {
  cfg.validate();
  if (endmembers < 1 || cfg.peaks.size() != static_cast<std::size_t>(endmembers)) {
    throw ParameterError("spectra config has " + std::to_string(cfg.peaks.size()) +
                         " peak lists but M = " + std::to_string(endmembers));
  }
  const auto t_len = static_cast<Eigen::Index>(cfg.length);
  Matrix a = Matrix::Zero(t_len, endmembers);
  for (int j = 0; j < endmembers; ++j) {
    for (const Peak& p : cfg.peaks[static_cast<std::size_t>(j)]) {
      for (Eigen::Index t = 0; t < t_len; ++t) {
        const double z = (static_cast<double>(t + 1) - p.center) / p.width;
        a(t, j) += p.amplitude * std::exp(-0.5 * z * z);
      }
    }
  }
  return a;
}

Vector observe(const Matrix& true_operator, const Vector& m, const Vector& noise_sd, Rng& rng) {
  if (m.size() != true_operator.cols() || noise_sd.size() != true_operator.rows()) {
    throw ShapeError("observe: operator, composition and noise shapes disagree");
  }
  Vector s = true_operator * m;
  for (Eigen::Index t = 0; t < s.size(); ++t) s[t] += noise_sd[t] * rng.normal();
  return s;
}

TrainingSet make_training_set_from_compositions(const Matrix& true_operator, Matrix compositions,
                                                const Vector& noise_sd, Rng& rng) {
  if (compositions.rows() != true_operator.cols() || noise_sd.size() != true_operator.rows()) {
    throw ShapeError("training set: operator, composition and noise shapes disagree");
  }
  Matrix obs = true_operator * compositions;
  for (Eigen::Index i = 0; i < obs.cols(); ++i) {
    for (Eigen::Index t = 0; t < obs.rows(); ++t) obs(t, i) += noise_sd[t] * rng.normal();
  }
  return {std::move(compositions), std::move(obs)};
}

TrainingSet make_training_set(const Matrix& true_operator, const MixtureDesign& design,
                              std::size_t samples, const Vector& noise_sd, Rng& rng) {
  design.validate();
  if (design.endmembers != true_operator.cols()) {
    throw ShapeError("design has M = " + std::to_string(design.endmembers) +
                     " but the operator has " + std::to_string(true_operator.cols()) +
                     " columns");
  }
  const auto m = static_cast<std::size_t>(design.endmembers);
  if (design.is_repeated() && samples % m != 0) {
    throw ParameterError("repeated " + std::string(design_name(design.kind)) + " design needs N (" +
                         std::to_string(samples) + ") to be a multiple of M (" +
                         std::to_string(m) + ")");
  }
  return make_training_set_from_compositions(true_operator,
                                             sample_compositions(design, samples, rng), noise_sd,
                                             rng);
}

// ---------------------------------------------------------------------------

std::vector<std::string> GammaConfig::problems() const {
  std::vector<std::string> out;
  if (designs.empty()) out.push_back("designs must not be empty");
  if (endmember_counts.empty()) out.push_back("M list must not be empty");
  if (sample_grid.empty()) out.push_back("N grid must not be empty");
  if (replications < 100) out.push_back("replications must be >= 100");
  if (!(noise_scale >= 0.0)) out.push_back("noise_scale must be >= 0");
  if (threads < 1) out.push_back("threads must be >= 1");
  if (length < 16) {
    out.push_back("T must be >= 16");
  } else {
    auto b = band_problems(noise_bands, length);
    out.insert(out.end(), b.begin(), b.end());
  }
  for (DesignKind d : designs) {
    if (d == DesignKind::kPseudoUniform) {
      out.push_back("pseudo-uniform has no closed-form scaling factor for gamma");
    }
    for (int m : endmember_counts) {
      auto p = design_problems(d, m, sample_grid);
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  return out;
}

std::vector<GammaRecord> experiment_gamma(const GammaConfig& config) {
  throw_if_any(config.problems(), "gamma experiment config");
  const Vector nominal_sd = noise_sd_from_bands(config.noise_bands, config.length);
  const Vector nominal_var = nominal_sd.cwiseAbs2();
  std::vector<std::vector<std::size_t>> bands;
  for (const auto& b : config.noise_bands) bands.push_back(band_indices(b));

  std::vector<GammaRecord> out;
  std::uint64_t cell = 0;
  for (DesignKind kind : config.designs) {
    for (int m : config.endmember_counts) {
      // The estimator error does not depend on A, so any fixed operator will do.
      const Matrix a_true = make_operator(spectra_preset(Separability::kEasy, m, config.length), m);
      for (std::size_t n : config.sample_grid) {
        const MixtureDesign design = design_for(kind, m, n);
        ReplicationPlan plan;
        plan.true_operator = a_true;
        plan.design = design;
        plan.samples = n;
        plan.noise_sd = config.noise_scale * nominal_sd;
        plan.replications = config.replications;
        plan.redraw_compositions = config.redraw_compositions;
        plan.seed = derive_seed(config.seed, cell++);
        const auto reps = replicate_estimates_parallel(plan, config.threads);
        std::vector<Matrix> estimates;
        estimates.reserve(reps.size());
        for (const auto& r : reps) estimates.push_back(r.a_tilde);

        GammaRecord rec;
        rec.design = kind;
        rec.endmembers = m;
        rec.samples = n;
        rec.seed = plan.seed;
        rec.replications = config.replications;
        rec.r = analytic_scaling_factors(design, n);
        for (const auto& idx : bands) {
          rec.gamma.push_back(gamma_ratio(estimates, nominal_var, rec.r, idx));
        }
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> InclusionConfig::problems() const {
  std::vector<std::string> out;
  if (designs.empty()) out.push_back("designs must not be empty");
  if (sample_grid.empty()) out.push_back("N grid must not be empty");
  if (trials < 100) out.push_back("trials must be >= 100");
  if (!(ci_level > 0.0 && ci_level < 1.0)) out.push_back("ci_level must be in (0, 1)");
  if (endmembers < 2) out.push_back("M must be >= 2");
  if (preset == Separability::kCustom) out.push_back("preset must be easy or hard");
  if (length < 16) out.push_back("T must be >= 16");
  if (threads < 1) out.push_back("threads must be >= 1");
  if (covariance.mode == CovarianceMode::kBanded && covariance.band_width < 0) {
    out.push_back("band width must be >= 0");
  }
  auto mc = mcmc_problems(mcmc);
  out.insert(out.end(), mc.begin(), mc.end());
  if (endmembers >= 2) {
    for (DesignKind d : designs) {
      auto p = design_problems(d, endmembers, sample_grid);
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  return out;
}

namespace {

struct TrialOutcome {
  std::vector<bool> inside;
  bool map_agrees = false;
  double acceptance = 0.0;
  double area = 0.0;
  std::size_t warnings = 0;
};

}  // namespace

std::vector<InclusionRecord> experiment_inclusion(const InclusionConfig& config) {
  throw_if_any(config.problems(), "inclusion experiment config");
  const int m = config.endmembers;
  const SpectraConfig spectra = spectra_preset(config.preset, m, config.length);
  const Matrix a_true = make_operator(spectra, m);
  const Vector noise_sd = noise_sd_from_bands(spectra.noise_bands, spectra.length);
  const MixtureDesign truth_law{DesignKind::kUniformSimplex, m, 1};

  std::vector<InclusionRecord> out;
  std::uint64_t cell = 0;
  for (DesignKind kind : config.designs) {
    for (std::size_t n : config.sample_grid) {
      const MixtureDesign design = design_for(kind, m, n);
      const std::uint64_t cell_seed = derive_seed(config.seed, cell++);
      std::vector<TrialOutcome> trials(config.trials);
      parallel_for_index(config.trials, config.threads, [&](std::size_t t) {
        const std::uint64_t trial_seed = derive_seed(cell_seed, t);
        Rng rng(trial_seed);
        const Vector truth = sample_composition(truth_law, rng);
        const TrainingSet ts = make_training_set(a_true, design, n, noise_sd, rng);
        const OperatorEstimate op = estimate_operator(ts);
        const CovarianceEstimate cov = estimate_covariance(ts, op, config.covariance);
        const Vector s = observe(a_true, truth, noise_sd, rng);
        const InversionProblem problem =
            InversionProblem::from_training(s, op, cov, OperatorModel::kStochastic);
        McmcConfig mcmc = config.mcmc;
        mcmc.seed = derive_seed(trial_seed, 1);
        const PosteriorEnsemble ens = mh_sample(problem, mcmc);
        const auto ellipses = pairwise_ellipses(ens.mean, ens.covariance, config.ci_level);

        TrialOutcome& o = trials[t];
        for (const auto& e : ellipses) o.inside.push_back(e.contains(truth));
        const Vector fixed = map_fixed_operator(problem).values();
        const Vector stoch = map_stochastic_operator(problem).values();
        o.map_agrees = (fixed - stoch).cwiseAbs().maxCoeff() < kMapAgreementTolerance;
        o.acceptance = ens.acceptance_rate;
        o.area = std::numbers::pi * ellipses.front().semi_major * ellipses.front().semi_minor;
        o.warnings = ens.warnings.size();
      });

      InclusionRecord rec;
      rec.design = kind;
      rec.endmembers = m;
      rec.samples = n;
      rec.seed = cell_seed;
      rec.trials = config.trials;
      rec.analytic_r = kind == DesignKind::kPseudoUniform ? std::nan("")
                                                          : analytic_scaling_factor(design, n);
      const std::size_t pairs = trials.front().inside.size();
      rec.pair_inclusion.assign(pairs, 0.0);
      const double count = static_cast<double>(trials.size());
      for (const auto& o : trials) {
        bool all = true;
        for (std::size_t k = 0; k < pairs; ++k) {
          rec.pair_inclusion[k] += o.inside[k] ? 1.0 : 0.0;
          all = all && o.inside[k];
        }
        rec.joint_inclusion += all ? 1.0 : 0.0;
        rec.map_agreement += o.map_agrees ? 1.0 : 0.0;
        rec.mean_acceptance += o.acceptance;
        rec.mean_ellipse_area += o.area;
        rec.warnings += o.warnings;
      }
      for (double& v : rec.pair_inclusion) v /= count;
      rec.joint_inclusion /= count;
      rec.map_agreement /= count;
      rec.mean_acceptance /= count;
      rec.mean_ellipse_area /= count;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> SingleInversionConfig::problems() const {
  std::vector<std::string> out;
  if (preset == Separability::kCustom) out.push_back("preset must be easy or hard");
  if (length < 16) out.push_back("T must be >= 16");
  if (!(ci_level > 0.0 && ci_level < 1.0)) out.push_back("ci_level must be in (0, 1)");
  if (!(noise_scale >= 0.0)) out.push_back("noise_scale must be >= 0");
  if (true_m.size() < 2) {
    out.push_back("true_m needs at least 2 entries");
  } else {
    try {
      validate_composition(true_m);
    } catch (const Error& e) {
      out.push_back(std::string("true_m: ") + e.what());
    }
    auto p = design_problems(design, static_cast<int>(true_m.size()), {samples});
    out.insert(out.end(), p.begin(), p.end());
  }
  if (covariance.mode == CovarianceMode::kBanded && covariance.band_width < 0) {
    out.push_back("band width must be >= 0");
  }
  auto mc = mcmc_problems(mcmc);
  out.insert(out.end(), mc.begin(), mc.end());
  return out;
}

SingleInversionResult experiment_single_inversion(const SingleInversionConfig& config) {
  throw_if_any(config.problems(), "single inversion config");
  const int m = static_cast<int>(config.true_m.size());
  const SpectraConfig spectra = spectra_preset(config.preset, m, config.length);
  const Matrix a_true = make_operator(spectra, m);
  const Vector noise_sd =
      config.noise_scale * noise_sd_from_bands(spectra.noise_bands, spectra.length);

  SingleInversionResult out;
  out.true_m = validate_composition(config.true_m).values();
  Rng rng(config.seed);
  const TrainingSet ts =
      make_training_set(a_true, design_for(config.design, m, config.samples), config.samples,
                        noise_sd, rng);
  const OperatorEstimate op = estimate_operator(ts);
  const CovarianceEstimate cov = estimate_covariance(ts, op, config.covariance);
  const Vector s = observe(a_true, out.true_m, noise_sd, rng);
  const InversionProblem problem =
      InversionProblem::from_training(s, op, cov, OperatorModel::kStochastic);
  McmcConfig mcmc = config.mcmc;
  mcmc.seed = derive_seed(config.seed, 1);

  out.r = op.r;
  out.fixed_map = map_fixed_operator(problem).values();
  out.stochastic_map = map_stochastic_operator(problem).values();
  out.ensemble = mh_sample(problem, mcmc);
  out.ellipses = pairwise_ellipses(out.ensemble.mean, out.ensemble.covariance, config.ci_level);
  out.joint_inclusion = true;
  for (const auto& e : out.ellipses) {
    out.pair_inclusion.push_back(e.contains(out.true_m));
    out.joint_inclusion = out.joint_inclusion && out.pair_inclusion.back();
  }
  out.fixed_error = (out.fixed_map - out.true_m).cwiseAbs().maxCoeff();
  out.stochastic_error = (out.stochastic_map - out.true_m).cwiseAbs().maxCoeff();
  out.mean_error = (out.ensemble.mean - out.true_m).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace simplex_uq
