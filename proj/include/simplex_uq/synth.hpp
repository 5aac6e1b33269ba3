#pragma once

// Synthetic spectra, training data and the experiment drivers built on them.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "simplex_uq/covariance.hpp"
#include "simplex_uq/inversion.hpp"
#include "simplex_uq/random.hpp"
#include "simplex_uq/simplex.hpp"
#include "simplex_uq/training.hpp"
#include "simplex_uq/types.hpp"

namespace simplex_uq {

/// Gaussian peak amplitude * exp(-(t - center)^2 / (2 width^2)), t = 1..T.
struct Peak {
  double center = 1.0;
  double width = 1.0;
  double amplitude = 1.0;
};

/// Noise level on the 1-based inclusive index range [first, last].
struct NoiseBand {
  std::size_t first = 1;
  std::size_t last = 1;
  double sd = 1.0;
};

enum class Separability { kEasy, kHard, kCustom };

std::string_view separability_name(Separability s);
Separability parse_separability(std::string_view name);

struct SpectraConfig {
  std::size_t length = 256;
  std::vector<std::vector<Peak>> peaks;  // one peak list per endmember
  std::vector<NoiseBand> noise_bands;    // must tile 1..length without overlap
  Separability preset = Separability::kCustom;

  /// Throws ParameterError listing every problem found.
  void validate() const;
};

/// Default observation length of the presets.
inline constexpr std::size_t kDefaultSpectraLength = 256;

/// Two-band noise (sd 0.5 on the first 3/8 of the indices, 0.05 elsewhere).
/// Easy: three narrow disjoint peaks per endmember, all in the quiet band.
/// Hard: three wide overlapping peaks per endmember inside the noisy band.
SpectraConfig spectra_preset(Separability preset, int endmembers,
                             std::size_t length = kDefaultSpectraLength);

/// Per-index noise SD (length T) from bands that tile 1..T.
Vector noise_sd_from_bands(const std::vector<NoiseBand>& bands, std::size_t length);

/// T x M matrix whose column j sums the peaks of endmember j.
Matrix make_operator(const SpectraConfig& cfg, int endmembers);

/// Observations A m_i + diag(noise_sd) z_i for the given M x N compositions.
TrainingSet make_training_set_from_compositions(const Matrix& true_operator, Matrix compositions,
                                                const Vector& noise_sd, Rng& rng);

/// Draws N compositions from `design` and observes them. Repeated designs
/// need N to be a multiple of M.
TrainingSet make_training_set(const Matrix& true_operator, const MixtureDesign& design,
                              std::size_t samples, const Vector& noise_sd, Rng& rng);

/// A m + diag(noise_sd) z.
Vector observe(const Matrix& true_operator, const Vector& m, const Vector& noise_sd, Rng& rng);

// ---------------------------------------------------------------------------
// Experiments

struct GammaConfig {
  std::vector<DesignKind> designs{DesignKind::kMultinomial};
  std::vector<int> endmember_counts{2, 4, 8};
  std::vector<std::size_t> sample_grid{50, 100, 200, 400, 800, 1000, 1500, 2000};
  std::size_t replications = 500;
  std::size_t length = 100;
  std::vector<NoiseBand> noise_bands{{1, 60, 0.05}, {61, 100, 0.5}};
  /// Multiplies the generating noise only; gamma is always measured against
  /// the nominal band variances, so 0 gives gamma = 0.
  double noise_scale = 1.0;
  /// Fresh compositions each replication (true) or one fixed draw (false).
  bool redraw_compositions = true;
  std::uint64_t seed = 0;
  int threads = 1;

  std::vector<std::string> problems() const;
};

struct GammaRecord {
  DesignKind design = DesignKind::kMultinomial;
  int endmembers = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t replications = 0;
  Vector r;                    // analytic, per endmember
  std::vector<Vector> gamma;  // one vector (per endmember) per noise band
};

std::vector<GammaRecord> experiment_gamma(const GammaConfig& config);

struct InclusionConfig {
  std::vector<DesignKind> designs{DesignKind::kRepeatedPure,
                                  DesignKind::kDoubleMultinomialWithoutReplacement,
                                  DesignKind::kUniformSimplex};
  std::vector<std::size_t> sample_grid{30, 100, 300};
  std::size_t trials = 100;
  double ci_level = 0.95;
  int endmembers = 3;
  Separability preset = Separability::kHard;
  std::size_t length = kDefaultSpectraLength;
  CovarianceModeSpec covariance{CovarianceMode::kDiagonal, 0};
  McmcConfig mcmc{};
  std::uint64_t seed = 0;
  int threads = 1;

  std::vector<std::string> problems() const;
};

struct InclusionRecord {
  DesignKind design = DesignKind::kMultinomial;
  int endmembers = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  double analytic_r = 0.0;
  double joint_inclusion = 0.0;       // all pairwise ellipses contain the truth
  std::vector<double> pair_inclusion;  // per pair (0,1), (0,2), ..., (M-2,M-1)
  double map_agreement = 0.0;  // fraction with |fixed MAP - stochastic MAP| < 0.01 everywhere
  double mean_acceptance = 0.0;
  double mean_ellipse_area = 0.0;  // first pair
  std::size_t warnings = 0;
};

std::vector<InclusionRecord> experiment_inclusion(const InclusionConfig& config);

struct SingleInversionConfig {
  Separability preset = Separability::kEasy;
  DesignKind design = DesignKind::kRepeatedPure;
  std::size_t samples = 30;
  std::size_t length = kDefaultSpectraLength;
  Vector true_m = Vector::Constant(3, 1.0 / 3.0);
  double ci_level = 0.95;
  double noise_scale = 1.0;
  CovarianceModeSpec covariance{CovarianceMode::kDiagonal, 0};
  McmcConfig mcmc{};
  std::uint64_t seed = 0;

  std::vector<std::string> problems() const;
};

struct SingleInversionResult {
  Vector true_m;
  Vector fixed_map;
  Vector stochastic_map;
  Vector r;
  PosteriorEnsemble ensemble;
  std::vector<ConfidenceEllipse> ellipses;
  std::vector<bool> pair_inclusion;
  bool joint_inclusion = false;
  double fixed_error = 0.0;       // max |fixed MAP - true m|
  double stochastic_error = 0.0;  // max |stochastic MAP - true m|
  double mean_error = 0.0;        // max |ensemble mean - true m|
};

SingleInversionResult experiment_single_inversion(const SingleInversionConfig& config);

}  // namespace simplex_uq
