#include "simplex_uq/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "simplex_uq/covariance.hpp"
#include "simplex_uq/error.hpp"
#include "simplex_uq/inversion.hpp"
#include "simplex_uq/io.hpp"
#include "simplex_uq/synth.hpp"
#include "simplex_uq/training.hpp"

namespace simplex_uq {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kSeedVariable = "SIMPLEX_UQ_SEED";
constexpr const char* kExperimentUsage =
    "usage: simplex-uq experiment <gamma|inclusion|single> CONFIG.json [--out-dir DIR] "
    "[--threads N]\n";

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// SIMPLEX_UQ_SEED, when set, replaces every configured seed.
std::optional<std::uint64_t> seed_override() {
  const char* text = std::getenv(kSeedVariable);
  if (!text || !*text) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (*end != '\0' || errno == ERANGE || text[0] == '-') {
    throw ParameterError(std::string(kSeedVariable) + " must be a nonnegative integer, got '" +
                         text + "'");
  }
  return static_cast<std::uint64_t>(v);
}

std::uint64_t resolve_seed(std::uint64_t configured) {
  return seed_override().value_or(configured);
}

Json base_report(const std::string& command) {
  Json j;
  j["tool"] = "simplex-uq";
  j["version"] = SIMPLEX_UQ_VERSION;
  j["command"] = command;
  return j;
}

Json mcmc_json(const McmcConfig& c) {
  Json j;
  j["chain_length"] = c.chain_length;
  j["burn_in"] = c.burn_in;
  j["thinning"] = c.thinning;
  j["scale"] = c.scale;
  j["adapt_scale"] = c.adapt_scale;
  j["target_acceptance"] = c.target_acceptance;
  j["z_threshold"] = c.z_threshold;
  j["z_mc_samples"] = c.z_mc_samples;
  j["z_correction"] = c.z_correction;
  j["seed"] = c.seed;
  return j;
}

std::string cov_mode_text(const CovarianceModeSpec& spec) {
  CovarianceEstimate tmp;
  tmp.mode = spec.mode;
  tmp.band_width = spec.band_width;
  return mode_label(tmp);
}

Json ellipse_json(const ConfidenceEllipse& e) {
  Json j;
  j["pair"] = {e.first, e.second};
  j["level"] = e.level;
  j["chi2_quantile"] = e.quantile;
  j["center"] = {e.center[0], e.center[1]};
  j["covariance"] = {{e.covariance(0, 0), e.covariance(0, 1)},
                     {e.covariance(1, 0), e.covariance(1, 1)}};
  j["semi_major"] = e.semi_major;
  j["semi_minor"] = e.semi_minor;
  j["angle"] = e.angle;
  return j;
}

Json ensemble_json(const PosteriorEnsemble& ens, const Vector& r, double level) {
  Json j;
  j["draws"] = ens.size();
  j["acceptance_rate"] = ens.acceptance_rate;
  j["mean"] = to_json(ens.mean);
  j["covariance"] = to_json(ens.covariance);
  j["map_draw"] = to_json(ens.map_draw);
  Json ellipses = Json::array();
  for (const auto& e : pairwise_ellipses(ens.mean, ens.covariance, level)) {
    ellipses.push_back(ellipse_json(e));
  }
  j["ellipses"] = ellipses;
  double b_sum = 0.0;
  double b_hi = 0.0;
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    const double b = uncertainty_factor(ens.draws.col(i), r).b;
    b_sum += b;
    b_hi = std::max(b_hi, b);
  }
  const UncertaintyFactor at_mean = uncertainty_factor(ens.mean, r);
  j["b"] = {{"at_mean", at_mean.b},
            {"draws_mean", b_sum / static_cast<double>(ens.size())},
            {"draws_max", b_hi},
            {"bound", at_mean.b_max}};
  j["chain"] = {{"burn_in", ens.meta.burn_in},
                {"thinning", ens.meta.thinning},
                {"seed", ens.meta.seed},
                {"final_scale", ens.meta.final_scale},
                {"z_threshold", ens.meta.z_threshold},
                {"z_reevaluations", ens.meta.z_reeval_count},
                {"resampled_proposals", ens.meta.resampled_proposals}};
  j["warnings"] = ens.warnings;
  return j;
}

void emit_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------
// JSON config reading. Every problem is collected and reported together.

class ConfigReader {
 public:
  ConfigReader(const Json& root, std::vector<std::string>& problems, std::string prefix = "")
      : root_(root), problems_(problems), prefix_(std::move(prefix)) {
    if (!root_.is_object()) problems_.push_back(where("") + "must be a JSON object");
  }

  template <class T>
  void read(const std::string& key, T& dst) {
    read_with(key, [&](const Json& v) { dst = v.get<T>(); });
  }

  void read_with(const std::string& key, const std::function<void(const Json&)>& parse) {
    known_.insert(key);
    if (!root_.is_object() || !root_.contains(key)) return;
    try {
      parse(root_.at(key));
    } catch (const Json::exception& e) {
      problems_.push_back(where(key) + "wrong type (" + e.what() + ")");
    } catch (const Error& e) {
      problems_.push_back(where(key) + e.what());
    }
  }

  /// Call after all reads: flags keys that no read asked for.
  void reject_unknown() {
    if (!root_.is_object()) return;
    for (const auto& [key, _] : root_.items()) {
      if (!known_.count(key)) problems_.push_back(where(key) + "unknown key");
    }
  }

 private:
  std::string where(const std::string& key) const {
    const std::string path = prefix_.empty() ? key : (key.empty() ? prefix_ : prefix_ + "." + key);
    return path.empty() ? "config: " : "config." + path + ": ";
  }

  const Json& root_;
  std::vector<std::string>& problems_;
  std::string prefix_;
  std::set<std::string> known_;
};

void read_designs(ConfigReader& r, const std::string& key, std::vector<DesignKind>& out) {
  r.read_with(key, [&](const Json& v) {
    std::vector<DesignKind> tmp;
    std::string bad;
    for (const auto& name : v.get<std::vector<std::string>>()) {
      try {
        tmp.push_back(parse_design(name));
      } catch (const Error& e) {
        bad += (bad.empty() ? "" : "; ") + std::string(e.what());
      }
    }
    // Keep the valid names so later checks still report their own problems.
    out = std::move(tmp);
    if (!bad.empty()) throw ParameterError(bad);
  });
}

void read_mcmc(ConfigReader& r, McmcConfig& mcmc, std::vector<std::string>& problems) {
  r.read_with("mcmc", [&](const Json& v) {
    ConfigReader m(v, problems, "mcmc");
    m.read("chain_length", mcmc.chain_length);
    m.read("burn_in", mcmc.burn_in);
    m.read("thinning", mcmc.thinning);
    m.read("scale", mcmc.scale);
    m.read("adapt_scale", mcmc.adapt_scale);
    m.read("target_acceptance", mcmc.target_acceptance);
    m.read("z_threshold", mcmc.z_threshold);
    m.read("z_mc_samples", mcmc.z_mc_samples);
    m.read("z_correction", mcmc.z_correction);
    m.reject_unknown();
  });
}

void read_cov_mode(ConfigReader& r, CovarianceModeSpec& spec) {
  r.read_with("cov_mode", [&](const Json& v) { spec = parse_cov_mode(v.get<std::string>()); });
}

void read_preset(ConfigReader& r, Separability& preset) {
  r.read_with("preset", [&](const Json& v) { preset = parse_separability(v.get<std::string>()); });
}

void fail_if_problems(const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::ostringstream msg;
  msg << problems.size() << " configuration problem" << (problems.size() == 1 ? "" : "s") << ":";
  for (const auto& p : problems) msg << "\n  - " << p;
  throw ParameterError(msg.str());
}

Json parse_config_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParameterError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

Json designs_json(const std::vector<DesignKind>& designs) {
  Json out = Json::array();
  for (DesignKind d : designs) out.push_back(std::string(design_name(d)));
  return out;
}

Json bands_json(const std::vector<NoiseBand>& bands) {
  Json out = Json::array();
  for (const auto& b : bands) out.push_back({{"first", b.first}, {"last", b.last}, {"sd", b.sd}});
  return out;
}

// ---------------------------------------------------------------------------
// experiment

int run_gamma(const Json& raw, const fs::path& out_dir, int threads, std::ostream& out) {
  GammaConfig cfg;
  std::vector<std::string> problems;
  ConfigReader r(raw, problems);
  read_designs(r, "designs", cfg.designs);
  r.read("M", cfg.endmember_counts);
  r.read("N", cfg.sample_grid);
  r.read("replications", cfg.replications);
  r.read("T", cfg.length);
  r.read_with("noise_bands", [&](const Json& v) {
    std::vector<NoiseBand> bands;
    for (const auto& b : v) bands.push_back({b.at("first").get<std::size_t>(),
                                             b.at("last").get<std::size_t>(),
                                             b.at("sd").get<double>()});
    cfg.noise_bands = std::move(bands);
  });
  r.read("noise_scale", cfg.noise_scale);
  r.read("redraw_compositions", cfg.redraw_compositions);
  r.read("seed", cfg.seed);
  r.reject_unknown();
  cfg.seed = resolve_seed(cfg.seed);
  cfg.threads = threads;
  auto more = cfg.problems();
  problems.insert(problems.end(), more.begin(), more.end());
  fail_if_problems(problems);

  const auto records = experiment_gamma(cfg);
  Json report = base_report("experiment gamma");
  report["config"] = {{"designs", designs_json(cfg.designs)},
                      {"M", cfg.endmember_counts},
                      {"N", cfg.sample_grid},
                      {"replications", cfg.replications},
                      {"T", cfg.length},
                      {"noise_bands", bands_json(cfg.noise_bands)},
                      {"noise_scale", cfg.noise_scale},
                      {"redraw_compositions", cfg.redraw_compositions},
                      {"seed", cfg.seed}};
  Json recs = Json::array();
  std::string csv = "design,M,N,endmember,band,gamma\n";
  for (const auto& rec : records) {
    Json bands = Json::array();
    for (std::size_t b = 0; b < rec.gamma.size(); ++b) {
      bands.push_back(to_json(rec.gamma[b]));
      for (Eigen::Index j = 0; j < rec.gamma[b].size(); ++j) {
        csv += std::string(design_name(rec.design)) + "," + std::to_string(rec.endmembers) + "," +
               std::to_string(rec.samples) + "," + std::to_string(j + 1) + "," +
               std::to_string(b + 1) + "," + format_double(rec.gamma[b][j]) + "\n";
      }
    }
    recs.push_back({{"design", design_name(rec.design)},
                    {"M", rec.endmembers},
                    {"N", rec.samples},
                    {"seed", rec.seed},
                    {"replications", rec.replications},
                    {"r", to_json(rec.r)},
                    {"gamma_by_band", bands}});
  }
  report["records"] = recs;
  write_text_file(out_dir / "gamma.csv", csv);
  write_text_file(out_dir / "gamma_report.json", dump(report));
  out << "wrote " << records.size() << " gamma records to " << (out_dir / "gamma.csv").string()
      << "\n";
  return 0;
}

int run_inclusion(const Json& raw, const fs::path& out_dir, int threads, std::ostream& out,
                  std::ostream& err) {
  InclusionConfig cfg;
  std::vector<std::string> problems;
  ConfigReader r(raw, problems);
  read_designs(r, "designs", cfg.designs);
  r.read("N", cfg.sample_grid);
  r.read("trials", cfg.trials);
  r.read("ci_level", cfg.ci_level);
  r.read("M", cfg.endmembers);
  read_preset(r, cfg.preset);
  r.read("T", cfg.length);
  read_cov_mode(r, cfg.covariance);
  read_mcmc(r, cfg.mcmc, problems);
  r.read("seed", cfg.seed);
  r.reject_unknown();
  cfg.seed = resolve_seed(cfg.seed);
  cfg.threads = threads;
  auto more = cfg.problems();
  problems.insert(problems.end(), more.begin(), more.end());
  fail_if_problems(problems);

  const auto records = experiment_inclusion(cfg);
  Json report = base_report("experiment inclusion");
  Json mcmc = mcmc_json(cfg.mcmc);
  mcmc.erase("seed");
  report["config"] = {{"designs", designs_json(cfg.designs)},
                      {"N", cfg.sample_grid},
                      {"trials", cfg.trials},
                      {"ci_level", cfg.ci_level},
                      {"M", cfg.endmembers},
                      {"preset", separability_name(cfg.preset)},
                      {"T", cfg.length},
                      {"cov_mode", cov_mode_text(cfg.covariance)},
                      {"mcmc", mcmc},
                      {"seed", cfg.seed}};
  Json recs = Json::array();
  std::string csv = "design,M,N,r,joint_inclusion";
  const int m = cfg.endmembers;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) csv += ",pair_" + std::to_string(i + 1) + std::to_string(j + 1);
  }
  csv += ",map_agreement,mean_acceptance\n";
  std::size_t warnings = 0;
  for (const auto& rec : records) {
    recs.push_back({{"design", design_name(rec.design)},
                    {"M", rec.endmembers},
                    {"N", rec.samples},
                    {"seed", rec.seed},
                    {"trials", rec.trials},
                    {"r", rec.analytic_r},
                    {"joint_inclusion", rec.joint_inclusion},
                    {"pair_inclusion", rec.pair_inclusion},
                    {"map_agreement", rec.map_agreement},
                    {"mean_acceptance", rec.mean_acceptance},
                    {"mean_ellipse_area", rec.mean_ellipse_area},
                    {"mixing_warnings", rec.warnings}});
    csv += std::string(design_name(rec.design)) + "," + std::to_string(rec.endmembers) + "," +
           std::to_string(rec.samples) + "," + format_double(rec.analytic_r) + "," +
           format_double(rec.joint_inclusion);
    for (double p : rec.pair_inclusion) csv += "," + format_double(p);
    csv += "," + format_double(rec.map_agreement) + "," + format_double(rec.mean_acceptance) + "\n";
    warnings += rec.warnings;
  }
  report["records"] = recs;
  write_text_file(out_dir / "inclusion.csv", csv);
  write_text_file(out_dir / "inclusion_report.json", dump(report));
  if (warnings) err << "warning: " << warnings << " chains reported poor mixing\n";
  out << "wrote " << records.size() << " inclusion records to "
      << (out_dir / "inclusion.csv").string() << "\n";
  return 0;
}

int run_single(const Json& raw, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  SingleInversionConfig cfg;
  std::vector<std::string> problems;
  ConfigReader r(raw, problems);
  read_preset(r, cfg.preset);
  r.read_with("design", [&](const Json& v) { cfg.design = parse_design(v.get<std::string>()); });
  r.read("N", cfg.samples);
  r.read("T", cfg.length);
  r.read_with("true_m", [&](const Json& v) {
    const auto values = v.get<std::vector<double>>();
    cfg.true_m = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  });
  r.read("ci_level", cfg.ci_level);
  r.read("noise_scale", cfg.noise_scale);
  read_cov_mode(r, cfg.covariance);
  read_mcmc(r, cfg.mcmc, problems);
  r.read("seed", cfg.seed);
  r.reject_unknown();
  cfg.seed = resolve_seed(cfg.seed);
  auto more = cfg.problems();
  problems.insert(problems.end(), more.begin(), more.end());
  fail_if_problems(problems);

  const SingleInversionResult res = experiment_single_inversion(cfg);
  Json report = base_report("experiment single");
  Json mcmc = mcmc_json(cfg.mcmc);
  mcmc.erase("seed");
  report["config"] = {{"preset", separability_name(cfg.preset)},
                      {"design", design_name(cfg.design)},
                      {"N", cfg.samples},
                      {"T", cfg.length},
                      {"true_m", to_json(cfg.true_m)},
                      {"ci_level", cfg.ci_level},
                      {"noise_scale", cfg.noise_scale},
                      {"cov_mode", cov_mode_text(cfg.covariance)},
                      {"mcmc", mcmc},
                      {"seed", cfg.seed}};
  report["r"] = to_json(res.r);
  report["fixed_map"] = to_json(res.fixed_map);
  report["stochastic_map"] = to_json(res.stochastic_map);
  report["fixed_error"] = res.fixed_error;
  report["stochastic_error"] = res.stochastic_error;
  report["mean_error"] = res.mean_error;
  report["joint_inclusion"] = res.joint_inclusion;
  report["pair_inclusion"] = res.pair_inclusion;
  report["ensemble"] = ensemble_json(res.ensemble, res.r, cfg.ci_level);
  write_text_file(out_dir / "single_report.json", dump(report));
  write_matrix_csv(out_dir / "single_draws.csv", res.ensemble.draws.transpose());
  std::string csv = "first,second,center_first,center_second,semi_major,semi_minor,angle,contains_truth\n";
  for (std::size_t k = 0; k < res.ellipses.size(); ++k) {
    const auto& e = res.ellipses[k];
    csv += std::to_string(e.first + 1) + "," + std::to_string(e.second + 1) + "," +
           format_double(e.center[0]) + "," + format_double(e.center[1]) + "," +
           format_double(e.semi_major) + "," + format_double(e.semi_minor) + "," +
           format_double(e.angle) + "," + (res.pair_inclusion[k] ? "1" : "0") + "\n";
  }
  write_text_file(out_dir / "single_ellipses.csv", csv);
  emit_warnings(res.ensemble.warnings, err);
  out << "truth " << (res.joint_inclusion ? "inside" : "outside") << " the "
      << cfg.ci_level * 100.0 << "% ellipses; fixed MAP error " << res.fixed_error
      << ", stochastic MAP error " << res.stochastic_error << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train / invert / scaling / simulate

struct TrainOptions {
  std::string compositions;
  std::string observations;
  std::string out_dir = ".";
  std::string cov_mode = "diag";
  int threads = 1;
};

Json correlation_summary(const Matrix& cov) {
  const Eigen::Index t = cov.rows();
  double max_abs = -1.0;
  double adjacent_sum = 0.0;
  std::size_t adjacent_count = 0;
  std::size_t undefined = 0;
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = i + 1; j < t; ++j) {
      if (!(cov(i, i) > 0.0) || !(cov(j, j) > 0.0)) {
        ++undefined;
        continue;
      }
      const double rho = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
      max_abs = std::max(max_abs, std::abs(rho));
      if (j == i + 1) {
        adjacent_sum += rho;
        ++adjacent_count;
      }
    }
  }
  Json j;
  j["max_abs_offdiagonal"] = max_abs < 0.0 ? Json(nullptr) : Json(max_abs);
  j["mean_adjacent"] = adjacent_count ? Json(adjacent_sum / static_cast<double>(adjacent_count))
                                      : Json(nullptr);
  j["undefined_pairs"] = undefined;
  return j;
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const CovarianceModeSpec spec = parse_cov_mode(o.cov_mode);
  if (o.threads < 1) throw ParameterError("--threads must be >= 1");
  const TrainingSet ts = read_training_set(o.compositions, o.observations);
  const OperatorEstimate op = estimate_operator(ts);
  const CovarianceEstimate cov = estimate_covariance(ts, op, spec, o.threads);

  const fs::path dir = o.out_dir;
  write_matrix_csv(dir / "operator.csv", op.a_tilde.transpose());
  write_matrix_csv(dir / "covariance.csv", cov.matrix);
  Json report = base_report("train");
  report["config"] = {{"compositions", o.compositions},
                      {"observations", o.observations},
                      {"out_dir", o.out_dir},
                      {"cov_mode", mode_label(cov)}};
  report["endmembers"] = ts.endmembers();
  report["samples"] = ts.samples();
  report["observation_length"] = ts.observation_length();
  report["r"] = to_json(op.r);
  report["summed_r"] = op.r.sum();
  report["gram_condition"] = op.gram_condition;
  report["covariance"] = {{"mode", mode_label(cov)},
                          {"band_width", cov.band_width},
                          {"n_samples", cov.n_samples},
                          {"correlation", correlation_summary(cov.matrix)}};
  write_text_file(dir / "training_report.json", dump(report));
  out << "trained " << ts.observation_length() << "x" << ts.endmembers() << " operator from "
      << ts.samples() << " samples; max r = " << op.r.maxCoeff() << "\n";
  return 0;
}

struct InvertOptions {
  std::string model_dir;
  std::string observation;
  std::string out_dir = ".";
  std::string model = "stochastic";
  double ci_level = 0.95;
  McmcConfig mcmc{};
  bool no_adapt = false;
  bool no_z = false;
};

int cmd_invert(InvertOptions o, std::ostream& out, std::ostream& err) {
  const OperatorModel model = parse_model(o.model);
  o.mcmc.adapt_scale = !o.no_adapt;
  o.mcmc.z_correction = !o.no_z;
  o.mcmc.seed = resolve_seed(o.mcmc.seed);
  if (model == OperatorModel::kStochastic) o.mcmc.validate();
  if (!(o.ci_level > 0.0 && o.ci_level < 1.0)) throw ParameterError("--ci-level must be in (0, 1)");

  const fs::path dir = o.model_dir;
  const Matrix a0 = read_matrix_csv(dir / "operator.csv").transpose();
  CovarianceEstimate cov;
  cov.matrix = read_matrix_csv(dir / "covariance.csv");
  const fs::path report_path = dir / "training_report.json";
  Json training;
  try {
    training = Json::parse(read_text_file(report_path));
    const CovarianceModeSpec spec = parse_cov_mode(training.at("covariance").at("mode"));
    cov.mode = spec.mode;
    cov.band_width = spec.band_width;
    cov.n_samples = training.at("covariance").at("n_samples").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw ParameterError(report_path.string() + ": malformed training report (" + e.what() + ")");
  }
  const auto r_values = training.at("r").get<std::vector<double>>();
  const Vector r = Eigen::Map<const Vector>(r_values.data(), static_cast<Eigen::Index>(r_values.size()));
  if (cov.matrix.rows() != a0.rows() || cov.matrix.cols() != a0.rows()) {
    throw ShapeError((dir / "covariance.csv").string() + " is " + std::to_string(cov.matrix.rows()) +
                     "x" + std::to_string(cov.matrix.cols()) + " but the operator has T = " +
                     std::to_string(a0.rows()));
  }
  const Vector s = read_vector_csv(o.observation);
  if (s.size() != a0.rows()) {
    throw ShapeError(o.observation + ": observation has " + std::to_string(s.size()) +
                     " values but the operator has T = " + std::to_string(a0.rows()));
  }
  const InversionProblem problem(s, a0, r, invert_covariance(cov), model);

  Json report = base_report("invert");
  Json cfg = {{"model_dir", o.model_dir},
              {"observation", o.observation},
              {"out_dir", o.out_dir},
              {"model", model_name(model)},
              {"ci_level", o.ci_level}};
  if (model == OperatorModel::kStochastic) cfg["mcmc"] = mcmc_json(o.mcmc);
  report["config"] = cfg;
  const Vector fixed = map_fixed_operator(problem).values();
  report["fixed_map"] = to_json(fixed);
  report["fixed_misfit"] = problem.misfit(fixed);

  const fs::path odir = o.out_dir;
  if (model == OperatorModel::kFixed) {
    write_text_file(odir / "solution.json", dump(report));
    out << "fixed-operator MAP written to " << (odir / "solution.json").string() << "\n";
    return 0;
  }
  const Vector stochastic = map_stochastic_operator(problem).values();
  const PosteriorEnsemble ens = mh_sample(problem, o.mcmc);
  report["stochastic_map"] = to_json(stochastic);
  report["b_at_stochastic_map"] = uncertainty_factor(stochastic, r).b;
  report["ensemble"] = ensemble_json(ens, r, o.ci_level);
  write_text_file(odir / "solution.json", dump(report));
  write_matrix_csv(odir / "draws.csv", ens.draws.transpose());
  emit_warnings(ens.warnings, err);
  out << ens.size() << " posterior draws (acceptance " << ens.acceptance_rate << ") written to "
      << (odir / "draws.csv").string() << "\n";
  return 0;
}

struct ScalingOptions {
  std::string design;
  int m = 0;
  std::size_t n = 0;
  std::string empirical;
  std::string json_out;
};

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int cmd_scaling(const ScalingOptions& o, std::ostream& out) {
  const DesignKind kind = parse_design(o.design);
  MixtureDesign design{kind, o.m, 1};
  design.validate();
  std::optional<Vector> empirical;
  std::size_t n = o.n;
  if (!o.empirical.empty()) {
    const Matrix c = read_matrix_csv(o.empirical);
    if (c.cols() != o.m) {
      throw ShapeError(o.empirical + ": compositions have " + std::to_string(c.cols()) +
                       " columns but --m is " + std::to_string(o.m));
    }
    if (n == 0) n = static_cast<std::size_t>(c.rows());
    if (n != static_cast<std::size_t>(c.rows())) {
      throw ShapeError(o.empirical + " has " + std::to_string(c.rows()) + " rows but --n is " +
                       std::to_string(n));
    }
    empirical = empirical_scaling_factors(c.transpose());
  }
  if (n == 0) throw ParameterError("--n is required (or pass --empirical samples.csv)");
  if (design.is_repeated()) {
    if (n % static_cast<std::size_t>(o.m) != 0) {
      throw ParameterError("repeated designs need N to be a multiple of M");
    }
    design.repetitions = static_cast<int>(n / static_cast<std::size_t>(o.m));
  }
  const double worst = analytic_scaling_factor(design, n);
  const Vector per = analytic_scaling_factors(design, n);

  out << "design " << design_name(kind) << ", M = " << o.m << ", N = " << n << "\n";
  out << "r = " << short_number(worst) << "\n";
  out << "endmember  analytic";
  if (empirical) out << "  empirical  ratio";
  out << "\n";
  for (int j = 0; j < o.m; ++j) {
    out << j + 1 << "  " << short_number(per[j]);
    if (empirical) {
      out << "  " << short_number((*empirical)[j]) << "  " << short_number((*empirical)[j] / per[j]);
    }
    out << "\n";
  }
  if (!o.json_out.empty()) {
    Json j = base_report("scaling");
    j["config"] = {{"design", design_name(kind)}, {"M", o.m}, {"N", n}, {"empirical", o.empirical}};
    j["r"] = worst;
    j["analytic"] = to_json(per);
    if (empirical) {
      j["empirical"] = to_json(*empirical);
      j["ratio"] = to_json(Vector(empirical->cwiseQuotient(per)));
    }
    write_text_file(o.json_out, dump(j));
  }
  return 0;
}

struct SimulateOptions {
  std::string preset = "easy";
  std::string design = "pure";
  int m = 3;
  std::size_t n = 30;
  std::size_t length = kDefaultSpectraLength;
  std::vector<double> true_m;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int cmd_simulate(SimulateOptions o, std::ostream& out) {
  o.seed = resolve_seed(o.seed);
  const Separability preset = parse_separability(o.preset);
  const MixtureDesign design{parse_design(o.design), o.m, 1};
  design.validate();
  if (!(o.noise_scale >= 0.0)) throw ParameterError("--noise-scale must be >= 0");
  Vector truth = Vector::Constant(o.m, 1.0 / o.m);
  if (!o.true_m.empty()) {
    if (static_cast<int>(o.true_m.size()) != o.m) throw ShapeError("--true-m needs M values");
    truth = validate_composition(
                Eigen::Map<const Vector>(o.true_m.data(), static_cast<Eigen::Index>(o.m)))
                .values();
  }
  const SpectraConfig spectra = spectra_preset(preset, o.m, o.length);
  const Matrix a = make_operator(spectra, o.m);
  const Vector sd = o.noise_scale * noise_sd_from_bands(spectra.noise_bands, spectra.length);
  Rng rng(o.seed);
  const TrainingSet ts = make_training_set(a, design, o.n, sd, rng);
  const Vector s = observe(a, truth, sd, rng);

  const fs::path dir = o.out_dir;
  write_matrix_csv(dir / "compositions.csv", ts.compositions.transpose());
  write_matrix_csv(dir / "observations.csv", ts.observations.transpose());
  write_matrix_csv(dir / "observation.csv", s.transpose());
  write_matrix_csv(dir / "true_operator.csv", a.transpose());
  write_matrix_csv(dir / "true_m.csv", truth.transpose());
  Json j = base_report("simulate");
  j["config"] = {{"preset", separability_name(preset)},
                 {"design", design_name(design.kind)},
                 {"M", o.m},
                 {"N", o.n},
                 {"T", o.length},
                 {"true_m", to_json(truth)},
                 {"noise_scale", o.noise_scale},
                 {"seed", o.seed},
                 {"out_dir", o.out_dir}};
  j["noise_bands"] = bands_json(spectra.noise_bands);
  write_text_file(dir / "simulate_report.json", dump(j));
  out << "wrote " << o.n << " training samples and one observation to " << o.out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Operator training, scaling factors and simplex-constrained Bayesian inversion",
               "simplex-uq"};
  app.set_version_flag("--version", SIMPLEX_UQ_VERSION);
  app.require_subcommand(1);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Fit the operator, scaling factors and noise covariance");
  train_cmd->add_option("--compositions", train.compositions, "N x M compositions CSV")->required();
  train_cmd->add_option("--observations", train.observations, "N x T observations CSV")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Output directory")->capture_default_str();
  train_cmd->add_option("--cov-mode", train.cov_mode, "mle, sample, diag or band:K")->capture_default_str();
  train_cmd->add_option("--threads", train.threads, "Worker threads")->capture_default_str();

  InvertOptions inv;
  auto* invert_cmd = app.add_subcommand("invert", "Invert one observation onto the simplex");
  invert_cmd->add_option("--model-dir", inv.model_dir, "Directory written by train")->required();
  invert_cmd->add_option("--observation", inv.observation, "Observation CSV (one row)")->required();
  invert_cmd->add_option("--out-dir", inv.out_dir, "Output directory")->capture_default_str();
  invert_cmd->add_option("--model", inv.model, "fixed or stochastic")->capture_default_str();
  invert_cmd->add_option("--seed", inv.mcmc.seed, "Chain seed")->capture_default_str();
  invert_cmd->add_option("--chain-length", inv.mcmc.chain_length, "Total MH steps")->capture_default_str();
  invert_cmd->add_option("--burn-in", inv.mcmc.burn_in, "Discarded steps")->capture_default_str();
  invert_cmd->add_option("--thinning", inv.mcmc.thinning, "Keep every k-th step")->capture_default_str();
  invert_cmd->add_option("--scale", inv.mcmc.scale, "Initial proposal scale")->capture_default_str();
  invert_cmd->add_flag("--no-adapt", inv.no_adapt, "Keep the proposal scale fixed");
  invert_cmd->add_option("--z-samples", inv.mcmc.z_mc_samples, "Draws per simplex-mass estimate")->capture_default_str();
  invert_cmd->add_option("--z-threshold", inv.mcmc.z_threshold, "Jump length triggering the mass correction (negative: automatic)")->capture_default_str();
  invert_cmd->add_flag("--no-z-correction", inv.no_z, "Skip the truncation-mass correction");
  invert_cmd->add_option("--ci-level", inv.ci_level, "Ellipse confidence level")->capture_default_str();

  ScalingOptions sc;
  auto* scaling_cmd = app.add_subcommand("scaling", "Print variance scaling factors for a design");
  scaling_cmd->add_option("--design", sc.design, "pure, binary, multinomial, dmult-replace, dmult-noreplace, uniform, pseudo-uniform")->required();
  scaling_cmd->add_option("--m", sc.m, "Endmembers")->required();
  scaling_cmd->add_option("--n", sc.n, "Training samples");
  scaling_cmd->add_option("--empirical", sc.empirical, "N x M compositions CSV");
  scaling_cmd->add_option("--json-out", sc.json_out, "Also write JSON here");

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic training set and observation");
  simulate_cmd->add_option("--preset", sim.preset, "easy or hard")->capture_default_str();
  simulate_cmd->add_option("--design", sim.design, "Training design")->capture_default_str();
  simulate_cmd->add_option("--m", sim.m, "Endmembers")->capture_default_str();
  simulate_cmd->add_option("--n", sim.n, "Training samples")->capture_default_str();
  simulate_cmd->add_option("--T", sim.length, "Observation length")->capture_default_str();
  simulate_cmd->add_option("--true-m", sim.true_m, "True composition of the observation")->delimiter(',');
  simulate_cmd->add_option("--noise-scale", sim.noise_scale, "Noise multiplier")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Seed")->capture_default_str();
  simulate_cmd->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();

  std::string kind;
  std::string config_path;
  std::string exp_out = ".";
  int exp_threads = 1;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a synthetic experiment from a JSON config");
  exp_cmd->add_option("kind", kind, "gamma, inclusion or single")->required();
  exp_cmd->add_option("config", config_path, "Config JSON")->required();
  exp_cmd->add_option("--out-dir", exp_out, "Output directory")->capture_default_str();
  exp_cmd->add_option("--threads", exp_threads, "Worker threads")->capture_default_str();

  if (argc > 1 && argv[1][0] != '-') {
    const std::string first = argv[1];
    const auto subs = app.get_subcommands([&](CLI::App* sub) { return sub->get_name() == first; });
    if (subs.empty()) {
      err << "unknown subcommand '" << first << "'\n" << app.help();
      return static_cast<int>(ExitCode::kUnknownSubcommand);
    }
  }

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, out, err);
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*train_cmd) return cmd_train(train, out);
    if (*invert_cmd) return cmd_invert(inv, out, err);
    if (*scaling_cmd) return cmd_scaling(sc, out);
    if (*simulate_cmd) return cmd_simulate(sim, out);
    if (*exp_cmd) {
      if (kind != "gamma" && kind != "inclusion" && kind != "single") {
        err << "unknown experiment '" << kind << "'\n" << kExperimentUsage;
        return static_cast<int>(ExitCode::kUnknownSubcommand);
      }
      if (exp_threads < 1) throw ParameterError("--threads must be >= 1");
      const Json raw = parse_config_file(config_path);
      const fs::path dir = exp_out;
      if (kind == "gamma") return run_gamma(raw, dir, exp_threads, out);
      if (kind == "inclusion") return run_inclusion(raw, dir, exp_threads, out, err);
      return run_single(raw, dir, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (e.exit_code() == ExitCode::kUsage) err << "run 'simplex-uq --help' for usage\n";
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace simplex_uq
