#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pnp/config.hpp"
#include "pnp/denoiser.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/image_io.hpp"
#include "pnp/observe.hpp"
#include "pnp/phantom.hpp"
#include "pnp/radon.hpp"
#include "pnp/schedule.hpp"
#include "pnp/solvers.hpp"

namespace pnp {

/// Type-erased denoiser so the harness can mix Denoiser / ScaledDenoiser.
class AnyDenoiser {
 public:
  template <ImageMap D>
  explicit AnyDenoiser(D den) : fn_([d = std::move(den)](const Vec& v) { return d.apply(v); }) {}
  Vec apply(const Vec& x) const { return fn_(x); }

 private:
  std::function<Vec(const Vec&)> fn_;
};

struct DenoiserSpec {
  std::string kind = "nlm";
  double theta = 0.5;            // blend mixing weight
  std::string blur = "gaussian"; // blend blur kind: gaussian | box
  double blur_sigma = 1.5;
  int blur_radius = 1;
  double sigma = 1.0;            // gaussian denoiser
  int radius = 1;                // median window radius
  int patch_radius = 1;          // nlm
  int window_radius = 4;         // nlm
  double h = 0.1;                // nlm filter strength
  double gamma = 1.0;            // denoiser scaling
};

struct ExperimentConfig {
  std::string scenario = "custom";  // low_dose | sparse_view | custom
  int width = 64;
  int height = 64;
  int num_angles = 90;
  int num_detectors = 0;  // 0 -> ceil(sqrt(2) * width)
  double I0 = 1e4;
  std::string fidelity = "least_squares";  // least_squares | pwls
  double ridge_eps = 0.0;
  int K = 10;
  std::string partition = "strided";  // contiguous | strided | shuffled
  std::vector<std::string> solvers = {"stochastic_pnp_admm"};
  std::string tau = "1";            // <number> | auto (K / (2 L), matching the fidelity scale)
  std::string eta = "protocol";     // protocol | theorem1 | <number>
  std::string inner_iters = "10";   // <number> | theorem1
  std::string momentum = "fista";   // zero | fista
  std::string sampling = "with_replacement";  // with_replacement | epoch_shuffle
  DenoiserSpec denoiser;
  std::vector<std::uint64_t> seeds = {1};
  int outer_iters = 0;   // per-solver iteration budget; 0 -> derive from datapasses
  int datapasses = 20;
  std::string output_dir = "runs/out";
  bool record_wall_ms = false;
  double attenuation_target = 3.0;
  double early_stop_residual = 0.0;
  double prox_tol = 1e-10;
};

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

inline const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> s = {"pnp_fista", "pnp_sgd", "pnp_admm",
                                             "stochastic_pnp_admm"};
  return s;
}

/**
 * Builds an ExperimentConfig from the key-value format. Scenario presets are
 * applied first, explicit keys override everything except the preset
 * invariants (low_dose pins I0 = 1e3 with PWLS; sparse_view pins I0 = 1e4
 * with least squares), which validate() enforces.
 */
inline ExperimentConfig config_from_key_values(KeyValueMap kv) {
  ExperimentConfig cfg;
  if (auto it = kv.find("scenario"); it != kv.end()) cfg.scenario = it->second;
  if (cfg.scenario == "low_dose") {
    cfg.width = cfg.height = 64;
    cfg.num_angles = 180;
    cfg.num_detectors = 91;
    cfg.I0 = 1e3;
    cfg.fidelity = "pwls";
  } else if (cfg.scenario == "sparse_view") {
    cfg.width = cfg.height = 128;
    cfg.num_angles = 45;
    cfg.num_detectors = 181;
    cfg.I0 = 1e4;
    cfg.fidelity = "least_squares";
  }
  std::vector<std::string> errors;
  auto take_int = [&](const char* key, int& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      double v;
      if (detail::parse_double(it->second, v) && v == static_cast<int>(v))
        out = static_cast<int>(v);
      else
        errors.push_back(std::string(key) + ": not an integer: " + it->second);
      kv.erase(it);
    }
  };
  auto take_double = [&](const char* key, double& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      double v;
      if (detail::parse_double(it->second, v))
        out = v;
      else
        errors.push_back(std::string(key) + ": not a number: " + it->second);
      kv.erase(it);
    }
  };
  auto take_string = [&](const char* key, std::string& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      out = it->second;
      kv.erase(it);
    }
  };
  auto take_bool = [&](const char* key, bool& out) {
    if (auto it = kv.find(key); it != kv.end()) {
      if (it->second == "true" || it->second == "1")
        out = true;
      else if (it->second == "false" || it->second == "0")
        out = false;
      else
        errors.push_back(std::string(key) + ": not a bool: " + it->second);
      kv.erase(it);
    }
  };

  kv.erase("scenario");
  take_int("width", cfg.width);
  take_int("height", cfg.height);
  take_int("num_angles", cfg.num_angles);
  take_int("num_detectors", cfg.num_detectors);
  take_double("I0", cfg.I0);
  take_string("fidelity", cfg.fidelity);
  take_double("ridge_eps", cfg.ridge_eps);
  take_int("K", cfg.K);
  take_string("partition", cfg.partition);
  if (auto it = kv.find("solver"); it != kv.end()) {
    cfg.solvers = split_list(it->second);
    kv.erase(it);
  }
  take_string("tau", cfg.tau);
  take_string("eta", cfg.eta);
  take_string("inner_iters", cfg.inner_iters);
  take_string("momentum", cfg.momentum);
  take_string("sampling", cfg.sampling);
  take_string("denoiser", cfg.denoiser.kind);
  take_double("theta", cfg.denoiser.theta);
  take_string("blur", cfg.denoiser.blur);
  take_double("blur_sigma", cfg.denoiser.blur_sigma);
  take_int("blur_radius", cfg.denoiser.blur_radius);
  take_double("sigma", cfg.denoiser.sigma);
  take_int("radius", cfg.denoiser.radius);
  take_int("patch_radius", cfg.denoiser.patch_radius);
  take_int("window_radius", cfg.denoiser.window_radius);
  take_double("h", cfg.denoiser.h);
  take_double("gamma", cfg.denoiser.gamma);
  if (auto it = kv.find("seeds"); it != kv.end()) {
    cfg.seeds.clear();
    for (const std::string& s : split_list(it->second)) {
      try {
        cfg.seeds.push_back(std::stoull(s));
      } catch (...) {
        errors.push_back("seeds: not an integer: " + s);
      }
    }
    kv.erase(it);
  }
  take_int("outer_iters", cfg.outer_iters);
  take_int("datapasses", cfg.datapasses);
  take_string("output_dir", cfg.output_dir);
  take_bool("record_wall_ms", cfg.record_wall_ms);
  take_double("attenuation_target", cfg.attenuation_target);
  take_double("early_stop_residual", cfg.early_stop_residual);
  take_double("prox_tol", cfg.prox_tol);

  for (const auto& [key, value] : kv)
    if (key.rfind("resolved_", 0) != 0)  // manifests carry resolved_* info keys
      errors.push_back("unknown key: " + key);
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

inline ExperimentConfig config_from_file(const std::filesystem::path& path) {
  return config_from_key_values(parse_key_values_file(path));
}

/// Checks every constraint and reports all violations at once.
inline void validate(const ExperimentConfig& cfg) {
  std::vector<std::string> v;
  auto is_number = [](const std::string& s) {
    double x;
    return detail::parse_double(s, x);
  };
  if (cfg.scenario != "low_dose" && cfg.scenario != "sparse_view" && cfg.scenario != "custom")
    v.push_back("scenario must be low_dose, sparse_view or custom");
  if (cfg.width < 8 || cfg.height < 8) v.push_back("image must be at least 8x8");
  if (cfg.num_angles < 1) v.push_back("num_angles must be >= 1");
  if (cfg.num_detectors < 0) v.push_back("num_detectors must be >= 0 (0 = auto)");
  if (!(cfg.I0 > 0)) v.push_back("I0 must be positive");
  if (cfg.fidelity != "least_squares" && cfg.fidelity != "pwls")
    v.push_back("fidelity must be least_squares or pwls");
  if (cfg.scenario == "low_dose" && (cfg.I0 != 1e3 || cfg.fidelity != "pwls"))
    v.push_back("low_dose preset requires I0 = 1000 and pwls fidelity");
  if (cfg.scenario == "sparse_view" && (cfg.I0 != 1e4 || cfg.fidelity != "least_squares"))
    v.push_back("sparse_view preset requires I0 = 10000 and least_squares fidelity");
  if (cfg.ridge_eps < 0) v.push_back("ridge_eps must be >= 0");
  if (cfg.K < 1) v.push_back("K must be >= 1");
  try {
    partition_strategy_from_string(cfg.partition);
  } catch (const InputError& e) {
    v.push_back(e.what());
  }
  if (cfg.solvers.empty()) v.push_back("at least one solver required");
  for (const std::string& s : cfg.solvers)
    if (std::find(known_solvers().begin(), known_solvers().end(), s) == known_solvers().end())
      v.push_back("unknown solver: " + s);
  {
    double tau_num;
    if (cfg.tau != "auto" && (!detail::parse_double(cfg.tau, tau_num) || !(tau_num > 0)))
      v.push_back("tau must be auto or a positive number");
  }
  if (cfg.eta != "protocol" && cfg.eta != "theorem1" && !is_number(cfg.eta))
    v.push_back("eta must be protocol, theorem1 or a number");
  if (cfg.inner_iters != "theorem1" && !is_number(cfg.inner_iters))
    v.push_back("inner_iters must be theorem1 or a number");
  if ((cfg.eta == "theorem1") != (cfg.inner_iters == "theorem1"))
    v.push_back("eta and inner_iters must both be theorem1 or neither");
  if (cfg.eta == "theorem1" && cfg.momentum != "zero")
    v.push_back("theorem1 schedule requires momentum = zero");
  if (cfg.momentum != "zero" && cfg.momentum != "fista")
    v.push_back("momentum must be zero or fista");
  if (cfg.sampling != "with_replacement" && cfg.sampling != "epoch_shuffle")
    v.push_back("sampling must be with_replacement or epoch_shuffle");
  const std::string& dk = cfg.denoiser.kind;
  if (dk != "identity" && dk != "blend" && dk != "gaussian" && dk != "median" && dk != "nlm")
    v.push_back("unknown denoiser: " + dk);
  if (!(cfg.denoiser.gamma > 0)) v.push_back("gamma must be positive");
  if (cfg.seeds.empty()) v.push_back("at least one seed required");
  if (cfg.outer_iters < 0) v.push_back("outer_iters must be >= 0");
  if (cfg.outer_iters == 0 && cfg.datapasses < 1)
    v.push_back("datapasses must be >= 1 when outer_iters is 0");
  if (cfg.output_dir.empty()) v.push_back("output_dir required");
  if (!(cfg.prox_tol > 0)) v.push_back("prox_tol must be positive");
  if (!v.empty()) {
    std::string msg = "invalid config:";
    for (const std::string& e : v) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

inline Denoiser build_base_denoiser(const DenoiserSpec& spec, int width, int height) {
  if (spec.kind == "identity") return Denoiser::identity(width, height);
  if (spec.kind == "blend") {
    const BlurKind blur = (spec.blur == "box") ? BlurKind::box : BlurKind::gaussian;
    const double param = (blur == BlurKind::box) ? spec.blur_radius : spec.blur_sigma;
    return Denoiser::blend(width, height, spec.theta, blur, param);
  }
  if (spec.kind == "gaussian") return Denoiser::gaussian(width, height, spec.sigma);
  if (spec.kind == "median") return Denoiser::median(width, height, spec.radius);
  if (spec.kind == "nlm")
    return Denoiser::nlm(width, height, spec.patch_radius, spec.window_radius, spec.h);
  throw ConfigError("unknown denoiser kind: " + spec.kind);
}

inline AnyDenoiser build_denoiser(const DenoiserSpec& spec, int width, int height) {
  Denoiser base = build_base_denoiser(spec, width, height);
  if (spec.gamma == 1.0) return AnyDenoiser(std::move(base));
  return AnyDenoiser(ScaledDenoiser(std::move(base), spec.gamma));
}

struct SolverSummary {
  std::string solver;
  std::uint64_t seed = 0;
  double final_err = 0.0;
  double final_fp_residual = 0.0;
  bool diverged = false;
};

struct RunArtifacts {
  std::filesystem::path dir;
  bool all_ok = true;
  std::vector<SolverSummary> summaries;
};

/// Output root override for relative output_dir paths.
inline std::filesystem::path resolve_output_dir(const std::string& output_dir) {
  std::filesystem::path p(output_dir);
  if (p.is_relative())
    if (const char* root = std::getenv("PNPKIT_OUTPUT_ROOT")) p = std::filesystem::path(root) / p;
  return p;
}

namespace detail {

struct ResolvedInstance {
  std::shared_ptr<SparseOperator> op;
  Phantom truth;        // attenuation-scaled phantom actually observed
  double atten_scale = 1.0;
  CtGeometry geom;
};

inline ResolvedInstance build_instance(const ExperimentConfig& cfg) {
  ResolvedInstance inst;
  const int detectors =
      cfg.num_detectors > 0 ? cfg.num_detectors : default_detector_count(cfg.width);
  inst.geom = make_parallel_geometry(cfg.num_angles, detectors);
  inst.op = std::make_shared<SparseOperator>(build_radon(inst.geom, cfg.width, cfg.height));
  inst.truth = shepp_logan(cfg.width, cfg.height);
  const Vec proj = inst.op->apply(inst.truth.pixels);
  const double max_proj = *std::max_element(proj.begin(), proj.end());
  if (max_proj > 0 && cfg.attenuation_target > 0) {
    inst.atten_scale = cfg.attenuation_target / max_proj;
    scale(inst.truth.pixels, inst.atten_scale);
  }
  return inst;
}

inline Fidelity build_fidelity(const ExperimentConfig& cfg, const ResolvedInstance& inst,
                               const CtObservation& obs, SamplerRng& rng) {
  Partition part = partition_rows(inst.op->rows(), cfg.K, rng,
                                  partition_strategy_from_string(cfg.partition));
  if (cfg.fidelity == "pwls")
    return Fidelity::pwls(inst.op, obs.log_sino, obs.weights, std::move(part), cfg.ridge_eps);
  return Fidelity::least_squares(inst.op, obs.log_sino, std::move(part), cfg.ridge_eps);
}

// Protocol step sizes: eta = 1/L in the usual Lipschitz convention, i.e.
// 1/(2L) for the gradient methods and 1/(2 tau L + 1) for the inner objective
// of the stochastic ADMM (the constants() values are in the halved convention).
inline double protocol_eta(const std::string& solver, double tau, double L) {
  if (solver == "stochastic_pnp_admm") return 1.0 / (2.0 * tau * L + 1.0);
  return 1.0 / (2.0 * L);
}

inline int solver_budget(const ExperimentConfig& cfg, const std::string& solver, int inner_const) {
  if (cfg.outer_iters > 0) return cfg.outer_iters;
  if (solver == "pnp_sgd") return cfg.datapasses * cfg.K;
  if (solver == "stochastic_pnp_admm")
    return std::max(1, static_cast<int>(std::ceil(
                           static_cast<double>(cfg.datapasses) * cfg.K / inner_const)));
  return cfg.datapasses;  // pnp_fista exact; pnp_admm by outer count
}

}  // namespace detail

/**
 * Runs every configured solver on the configured CT instance, once per seed,
 * and writes per-run metric CSVs, reconstruction images, the observation, the
 * ground truth, and a replayable manifest.
 */
inline RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  namespace fs = std::filesystem;
  RunArtifacts artifacts;
  artifacts.dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(artifacts.dir);

  const detail::ResolvedInstance inst = detail::build_instance(cfg);
  write_image(artifacts.dir / "truth", cfg.width, cfg.height, inst.truth.pixels);
  const std::uint64_t truth_checksum = detail::fnv1a_file(artifacts.dir / "truth.txt");

  const AnyDenoiser den = build_denoiser(cfg.denoiser, cfg.width, cfg.height);
  const Vec z0 = zeros(inst.op->cols());

  std::map<std::string, std::string> info;  // resolved values for the manifest
  info["resolved_n"] = std::to_string(inst.op->rows());
  info["resolved_d"] = std::to_string(inst.op->cols());
  info["resolved_nnz"] = std::to_string(inst.op->nnz());
  info["resolved_attenuation_scale"] = detail::fmt_double(inst.atten_scale);
  info["resolved_truth_checksum"] = std::to_string(truth_checksum);

  for (std::uint64_t seed : cfg.seeds) {
    SamplerRng rng(seed);
    SamplerRng observe_rng = rng.fork("observe");
    const CtObservation obs = poisson_observe(*inst.op, inst.truth, cfg.I0, observe_rng);
    {
      std::ofstream out(artifacts.dir / ("observation_seed" + std::to_string(seed) + ".csv"));
      write_observation_csv(obs, inst.geom, out);
    }
    SamplerRng partition_rng = rng.fork("partition");
    const Fidelity fid = detail::build_fidelity(cfg, inst, obs, partition_rng);
    const FidelityConstants consts = fid.constants();
    info["resolved_mu_seed" + std::to_string(seed)] = detail::fmt_double(consts.mu);
    info["resolved_L_seed" + std::to_string(seed)] = detail::fmt_double(consts.L_minibatch);
    // tau = auto matches one proximal pull to a datapass of 1/(2L) inner steps
    double tau_num = 1.0;
    if (cfg.tau == "auto")
      tau_num = cfg.K / (4.0 * consts.L_minibatch);
    else
      detail::parse_double(cfg.tau, tau_num);
    info["resolved_tau_seed" + std::to_string(seed)] = detail::fmt_double(tau_num);

    for (const std::string& solver : cfg.solvers) {
      RunOptions opt;
      opt.ground_truth = &inst.truth.pixels;
      opt.record_wall_ms = cfg.record_wall_ms;
      opt.early_stop_residual = cfg.early_stop_residual;
      opt.prox_tol = cfg.prox_tol;
      SamplerRng solver_rng = rng.fork("solver:" + solver);

      double eta_num = 0.0;
      if (cfg.eta == "protocol")
        eta_num = detail::protocol_eta(solver, tau_num, consts.L_minibatch);
      else if (cfg.eta != "theorem1")
        detail::parse_double(cfg.eta, eta_num);

      RunResult res;
      if (solver == "pnp_fista") {
        res = run_pnp_fista(fid, den, eta_num, z0, detail::solver_budget(cfg, solver, 1), opt);
      } else if (solver == "pnp_sgd") {
        const auto momentum = cfg.momentum == "zero" ? Schedule::MomentumRule::zero
                                                     : Schedule::MomentumRule::fista;
        res = run_pnp_sgd(fid, den, eta_num, momentum, z0,
                          detail::solver_budget(cfg, solver, 1), solver_rng, opt,
                          cfg.sampling == "epoch_shuffle" ? SamplingMode::epoch_shuffle
                                                          : SamplingMode::with_replacement);
      } else if (solver == "pnp_admm") {
        res = run_pnp_admm(fid, den, tau_num, z0, detail::solver_budget(cfg, solver, 1), opt);
      } else {  // stochastic_pnp_admm
        Schedule sched;
        if (cfg.eta == "theorem1") {
          const auto [sigma_sq, xi] = estimate_adaptive_bounds(fid, tau_num, z0, z0);
          double beta = 1.0;  // only the schedule validity check needs it
          if (auto b = build_base_denoiser(cfg.denoiser, cfg.width, cfg.height).beta_analytic())
            beta = *b;
          sched = make_theorem1_schedule(fid, beta, tau_num, sigma_sq, xi);
          info["resolved_sigma_sq_bound_seed" + std::to_string(seed)] =
              detail::fmt_double(sigma_sq);
          info["resolved_xi_bound_seed" + std::to_string(seed)] = detail::fmt_double(xi);
        } else {
          sched.tau = tau_num;
          sched.eta_rule = Schedule::EtaRule::constant;
          sched.eta_const = eta_num;
          sched.inner_rule = Schedule::InnerRule::constant;
          double inner = 0;
          detail::parse_double(cfg.inner_iters, inner);
          sched.inner_const = std::max(1, static_cast<int>(inner));
          sched.momentum_rule = cfg.momentum == "zero" ? Schedule::MomentumRule::zero
                                                       : Schedule::MomentumRule::fista;
          sched.sampling = cfg.sampling == "epoch_shuffle" ? SamplingMode::epoch_shuffle
                                                           : SamplingMode::with_replacement;
        }
        res = run_stochastic_pnp_admm(fid, den, sched, z0, z0,
                                      detail::solver_budget(cfg, solver, sched.inner_const),
                                      solver_rng, opt);
        info["resolved_eta1_" + solver + "_seed" + std::to_string(seed)] =
            detail::fmt_double(sched.eta_at(1));
      }
      if (solver != "stochastic_pnp_admm" && solver != "pnp_admm")
        info["resolved_eta_" + solver + "_seed" + std::to_string(seed)] =
            detail::fmt_double(eta_num);

      const std::string stem = solver + "_seed" + std::to_string(seed);
      {
        std::ofstream out(artifacts.dir / (stem + "_metrics.csv"));
        write_metrics_csv(res.metrics, out);
      }
      write_image(artifacts.dir / (stem + "_recon"), cfg.width, cfg.height, res.state.x);
      SolverSummary summary;
      summary.solver = solver;
      summary.seed = seed;
      summary.diverged = res.metrics.diverged;
      summary.final_err = dist(res.state.x, inst.truth.pixels);
      summary.final_fp_residual =
          res.metrics.rows.empty() ? 0.0 : res.metrics.rows.back().fp_residual;
      artifacts.summaries.push_back(summary);
      artifacts.all_ok = artifacts.all_ok && !res.metrics.diverged;
      info["resolved_status_" + stem] = res.metrics.diverged ? "diverged" : "ok";
      if (res.metrics.diverged) info["resolved_divergence_" + stem] = res.metrics.note;
    }
  }

  // Denoiser residual-Lipschitz estimate on truth-scale probes, for the record.
  {
    SamplerRng rng(0xbe7a);
    std::vector<Vec> probes = {inst.truth.pixels};
    Vec noisy = inst.truth.pixels;
    for (double& v : noisy) v += 0.05 * inst.atten_scale * rng.normal();
    probes.push_back(noisy);
    Denoiser base = build_base_denoiser(cfg.denoiser, cfg.width, cfg.height);
    double beta_val;
    if (auto b = base.beta_analytic())
      beta_val = *b;
    else
      beta_val = estimate_beta(AnyDenoiser(ScaledDenoiser(std::move(base), cfg.denoiser.gamma)),
                               probes, rng, 6);
    info["resolved_beta"] = detail::fmt_double(beta_val);
  }

  std::ofstream manifest(artifacts.dir / "manifest.txt");
  manifest << "# pnpkit run manifest; replayable as a config file\n";
  manifest << "scenario = " << cfg.scenario << '\n';
  manifest << "width = " << cfg.width << '\n';
  manifest << "height = " << cfg.height << '\n';
  manifest << "num_angles = " << cfg.num_angles << '\n';
  manifest << "num_detectors = "
           << (cfg.num_detectors > 0 ? cfg.num_detectors : default_detector_count(cfg.width))
           << '\n';
  manifest << "I0 = " << detail::fmt_double(cfg.I0) << '\n';
  manifest << "fidelity = " << cfg.fidelity << '\n';
  manifest << "ridge_eps = " << detail::fmt_double(cfg.ridge_eps) << '\n';
  manifest << "K = " << cfg.K << '\n';
  manifest << "partition = " << cfg.partition << '\n';
  manifest << "solver = ";
  for (std::size_t i = 0; i < cfg.solvers.size(); ++i)
    manifest << (i ? "," : "") << cfg.solvers[i];
  manifest << '\n';
  manifest << "tau = " << cfg.tau << '\n';
  manifest << "eta = " << cfg.eta << '\n';
  manifest << "inner_iters = " << cfg.inner_iters << '\n';
  manifest << "momentum = " << cfg.momentum << '\n';
  manifest << "sampling = " << cfg.sampling << '\n';
  manifest << "denoiser = " << cfg.denoiser.kind << '\n';
  manifest << "theta = " << detail::fmt_double(cfg.denoiser.theta) << '\n';
  manifest << "blur = " << cfg.denoiser.blur << '\n';
  manifest << "blur_sigma = " << detail::fmt_double(cfg.denoiser.blur_sigma) << '\n';
  manifest << "blur_radius = " << cfg.denoiser.blur_radius << '\n';
  manifest << "sigma = " << detail::fmt_double(cfg.denoiser.sigma) << '\n';
  manifest << "radius = " << cfg.denoiser.radius << '\n';
  manifest << "patch_radius = " << cfg.denoiser.patch_radius << '\n';
  manifest << "window_radius = " << cfg.denoiser.window_radius << '\n';
  manifest << "h = " << detail::fmt_double(cfg.denoiser.h) << '\n';
  manifest << "gamma = " << detail::fmt_double(cfg.denoiser.gamma) << '\n';
  manifest << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    manifest << (i ? "," : "") << cfg.seeds[i];
  manifest << '\n';
  manifest << "outer_iters = " << cfg.outer_iters << '\n';
  manifest << "datapasses = " << cfg.datapasses << '\n';
  manifest << "output_dir = " << cfg.output_dir << '\n';
  manifest << "record_wall_ms = " << (cfg.record_wall_ms ? "true" : "false") << '\n';
  manifest << "attenuation_target = " << detail::fmt_double(cfg.attenuation_target) << '\n';
  manifest << "early_stop_residual = " << detail::fmt_double(cfg.early_stop_residual) << '\n';
  manifest << "prox_tol = " << detail::fmt_double(cfg.prox_tol) << '\n';
  for (const auto& [k, v] : info) manifest << k << " = " << v << '\n';
  return artifacts;
}

struct GammaRow {
  double gamma = 1.0;
  double final_err = 0.0;
  bool diverged = false;
};

struct GridSearchError : std::runtime_error {
  GridSearchError(std::string msg, std::vector<GammaRow> rows)
      : std::runtime_error(std::move(msg)), table(std::move(rows)) {}
  std::vector<GammaRow> table;
};

/**
 * Runs the configured solver once per gamma (first solver, first seed) and
 * ranks by final reconstruction error; ties keep the smaller gamma.
 */
inline std::pair<double, std::vector<GammaRow>> grid_search_gamma(
    const ExperimentConfig& cfg, const std::vector<double>& grid) {
  if (grid.empty()) throw InputError("grid_search_gamma: empty grid");
  validate(cfg);
  std::vector<GammaRow> table;
  for (double gamma : grid) {
    ExperimentConfig sub = cfg;
    sub.denoiser.gamma = gamma;
    sub.seeds = {cfg.seeds.front()};
    sub.solvers = {cfg.solvers.front()};
    sub.output_dir = cfg.output_dir + "/gamma_" + detail::fmt_double(gamma);
    const RunArtifacts art = run_experiment(sub);
    GammaRow row;
    row.gamma = gamma;
    row.final_err = art.summaries.front().final_err;
    row.diverged = art.summaries.front().diverged;
    table.push_back(row);
  }
  const GammaRow* best = nullptr;
  for (const GammaRow& row : table)
    if (!row.diverged && (!best || row.final_err < best->final_err)) best = &row;
  if (!best) throw GridSearchError("grid_search_gamma: every run diverged", table);
  return {best->gamma, table};
}

/**
 * Aligned comparison across runs sharing a ground truth: log10 error against
 * datapasses, denoiser calls and wall time, one CSV row per recorded
 * iteration. Mismatched ground truths are fatal.
 */
inline void compare_report(const std::vector<std::filesystem::path>& run_dirs,
                           std::ostream& out) {
  namespace fs = std::filesystem;
  if (run_dirs.size() < 1) throw InputError("compare_report: no run directories");
  std::string checksum;
  out << "run,solver,seed,outer_iter,datapasses,denoiser_calls,wall_ms,err_log10,fp_residual\n";
  for (const fs::path& dir : run_dirs) {
    const KeyValueMap manifest = parse_key_values_file(dir / "manifest.txt");
    const auto chk = manifest.find("resolved_truth_checksum");
    if (chk == manifest.end())
      throw InputError("compare_report: manifest lacks a ground-truth checksum: " +
                       dir.string());
    if (checksum.empty())
      checksum = chk->second;
    else if (checksum != chk->second)
      throw InputError("compare_report: ground truths differ between runs");
    const int K = std::stoi(manifest.at("K"));

    std::vector<fs::path> metric_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > 12 && name.substr(name.size() - 12) == "_metrics.csv")
        metric_files.push_back(entry.path());
    }
    std::sort(metric_files.begin(), metric_files.end());
    for (const fs::path& file : metric_files) {
      const std::string name = file.filename().string();
      const auto seed_pos = name.rfind("_seed");
      const std::string solver = name.substr(0, seed_pos);
      const std::string seed = name.substr(seed_pos + 5, name.size() - 12 - (seed_pos + 5));
      std::ifstream in(file);
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 7) throw InputError("compare_report: malformed row in " + name);
        const double grad_evals = std::stod(fields[4]);
        out << dir.filename().string() << ',' << solver << ',' << seed << ',' << fields[0]
            << ',' << detail::fmt_double(grad_evals / K) << ',' << fields[5] << ','
            << fields[6] << ',' << fields[3] << ',' << fields[2] << '\n';
      }
    }
  }
}

}  // namespace pnp
