#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "pnp/fidelity.hpp"
#include "pnp/partition.hpp"
#include "pnp/prox.hpp"
#include "pnp/vec.hpp"

namespace pnp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/**
 * Parameter pack for the stochastic inner/outer loops.
 *
 * The adaptive rules are, with mu0 = tau*mu + 1 and L0 = tau*L + 1 built from
 * the fidelity constants:
 *   eta_k = mu0 / (2 mu0 L0 + 2 k sigma^2)
 *   N_k   = ceil( 2 ln(max(k xi, e)) (L0/mu0 + k sigma^2 / mu0^2) ),  at least 1
 * and the momentum options are alpha_j = 0 or the FISTA-style (j-1)/(j+3).
 */
struct Schedule {
  enum class EtaRule { constant, adaptive };
  enum class InnerRule { constant, adaptive };
  enum class MomentumRule { zero, fista };

  double tau = 1.0;
  EtaRule eta_rule = EtaRule::constant;
  double eta_const = 0.0;
  InnerRule inner_rule = InnerRule::constant;
  int inner_const = 1;
  MomentumRule momentum_rule = MomentumRule::zero;
  double mu0 = 0.0;
  double L0 = 0.0;
  double sigma_sq_bound = 0.0;
  double xi_bound = 0.0;
  SamplingMode sampling = SamplingMode::with_replacement;

  /// Inner step size at outer iteration k (1-based).
  double eta_at(int k) const {
    if (eta_rule == EtaRule::constant) return eta_const;
    return mu0 / (2.0 * mu0 * L0 + 2.0 * k * sigma_sq_bound);
  }

  /// Inner iteration count at outer iteration k (1-based).
  int inner_iters_at(int k) const {
    if (inner_rule == InnerRule::constant) return inner_const;
    const double log_term = std::log(std::max(k * xi_bound, std::exp(1.0)));
    const double n = 2.0 * log_term * (L0 / mu0 + k * sigma_sq_bound / (mu0 * mu0));
    return static_cast<int>(std::clamp(std::ceil(n), 1.0, 1e9));
  }

  /// Momentum alpha_j at inner iteration j (1-based); resets every outer loop.
  double momentum_at(int j) const {
    if (momentum_rule == MomentumRule::zero) return 0.0;
    return static_cast<double>(j - 1) / (j + 3);
  }
};

/// Contraction factor of the Douglas-Rachford operator under a beta-residual
/// denoiser and mu-strongly-convex fidelity (A.2 convention); < 1 whenever
/// beta < 1 and tau > 1/(1 + beta - 2 beta^2).
inline double theorem_delta(double beta, double tau, double mu) {
  return (1.0 + beta + beta * tau * mu + 2.0 * beta * beta * tau * mu) /
         (1.0 + tau * mu + 2.0 * beta * tau * mu);
}

/// Smallest admissible outer step for the adaptive schedule.
inline double tau_lower_bound(double beta) { return 1.0 / (1.0 + beta - 2.0 * beta * beta); }

/**
 * Adaptive schedule with decreasing eta_k, growing N_k, zero momentum.
 * sigma_sq_bound and xi_bound must upper-bound sigma_k^2 and xi_k over the run
 * (see estimate_adaptive_bounds).
 */
inline Schedule make_theorem1_schedule(const Fidelity& fid, double beta, double tau,
                                       double sigma_sq_bound, double xi_bound,
                                       SamplingMode sampling = SamplingMode::with_replacement) {
  const FidelityConstants c = fid.constants();
  if (!(beta < 1.0))
    throw ConfigError("theorem1 schedule: requires beta < 1 (got beta = " + std::to_string(beta) + ")");
  if (beta < 0.0) throw ConfigError("theorem1 schedule: beta must be >= 0");
  if (!c.mu_positive)
    throw ConfigError("theorem1 schedule: fidelity is not strongly convex (mu = 0); "
                      "add a ridge or use a constant schedule");
  const double bound = tau_lower_bound(beta);
  if (!(tau > bound))
    throw ConfigError("theorem1 schedule: requires tau > 1/(1+beta-2beta^2) = " +
                      std::to_string(bound) + " (got tau = " + std::to_string(tau) + ")");
  if (!(sigma_sq_bound >= 0.0) || !(xi_bound >= 0.0))
    throw ConfigError("theorem1 schedule: sigma and xi bounds must be >= 0");
  Schedule s;
  s.tau = tau;
  s.eta_rule = Schedule::EtaRule::adaptive;
  s.inner_rule = Schedule::InnerRule::adaptive;
  s.momentum_rule = Schedule::MomentumRule::zero;
  s.mu0 = tau * c.mu + 1.0;
  s.L0 = tau * c.L_minibatch + 1.0;
  s.sigma_sq_bound = sigma_sq_bound;
  s.xi_bound = xi_bound;
  s.sampling = sampling;
  return s;
}

/**
 * Inner step size and iteration count that bring the inner loop to expected
 * squared prox error <= eps, given the exact per-iteration quantities
 * sigma_k^2 and xi_k:
 *   eta = mu0 eps / (2 eps mu0 L0 + 2 sigma_k^2)
 *   N   = ceil( 2 ln(xi_k / eps) (L0/mu0 + sigma_k^2/(mu0^2 eps)) ),  at least 1.
 */
inline std::pair<double, int> lemma1_inner_parameters(double mu0, double L0, double sigma_k_sq,
                                                      double xi_k, double eps) {
  if (!(eps > 0.0)) throw ConfigError("lemma1 parameters: eps must be positive");
  if (!(mu0 > 0.0) || !(L0 > 0.0)) throw ConfigError("lemma1 parameters: need mu0, L0 > 0");
  const double eta = mu0 * eps / (2.0 * eps * mu0 * L0 + 2.0 * sigma_k_sq);
  const double log_term = std::log(xi_k / eps);
  int n = 1;
  if (log_term > 0.0)
    n = std::max(1, static_cast<int>(std::ceil(
                        2.0 * log_term * (L0 / mu0 + sigma_k_sq / (mu0 * mu0 * eps)))));
  return {eta, n};
}

/// Exact mean over all K blocks of ||tau ∇f_k(y*) + y* - z||^2 at y* = prox(z).
inline double sigma_sq_at(const Fidelity& fid, double tau, const Vec& z, const Vec& y_star) {
  double acc = 0.0;
  for (int k = 0; k < fid.num_blocks(); ++k) {
    Vec g = fid.grad_minibatch(y_star, k);
    scale(g, tau);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += y_star[i] - z[i];
    acc += norm_sq(g);
  }
  return acc / fid.num_blocks();
}

/**
 * Run-start estimates of the uniform bounds sigma^2 >= sigma_k^2 and
 * xi >= xi_k needed by the adaptive schedule, taken at the initial point and
 * inflated by a safety factor (the analysis assumes such bounds exist but
 * gives no estimator).
 */
inline std::pair<double, double> estimate_adaptive_bounds(const Fidelity& fid, double tau,
                                                          const Vec& z0, const Vec& x0,
                                                          double safety = 4.0,
                                                          double prox_tol = 1e-10) {
  const Vec y_star = prox_exact(fid, tau, z0, prox_tol);
  const double sigma_sq = sigma_sq_at(fid, tau, z0, y_star);
  const double xi = norm_sq(sub(y_star, x0));
  return {safety * sigma_sq, safety * xi};
}

}  // namespace pnp
