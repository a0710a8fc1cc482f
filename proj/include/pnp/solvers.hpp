#pragma once

#include <string>
#include <utility>

#include "pnp/denoiser.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/partition.hpp"
#include "pnp/prox.hpp"
#include "pnp/rng.hpp"
#include "pnp/schedule.hpp"
#include "pnp/solver_state.hpp"
#include "pnp/vec.hpp"

namespace pnp {

template <ImageMap D>
struct DrStep {
  Vec y;    // prox_{tau f}(z)
  Vec x;    // D(2y - z)
  Vec t_z;  // T(z) = z + x - y
  int cg_iterations = 0;
};

/// One application of T = 1/2 I + 1/2 (2D - I)(2 prox_{tau f} - I), computed
/// as the PnP-ADMM update y = prox(z); x = D(2y - z); T(z) = z + x - y.
template <ImageMap D>
DrStep<D> dr_step(const Fidelity& fid, const D& den, double tau, const Vec& z,
                  double prox_tol = 1e-10) {
  ProxResult p = prox_exact_full(fid, tau, z, prox_tol);
  Vec reflected(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) reflected[i] = 2.0 * p.x[i] - z[i];
  Vec x = den.apply(reflected);
  Vec t_z(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) t_z[i] = z[i] + x[i] - p.x[i];
  return {std::move(p.x), std::move(x), std::move(t_z), p.cg_iterations};
}

template <ImageMap D>
Vec dr_operator(const Fidelity& fid, const D& den, double tau, const Vec& z,
                double prox_tol = 1e-10) {
  return dr_step(fid, den, tau, z, prox_tol).t_z;
}

/**
 * PnP-ADMM with exact proximal steps: z^{k+1} = T(z^k).
 *
 * One denoiser call per outer iteration. Gradient-work accounting charges K
 * block evaluations per CG iteration (each CG iteration sweeps the full data
 * once, like a full gradient).
 */
template <ImageMap D>
RunResult run_pnp_admm(const Fidelity& fid, const D& den, double tau, const Vec& z0,
                       int outer_iters, const RunOptions& opt = {}) {
  if (outer_iters < 1) throw InputError("run_pnp_admm: outer_iters must be >= 1");
  check_size(z0, static_cast<std::size_t>(fid.dim()), "run_pnp_admm z0");
  RunResult res;
  res.state.z = z0;
  res.state.x = z0;
  detail::MetricsRecorder recorder(opt);
  long long grad_evals = 0, den_calls = 0;
  for (int k = 1; k <= outer_iters; ++k) {
    DrStep<D> step = dr_step(fid, den, tau, res.state.z, opt.prox_tol);
    grad_evals += static_cast<long long>(fid.num_blocks()) * step.cg_iterations;
    ++den_calls;
    const double fp_residual = dist(step.t_z, res.state.z);
    if (opt.observer)
      opt.observer({k, step.cg_iterations, &res.state.z, &res.state.x, &step.y, &step.x,
                    &step.t_z});
    recorder.record(res.metrics, k, step.cg_iterations, fp_residual, step.x, grad_evals,
                    den_calls);
    res.state.y = std::move(step.y);
    res.state.x = std::move(step.x);
    res.state.z = std::move(step.t_z);
    res.state.k = k;
    if (opt.early_stop_residual > 0.0 && fp_residual < opt.early_stop_residual) break;
  }
  return res;
}

/**
 * Stochastic PnP-ADMM: the proximal step is approximated by N_k iterations of
 * minibatch SGD with momentum on the inner objective
 * (1/K) Σ_q [tau f_q(y) + 1/2 ||y - z^k||^2], then one denoiser call per outer
 * iteration.
 *
 * Inner update:  v_j = y_{j-1} - eta_k [tau ∇f_{S_j}(y_{j-1}) + y_{j-1} - z^k]
 * Momentum:      y_j = v_j + alpha_j (v_j - v_{j-1}),  v_0 = y_0
 * Outer update:  x^{k+1} = D(2 y_{N_k} - z^k);  z <- z + x^{k+1} - y_{N_k}
 * Warm start:    y^{k+1}_0 = x^{k+1}
 *
 * Blocks are sampled uniformly, with replacement by default. If an inner
 * iterate exceeds 1e6 ||z0|| + 1e6 the run stops and the partial result is
 * returned with metrics.diverged set.
 */
template <ImageMap D>
RunResult run_stochastic_pnp_admm(const Fidelity& fid, const D& den, const Schedule& sched,
                                  const Vec& z0, const Vec& y00, int outer_iters,
                                  SamplerRng& rng, const RunOptions& opt = {}) {
  if (outer_iters < 1) throw InputError("run_stochastic_pnp_admm: outer_iters must be >= 1");
  check_size(z0, static_cast<std::size_t>(fid.dim()), "run_stochastic_pnp_admm z0");
  check_size(y00, static_cast<std::size_t>(fid.dim()), "run_stochastic_pnp_admm y00");
  RunResult res;
  res.state.z = z0;
  res.state.x = y00;  // inner warm start for k = 1
  detail::MetricsRecorder recorder(opt);
  BlockSampler sampler(fid.num_blocks(), sched.sampling, rng);
  const double z0_norm = norm(z0);
  const double tau = sched.tau;
  long long grad_evals = 0, den_calls = 0;
  Vec v(fid.dim()), y_next(fid.dim());
  for (int k = 1; k <= outer_iters; ++k) {
    const double eta = sched.eta_at(k);
    const int inner_iters = sched.inner_iters_at(k);
    Vec y = res.state.x;
    Vec v_prev = y;
    for (int j = 1; j <= inner_iters; ++j) {
      const int block = sampler.next();
      const Vec g = fid.grad_minibatch(y, block);
      ++grad_evals;
      const double alpha = sched.momentum_at(j);
      for (std::size_t i = 0; i < y.size(); ++i) {
        v[i] = y[i] - eta * (tau * g[i] + y[i] - res.state.z[i]);
        y_next[i] = v[i] + alpha * (v[i] - v_prev[i]);
      }
      std::swap(v_prev, v);
      std::swap(y, y_next);
      if (detail::divergence_guard(y, z0_norm)) {
        res.metrics.diverged = true;
        res.metrics.note = "inner iterate diverged at outer " + std::to_string(k) + ", inner " +
                           std::to_string(j) + " (||y|| = " + std::to_string(norm(y)) + ")";
        res.state.y = std::move(y);
        res.state.v_prev = std::move(v_prev);
        return res;
      }
    }
    Vec reflected(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) reflected[i] = 2.0 * y[i] - res.state.z[i];
    Vec x_new = den.apply(reflected);
    ++den_calls;
    Vec z_new(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) z_new[i] = res.state.z[i] + x_new[i] - y[i];
    const double fp_residual = dist(z_new, res.state.z);
    if (opt.observer)
      opt.observer({k, inner_iters, &res.state.z, &res.state.x, &y, &x_new, &z_new});
    recorder.record(res.metrics, k, inner_iters, fp_residual, x_new, grad_evals, den_calls);
    res.state.y = std::move(y);
    res.state.v_prev = std::move(v_prev);
    res.state.x = std::move(x_new);
    res.state.z = std::move(z_new);
    res.state.k = k;
    if (opt.early_stop_residual > 0.0 && fp_residual < opt.early_stop_residual) break;
  }
  return res;
}

/**
 * PnP-SGD: x^k = D(z^{k-1} - eta ∇f_{S_k}(z^{k-1})), then the momentum step
 * z^k = x^k + alpha_k (x^k - x^{k-1}). One minibatch gradient and one denoiser
 * call per iteration.
 */
template <ImageMap D>
RunResult run_pnp_sgd(const Fidelity& fid, const D& den, double eta,
                      Schedule::MomentumRule momentum, const Vec& z0, int iters,
                      SamplerRng& rng, const RunOptions& opt = {},
                      SamplingMode sampling = SamplingMode::with_replacement) {
  if (!(eta >= 0.0)) throw InputError("run_pnp_sgd: eta must be >= 0");
  if (iters < 1) throw InputError("run_pnp_sgd: iters must be >= 1");
  check_size(z0, static_cast<std::size_t>(fid.dim()), "run_pnp_sgd z0");
  RunResult res;
  res.state.z = z0;
  res.state.x = z0;
  detail::MetricsRecorder recorder(opt);
  BlockSampler sampler(fid.num_blocks(), sampling, rng);
  const double z0_norm = norm(z0);
  long long grad_evals = 0, den_calls = 0;
  for (int k = 1; k <= iters; ++k) {
    const int block = sampler.next();
    Vec step = fid.grad_minibatch(res.state.z, block);
    ++grad_evals;
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = res.state.z[i] - eta * step[i];
    Vec x = den.apply(step);
    ++den_calls;
    const double alpha =
        (momentum == Schedule::MomentumRule::fista) ? static_cast<double>(k - 1) / (k + 3) : 0.0;
    Vec z_new(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      z_new[i] = x[i] + alpha * (x[i] - res.state.x[i]);
    const double fp_residual = dist(x, res.state.x);
    if (opt.observer) opt.observer({k, 0, &res.state.z, &res.state.x, nullptr, &x, &z_new});
    recorder.record(res.metrics, k, 0, fp_residual, x, grad_evals, den_calls);
    res.state.x = std::move(x);
    res.state.z = std::move(z_new);
    res.state.k = k;
    if (detail::divergence_guard(res.state.z, z0_norm)) {
      res.metrics.diverged = true;
      res.metrics.note = "iterate diverged at iteration " + std::to_string(k);
      return res;
    }
    if (opt.early_stop_residual > 0.0 && fp_residual < opt.early_stop_residual) break;
  }
  return res;
}

/**
 * PnP-FISTA: the full-gradient variant of run_pnp_sgd with the FISTA momentum
 * alpha_k = (k-1)/(k+3). Each iteration costs one full gradient (K block
 * evaluations) and one denoiser call.
 */
template <ImageMap D>
RunResult run_pnp_fista(const Fidelity& fid, const D& den, double eta, const Vec& z0, int iters,
                        const RunOptions& opt = {}) {
  if (!(eta >= 0.0)) throw InputError("run_pnp_fista: eta must be >= 0");
  if (iters < 1) throw InputError("run_pnp_fista: iters must be >= 1");
  check_size(z0, static_cast<std::size_t>(fid.dim()), "run_pnp_fista z0");
  RunResult res;
  res.state.z = z0;
  res.state.x = z0;
  detail::MetricsRecorder recorder(opt);
  const double z0_norm = norm(z0);
  long long grad_evals = 0, den_calls = 0;
  for (int k = 1; k <= iters; ++k) {
    Vec step = fid.grad(res.state.z);
    grad_evals += fid.num_blocks();
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = res.state.z[i] - eta * step[i];
    Vec x = den.apply(step);
    ++den_calls;
    const double alpha = static_cast<double>(k - 1) / (k + 3);
    Vec z_new(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      z_new[i] = x[i] + alpha * (x[i] - res.state.x[i]);
    const double fp_residual = dist(x, res.state.x);
    if (opt.observer) opt.observer({k, 0, &res.state.z, &res.state.x, nullptr, &x, &z_new});
    recorder.record(res.metrics, k, 0, fp_residual, x, grad_evals, den_calls);
    res.state.x = std::move(x);
    res.state.z = std::move(z_new);
    res.state.k = k;
    if (detail::divergence_guard(res.state.z, z0_norm)) {
      res.metrics.diverged = true;
      res.metrics.note = "iterate diverged at iteration " + std::to_string(k);
      return res;
    }
    if (opt.early_stop_residual > 0.0 && fp_residual < opt.early_stop_residual) break;
  }
  return res;
}

}  // namespace pnp
