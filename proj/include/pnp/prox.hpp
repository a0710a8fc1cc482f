#pragma once

#include <string>

#include "pnp/fidelity.hpp"
#include "pnp/vec.hpp"

namespace pnp {

/// Conjugate-gradient failure; carries the best iterate reached.
struct CgError : NumericError {
  CgError(std::string msg, Vec best_iterate, double residual_norm, int iters)
      : NumericError(std::move(msg)),
        best(std::move(best_iterate)),
        residual(residual_norm),
        iterations(iters) {}
  Vec best;
  double residual;
  int iterations;
};

struct ProxResult {
  Vec x;
  int cg_iterations = 0;
};

/**
 * Exact proximal step prox_{tau f}(z) = argmin_x  1/2 ||x - z||^2 + tau f(x).
 *
 * For these quadratic fidelities this solves
 *   (I + tau Ĥ) x = z + tau (1/n) AᵀWb
 * by conjugate gradients until the residual norm (which equals the gradient
 * norm of the prox objective at the iterate) drops below tol * max(||z||, 1e-3).
 */
inline ProxResult prox_exact_full(const Fidelity& fid, double tau, const Vec& z, double tol) {
  if (!(tau > 0.0)) throw InputError("prox_exact: tau must be positive");
  if (!(tol > 0.0)) throw InputError("prox_exact: tol must be positive");
  check_size(z, static_cast<std::size_t>(fid.dim()), "prox_exact");

  auto system_apply = [&](const Vec& v) {
    Vec y = fid.normal_apply(v);
    scale(y, tau);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
    return y;
  };
  Vec rhs = fid.normal_rhs();
  scale(rhs, tau);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += z[i];

  // Scale anchor: ||z|| normally; the right-hand side covers the z = 0 case.
  const double threshold = tol * std::max({norm(z), norm(rhs), 1e-3});
  const int max_iters = 10 * fid.dim() + 200;
  Vec x = z;  // warm start at z = prox of the zero function
  Vec r = sub(rhs, system_apply(x));
  Vec p = r;
  double rs = norm_sq(r);
  int it = 0;
  // The recursive residual drifts from (and eventually underflows below) the
  // true one, so acceptance is always decided on a freshly computed residual.
  for (;;) {
    while (it < max_iters && std::sqrt(rs) > threshold) {
      const Vec ap = system_apply(p);
      const double alpha = rs / dot(p, ap);
      axpy(alpha, p, x);
      axpy(-alpha, ap, r);
      const double rs_next = norm_sq(r);
      if (!std::isfinite(rs_next))
        throw CgError("prox_exact: CG produced non-finite residual", std::move(x),
                      std::sqrt(rs), it);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + (rs_next / rs) * p[i];
      rs = rs_next;
      ++it;
    }
    r = sub(rhs, system_apply(x));
    const double true_rs = norm_sq(r);
    if (std::sqrt(true_rs) <= threshold) return {std::move(x), it};
    if (it >= max_iters)
      throw CgError("prox_exact: CG stalled at residual " + std::to_string(std::sqrt(true_rs)) +
                        " above tolerance " + std::to_string(threshold),
                    std::move(x), std::sqrt(true_rs), it);
    p = r;  // restart from the true residual
    rs = true_rs;
  }
}

inline Vec prox_exact(const Fidelity& fid, double tau, const Vec& z, double tol) {
  return prox_exact_full(fid, tau, z, tol).x;
}

}  // namespace pnp
