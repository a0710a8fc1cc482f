#pragma once

#include "pnp/denoiser.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/prox.hpp"
#include "pnp/schedule.hpp"
#include "pnp/solver_state.hpp"
#include "pnp/vec.hpp"

namespace pnp {

/**
 * Per-outer-iteration convergence diagnostics. With y* = prox_{tau f}(z^k):
 *
 *   sigma_k_sq  — exact mean over all K blocks of ||tau ∇f_q(y*) + y* - z^k||^2
 *   xi_k        — ||y* - x^k||^2, the inner loop's squared starting distance
 *   prox_error  — ||y^k_{N_k} - y*||, the realized inexactness u_k
 *   realized_eps — ||z^{k+1} - T(z^k)||, the recursion error eps^k
 *   delta_theoretical — the contraction factor (1 + b + b t m + 2 b^2 t m) /
 *                       (1 + t m + 2 b t m)
 *
 * amplification_bound_holds checks realized_eps <= (3 + 2 beta) * prox_error,
 * with a small cushion for the prox tolerance.
 */
struct DiagnosticPack {
  double sigma_k_sq = 0.0;
  double xi_k = 0.0;
  double prox_error = 0.0;
  double delta_theoretical = 0.0;
  double realized_eps = 0.0;
  double amplification_rhs = 0.0;
  bool amplification_bound_holds = false;
};

/// state.z = z^k, state.x = x^k (the inner warm start), state.y = y^k_{N_k}.
template <ImageMap D>
DiagnosticPack compute_diagnostics(const Fidelity& fid, const D& den, double tau,
                                   const SolverState& state, double beta,
                                   double prox_tol = 1e-10) {
  DiagnosticPack pack;
  const Vec y_star = prox_exact(fid, tau, state.z, prox_tol);
  pack.sigma_k_sq = sigma_sq_at(fid, tau, state.z, y_star);
  pack.xi_k = norm_sq(sub(y_star, state.x));
  pack.prox_error = dist(state.y, y_star);
  pack.delta_theoretical = theorem_delta(beta, tau, fid.constants().mu);

  // Realized recursion error: z^{k+1} from the inexact update vs the exact T.
  Vec reflected_inexact(state.z.size()), reflected_exact(state.z.size());
  for (std::size_t i = 0; i < state.z.size(); ++i) {
    reflected_inexact[i] = 2.0 * state.y[i] - state.z[i];
    reflected_exact[i] = 2.0 * y_star[i] - state.z[i];
  }
  const Vec x_next = den.apply(reflected_inexact);
  const Vec x_exact = den.apply(reflected_exact);
  double eps_sq = 0.0;
  for (std::size_t i = 0; i < state.z.size(); ++i) {
    // z_next - T(z) = (x_next - y_N) - (x_exact - y*)
    const double e = (x_next[i] - state.y[i]) - (x_exact[i] - y_star[i]);
    eps_sq += e * e;
  }
  pack.realized_eps = std::sqrt(eps_sq);
  pack.amplification_rhs = (3.0 + 2.0 * beta) * pack.prox_error;
  const double cushion = 100.0 * prox_tol * (1.0 + norm(state.z));
  pack.amplification_bound_holds = pack.realized_eps <= pack.amplification_rhs + cushion;
  return pack;
}

}  // namespace pnp
