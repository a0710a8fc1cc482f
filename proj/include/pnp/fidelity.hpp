#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <optional>

#include "pnp/partition.hpp"
#include "pnp/rng.hpp"
#include "pnp/sparse_operator.hpp"
#include "pnp/vec.hpp"

namespace pnp {

enum class FidelityKind { least_squares, pwls };

/**
 * Strong-convexity / smoothness constants of the fidelity, stated in the
 * squared-distance convention WITHOUT the usual 1/2 factor:
 *
 *   f(x) - f(y) - <∇f(y), x-y>  >=  mu * ||x-y||^2
 *   f_k(x) - f_k(y) - <∇f_k(y), x-y>  <=  L_minibatch * ||x-y||^2
 *
 * so mu and L_minibatch are HALF the spectral bounds of the Hessians. This is
 * deliberate: the inner-loop schedules consume mu0 = tau*mu + 1 and
 * L0 = tau*L + 1 with these values plugged in unchanged.
 */
struct FidelityConstants {
  double mu = 0.0;
  double L_minibatch = 0.0;
  bool mu_positive = false;
};

/**
 * Smooth convex data term
 *
 *   f(x) = (1/2n) Σ_i w_i (a_i^T x - b_i)^2 + (eps/2) ||x||^2
 *
 * decomposed over a row partition as f = (1/K) Σ_k f_k with
 * f_k(x) = (K/2n) Σ_{i in I_k} w_i (a_i^T x - b_i)^2 + (eps/2) ||x||^2.
 * The K/n block scaling makes the average of the K minibatch gradients equal
 * the full gradient exactly, remainder blocks included; the ridge applies in
 * full to every block. Least squares is the all-ones weight case.
 *
 * Immutable and safe to share across threads once constructed.
 */
class Fidelity {
 public:
  static Fidelity least_squares(std::shared_ptr<const SparseOperator> op, Vec target,
                                Partition partition, double ridge_eps = 0.0) {
    Vec w(op->rows(), 1.0);
    return Fidelity(FidelityKind::least_squares, std::move(op), std::move(target),
                    std::move(w), std::move(partition), ridge_eps);
  }

  static Fidelity pwls(std::shared_ptr<const SparseOperator> op, Vec target, Vec weights,
                       Partition partition, double ridge_eps = 0.0) {
    return Fidelity(FidelityKind::pwls, std::move(op), std::move(target), std::move(weights),
                    std::move(partition), ridge_eps);
  }

  FidelityKind kind() const { return kind_; }
  int dim() const { return op_->cols(); }
  int num_rows() const { return op_->rows(); }
  int num_blocks() const { return partition_.num_blocks(); }
  const SparseOperator& op() const { return *op_; }
  std::shared_ptr<const SparseOperator> op_ptr() const { return op_; }
  const Partition& partition() const { return partition_; }
  const Vec& target() const { return target_; }
  const Vec& weights() const { return weights_; }
  double ridge_eps() const { return ridge_eps_; }

  double value(const Vec& x) const {
    check_size(x, static_cast<std::size_t>(dim()), "Fidelity::value");
    double s = 0.0;
    for (int i = 0; i < num_rows(); ++i) {
      const double r = op_->row_dot(i, x) - target_[i];
      s += weights_[i] * r * r;
    }
    const double v = 0.5 * s / num_rows() + 0.5 * ridge_eps_ * norm_sq(x);
    if (!std::isfinite(v)) throw NumericError("Fidelity::value: non-finite result");
    return v;
  }

  Vec grad(const Vec& x) const {
    check_size(x, static_cast<std::size_t>(dim()), "Fidelity::grad");
    Vec g(dim(), 0.0);
    const double inv_n = 1.0 / num_rows();
    for (int i = 0; i < num_rows(); ++i) {
      const double r = op_->row_dot(i, x) - target_[i];
      op_->add_scaled_row(i, inv_n * weights_[i] * r, g);
    }
    if (ridge_eps_ != 0.0) axpy(ridge_eps_, x, g);
    return g;
  }

  double value_minibatch(const Vec& x, int block) const {
    check_block(block);
    double s = 0.0;
    for (int i : partition_.block(block)) {
      const double r = op_->row_dot(i, x) - target_[i];
      s += weights_[i] * r * r;
    }
    return 0.5 * num_blocks() * s / num_rows() + 0.5 * ridge_eps_ * norm_sq(x);
  }

  Vec grad_minibatch(const Vec& x, int block) const {
    check_size(x, static_cast<std::size_t>(dim()), "Fidelity::grad_minibatch");
    check_block(block);
    Vec g(dim(), 0.0);
    const double c = static_cast<double>(num_blocks()) / num_rows();
    for (int i : partition_.block(block)) {
      const double r = op_->row_dot(i, x) - target_[i];
      op_->add_scaled_row(i, c * weights_[i] * r, g);
    }
    if (ridge_eps_ != 0.0) axpy(ridge_eps_, x, g);
    return g;
  }

  /// Ĥx with Ĥ = (1/n) AᵀWA + eps·I, the Hessian of f.
  Vec normal_apply(const Vec& x) const {
    Vec y(dim(), 0.0);
    const double inv_n = 1.0 / num_rows();
    for (int i = 0; i < num_rows(); ++i)
      op_->add_scaled_row(i, inv_n * weights_[i] * op_->row_dot(i, x), y);
    if (ridge_eps_ != 0.0) axpy(ridge_eps_, x, y);
    return y;
  }

  /// (1/n) AᵀWb, the constant part of ∇f.
  Vec normal_rhs() const {
    Vec y(dim(), 0.0);
    const double inv_n = 1.0 / num_rows();
    for (int i = 0; i < num_rows(); ++i)
      op_->add_scaled_row(i, inv_n * weights_[i] * target_[i], y);
    return y;
  }

  /**
   * Estimated (mu, L_minibatch) in the convention documented on
   * FidelityConstants. mu = 0 is flagged via mu_positive = false; schedules
   * that need strong convexity must reject such fidelities, heuristic
   * schedules still run.
   */
  FidelityConstants constants() const {
    std::call_once(cache_->L_once, [&] { cache_->L_base = max_block_eig(); });
    std::call_once(cache_->mu_once, [&] { cache_->mu_base = min_full_eig(); });
    FidelityConstants c;
    c.mu = 0.5 * (cache_->mu_base + ridge_eps_);
    c.L_minibatch = 0.5 * (cache_->L_base + ridge_eps_);
    c.mu_positive = c.mu > 0.0;
    return c;
  }

  /// Iteration budget for the spectral estimates (constants() caches, so set
  /// this before the first call).
  void set_constants_iters(int iters) { cache_->power_iters = iters; }

 private:
  Fidelity(FidelityKind kind, std::shared_ptr<const SparseOperator> op, Vec target, Vec weights,
           Partition partition, double ridge_eps)
      : kind_(kind),
        op_(std::move(op)),
        target_(std::move(target)),
        weights_(std::move(weights)),
        partition_(std::move(partition)),
        ridge_eps_(ridge_eps),
        cache_(std::make_shared<Cache>()) {
    if (!op_) throw InputError("Fidelity: null operator");
    check_size(target_, static_cast<std::size_t>(op_->rows()), "Fidelity target");
    check_size(weights_, static_cast<std::size_t>(op_->rows()), "Fidelity weights");
    if (partition_.n() != op_->rows())
      throw InputError("Fidelity: partition does not match operator rows");
    if (ridge_eps_ < 0.0) throw InputError("Fidelity: ridge_eps must be >= 0");
    for (double w : weights_)
      if (!(w >= 0.0)) throw InputError("Fidelity: weights must be >= 0");
  }

  void check_block(int block) const {
    if (block < 0 || block >= num_blocks())
      throw InputError("Fidelity: block index out of range");
  }

  // lambda_max of the ridgeless block Hessian (K/n) A_kᵀ W_k A_k, max over blocks.
  double max_block_eig() const {
    SamplerRng rng(0x9c0ffeeull);
    double worst = 0.0;
    const double c = static_cast<double>(num_blocks()) / num_rows();
    for (int k = 0; k < num_blocks(); ++k) {
      auto apply_block = [&](const Vec& v) {
        Vec y(dim(), 0.0);
        for (int i : partition_.block(k))
          op_->add_scaled_row(i, c * weights_[i] * op_->row_dot(i, v), y);
        return y;
      };
      worst = std::max(worst, power_iteration(apply_block, rng));
    }
    return worst;
  }

  // lambda_min of the ridgeless full Hessian; exactly 0 when rank-deficient by shape.
  double min_full_eig() const {
    if (num_rows() < dim()) return 0.0;
    SamplerRng rng(0x5eedull);
    auto apply_base = [&](const Vec& v) {
      Vec y(dim(), 0.0);
      const double inv_n = 1.0 / num_rows();
      for (int i = 0; i < num_rows(); ++i)
        op_->add_scaled_row(i, inv_n * weights_[i] * op_->row_dot(i, v), y);
      return y;
    };
    const double lmax = power_iteration(apply_base, rng);
    if (lmax == 0.0) return 0.0;
    const double shift = lmax * 1.02 + 1e-12;
    auto apply_shifted = [&](const Vec& v) {
      Vec y = apply_base(v);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = shift * v[i] - y[i];
      return y;
    };
    const double lmin = std::max(0.0, shift - power_iteration(apply_shifted, rng));
    return (lmin < 1e-9 * lmax) ? 0.0 : lmin;
  }

  template <typename Apply>
  double power_iteration(Apply&& apply, SamplerRng& rng) const {
    Vec v = rng.unit_vec(dim());
    double lambda = 0.0;
    for (int it = 0; it < cache_->power_iters; ++it) {
      Vec w = apply(v);
      const double next = dot(v, w);
      const double nw = norm(w);
      if (nw == 0.0) return 0.0;
      scale(w, 1.0 / nw);
      const bool settled = it > 8 && std::fabs(next - lambda) <= 1e-13 * std::max(1.0, std::fabs(next));
      lambda = next;
      v = std::move(w);
      if (settled) break;
    }
    return lambda;
  }

  struct Cache {
    std::once_flag L_once, mu_once;
    double L_base = 0.0;
    double mu_base = 0.0;
    int power_iters = 1200;
  };

  FidelityKind kind_;
  std::shared_ptr<const SparseOperator> op_;
  Vec target_;
  Vec weights_;
  Partition partition_;
  double ridge_eps_;
  std::shared_ptr<Cache> cache_;
};

}  // namespace pnp
