// Shared synthetic instances for solver tests.
#pragma once

#include <Eigen/Dense>
#include <memory>

#include "pnp/fidelity.hpp"
#include "pnp/observe.hpp"
#include "pnp/phantom.hpp"
#include "pnp/radon.hpp"
#include "pnp/rng.hpp"

namespace testinst {

inline Eigen::MatrixXd dense_of(const pnp::SparseOperator& op) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(op.rows(), op.cols());
  for (const pnp::Triplet& t : op.to_triplets()) m(t.row, t.col) += t.value;
  return m;
}

/// Random overdetermined least-squares fidelity whose ridge is chosen so the
/// paper-convention strong-convexity constant equals mu_target exactly.
inline pnp::Fidelity ridged_instance(int n, int d, int K, double mu_target,
                                     pnp::SamplerRng& rng, double* mu_out = nullptr) {
  std::vector<pnp::Triplet> entries;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 4; ++k)
      entries.push_back({i, static_cast<int>(rng.uniform_index(d)), rng.normal()});
  auto op = std::make_shared<pnp::SparseOperator>(n, d, std::move(entries));
  const Eigen::MatrixXd A = dense_of(*op);
  const Eigen::MatrixXd H = A.transpose() * A / n;
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff();
  const double eps = 2.0 * mu_target - lmin;
  if (eps < 0) throw std::runtime_error("ridged_instance: mu_target too small");
  pnp::Vec b(n);
  for (double& v : b) v = rng.normal();
  pnp::Partition part = pnp::partition_rows(n, K, rng, pnp::PartitionStrategy::strided);
  if (mu_out) *mu_out = mu_target;
  return pnp::Fidelity::least_squares(op, b, std::move(part), eps);
}

/**
 * Finite-sum instance whose K blocks share one design matrix but observe
 * different noisy targets. All block Hessians coincide, so the block-gradient
 * variance at any point is a constant set by the noise level rather than by
 * the iterate scale; handy for adaptive-schedule tests.
 */
inline pnp::Fidelity replicated_instance(int rows_per_block, int d, int K, double noise,
                                         double mu_target, pnp::SamplerRng& rng) {
  std::vector<pnp::Triplet> block;
  for (int i = 0; i < rows_per_block; ++i)
    for (int k = 0; k < 4; ++k)
      block.push_back({i, static_cast<int>(rng.uniform_index(d)), rng.normal()});
  const int n = rows_per_block * K;
  std::vector<pnp::Triplet> entries;
  for (int q = 0; q < K; ++q)
    for (const pnp::Triplet& t : block)
      entries.push_back({t.row + q * rows_per_block, t.col, t.value});
  auto op = std::make_shared<pnp::SparseOperator>(n, d, std::move(entries));

  const Eigen::MatrixXd A = dense_of(*op);
  const Eigen::MatrixXd H = A.transpose() * A / n;
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff();
  const double eps = 2.0 * mu_target - lmin;
  if (eps < 0) throw std::runtime_error("replicated_instance: mu_target too small");

  pnp::Vec x_ref(d);
  for (double& v : x_ref) v = rng.normal();
  pnp::Vec clean = op->apply(x_ref);
  pnp::Vec b(n);
  for (int i = 0; i < n; ++i) b[i] = clean[i] + noise * rng.normal();
  pnp::Partition part = pnp::partition_rows(n, K, rng, pnp::PartitionStrategy::contiguous);
  return pnp::Fidelity::least_squares(op, std::move(b), std::move(part), eps);
}

/// Small CT problem (least squares on a noisy log sinogram).
struct DeskCt {
  std::shared_ptr<pnp::SparseOperator> op;
  pnp::Vec truth;
  pnp::Fidelity fid;
  int size = 0;
};

inline DeskCt desk_ct(int size, int num_angles, int K, double I0, pnp::SamplerRng& rng,
                      double ridge_eps = 0.0) {
  pnp::Phantom phantom = pnp::shepp_logan(size, size);
  const pnp::CtGeometry geom =
      pnp::make_parallel_geometry(num_angles, pnp::default_detector_count(size));
  auto op = std::make_shared<pnp::SparseOperator>(pnp::build_radon(geom, size, size));
  const pnp::Vec proj = op->apply(phantom.pixels);
  pnp::scale(phantom.pixels, 3.0 / *std::max_element(proj.begin(), proj.end()));
  const pnp::CtObservation obs = pnp::poisson_observe(*op, phantom, I0, rng);
  pnp::Partition part =
      pnp::partition_rows(op->rows(), K, rng, pnp::PartitionStrategy::strided);
  pnp::Fidelity fid =
      pnp::Fidelity::least_squares(op, obs.log_sino, std::move(part), ridge_eps);
  return {op, phantom.pixels, std::move(fid), size};
}

}  // namespace testinst
