// Test-only oracles, deliberately independent of the library's code paths:
// dense linear algebra goes through Eigen, geometry through direct clipping.
#pragma once

#include <Eigen/Dense>

#include "pnp/fidelity.hpp"
#include "pnp/partition.hpp"
#include "pnp/rng.hpp"
#include "pnp/sparse_operator.hpp"

namespace oracle {

inline Eigen::MatrixXd to_dense(const pnp::SparseOperator& op) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(op.rows(), op.cols());
  for (const pnp::Triplet& t : op.to_triplets()) m(t.row, t.col) += t.value;
  return m;
}

inline Eigen::VectorXd to_eigen(const pnp::Vec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline pnp::Vec from_eigen(const Eigen::VectorXd& v) {
  return pnp::Vec(v.data(), v.data() + v.size());
}

inline pnp::SparseOperator random_sparse(int n, int d, int nnz_per_row, pnp::SamplerRng& rng,
                                         double scale = 1.0) {
  std::vector<pnp::Triplet> entries;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < nnz_per_row; ++k)
      entries.push_back({i, static_cast<int>(rng.uniform_index(d)), scale * rng.normal()});
  return pnp::SparseOperator(n, d, std::move(entries));
}

inline pnp::Vec random_vec(std::size_t n, pnp::SamplerRng& rng, double scale = 1.0) {
  pnp::Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// f(x) = (1/2n) (Ax-b)' W (Ax-b) + (eps/2) x'x evaluated densely.
inline double dense_value(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& w, double eps, const Eigen::VectorXd& x) {
  const Eigen::VectorXd r = A * x - b;
  return 0.5 * (w.array() * r.array() * r.array()).sum() / A.rows() +
         0.5 * eps * x.squaredNorm();
}

inline Eigen::VectorXd dense_grad(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& w, double eps,
                                  const Eigen::VectorXd& x) {
  const Eigen::VectorXd r = (A * x - b).cwiseProduct(w);
  return A.transpose() * r / A.rows() + eps * x;
}

// argmin 1/2 ||x-z||^2 + tau f(x) via a dense solve of the normal equations.
inline Eigen::VectorXd dense_prox(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& w, double eps, double tau,
                                  const Eigen::VectorXd& z) {
  const int d = static_cast<int>(A.cols());
  const Eigen::MatrixXd H =
      A.transpose() * w.asDiagonal() * A / A.rows() + eps * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) + tau * H;
  const Eigen::VectorXd rhs = z + tau * A.transpose() * w.cwiseProduct(b) / A.rows();
  return M.ldlt().solve(rhs);
}

// Central finite differences of a scalar function.
template <typename F>
pnp::Vec fd_grad(F&& f, const pnp::Vec& x, double h) {
  pnp::Vec g(x.size());
  pnp::Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

struct RandomFidelity {
  std::shared_ptr<pnp::SparseOperator> op;
  pnp::Fidelity fid;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd w;
};

inline RandomFidelity random_fidelity(int n, int d, int K, pnp::SamplerRng& rng,
                                      pnp::FidelityKind kind, double eps = 0.0,
                                      pnp::PartitionStrategy strategy =
                                          pnp::PartitionStrategy::strided) {
  auto op = std::make_shared<pnp::SparseOperator>(random_sparse(n, d, std::max(2, d / 3), rng));
  pnp::Vec target = random_vec(n, rng);
  pnp::Partition part = pnp::partition_rows(n, K, rng, strategy);
  Eigen::VectorXd w(n);
  if (kind == pnp::FidelityKind::pwls) {
    pnp::Vec weights(n);
    for (int i = 0; i < n; ++i) w(i) = weights[i] = rng.uniform();
    pnp::Fidelity fid = pnp::Fidelity::pwls(op, target, weights, part, eps);
    return {op, std::move(fid), to_dense(*op), to_eigen(target), w};
  }
  w.setOnes();
  pnp::Fidelity fid = pnp::Fidelity::least_squares(op, target, part, eps);
  return {op, std::move(fid), to_dense(*op), to_eigen(target), w};
}

}  // namespace oracle
