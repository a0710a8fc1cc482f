#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "pnp/rng.hpp"
#include "pnp/vec.hpp"

namespace pnp {

struct Triplet {
  int row;
  int col;
  double value;
};

/**
 * Immutable sparse linear operator in compressed-row form.
 *
 * Assembled once from triplets (duplicates are summed); afterwards the storage
 * never changes, so instances are safe to share across threads. Row access is
 * by index view into the CSR arrays, never by copy, which keeps minibatch
 * gradients at O(nnz / K).
 */
class SparseOperator {
 public:
  SparseOperator(int rows, int cols, std::vector<Triplet> entries)
      : n_(rows), d_(cols) {
    if (rows < 0 || cols < 0) throw InputError("SparseOperator: negative shape");
    for (const Triplet& t : entries) {
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw InputError("SparseOperator: entry index out of range");
      if (!std::isfinite(t.value))
        throw InputError("SparseOperator: non-finite entry value");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    row_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
    cols_.reserve(entries.size());
    vals_.reserve(entries.size());
    int last_row = -1;
    for (const Triplet& t : entries) {
      if (t.row == last_row && !cols_.empty() && t.col == cols_.back()) {
        vals_.back() += t.value;  // merge duplicate
        continue;
      }
      cols_.push_back(t.col);
      vals_.push_back(t.value);
      last_row = t.row;
      ++row_ptr_[static_cast<std::size_t>(t.row) + 1];
    }
    for (int r = 0; r < n_; ++r) row_ptr_[r + 1] += row_ptr_[r];
    row_norms_sq_.assign(n_, 0.0);
    for (int r = 0; r < n_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        row_norms_sq_[r] += vals_[k] * vals_[k];
  }

  int rows() const { return n_; }
  int cols() const { return d_; }
  std::size_t nnz() const { return vals_.size(); }

  std::span<const int> row_cols(int i) const {
    return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_vals(int i) const {
    return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  const Vec& row_norms_sq() const { return row_norms_sq_; }

  /// aᵢᵀx
  double row_dot(int i, const Vec& x) const {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      s += vals_[k] * x[cols_[k]];
    return s;
  }

  /// acc += c · aᵢ
  void add_scaled_row(int i, double c, Vec& acc) const {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      acc[cols_[k]] += c * vals_[k];
  }

  Vec apply(const Vec& x) const {
    check_size(x, static_cast<std::size_t>(d_), "SparseOperator::apply");
    Vec y(n_);
    for (int i = 0; i < n_; ++i) y[i] = row_dot(i, x);
    return y;
  }

  Vec apply_adjoint(const Vec& r) const {
    check_size(r, static_cast<std::size_t>(n_), "SparseOperator::apply_adjoint");
    Vec y(d_, 0.0);
    for (int i = 0; i < n_; ++i) add_scaled_row(i, r[i], y);
    return y;
  }

  std::vector<Triplet> to_triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (int r = 0; r < n_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        out.push_back({r, cols_[k], vals_[k]});
    return out;
  }

 private:
  int n_;
  int d_;
  std::vector<std::size_t> row_ptr_;
  std::vector<int> cols_;
  std::vector<double> vals_;
  Vec row_norms_sq_;
};

/// Plain-text triplet format: header "n d nnz", then "row col value" per entry.
inline void write_triplets(const SparseOperator& op, std::ostream& out) {
  out << op.rows() << ' ' << op.cols() << ' ' << op.nnz() << '\n';
  char buf[64];
  for (const Triplet& t : op.to_triplets()) {
    std::snprintf(buf, sizeof(buf), "%.17g", t.value);
    out << t.row << ' ' << t.col << ' ' << buf << '\n';
  }
}

inline SparseOperator read_triplets(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw InputError("read_triplets: missing header line");
  std::istringstream hs(header);
  long long n = -1, d = -1, nnz = -1;
  std::string extra;
  if (!(hs >> n >> d >> nnz) || (hs >> extra) || n < 0 || d < 0 || nnz < 0)
    throw InputError("read_triplets: bad header line (want: n d nnz)");
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    Triplet t{};
    if (!(in >> t.row >> t.col >> t.value))
      throw InputError("read_triplets: truncated entry list at line " + std::to_string(k + 2));
    entries.push_back(t);
  }
  return SparseOperator(static_cast<int>(n), static_cast<int>(d), std::move(entries));
}

/**
 * Power-iteration estimate of ‖A‖₂² (largest eigenvalue of AᵀA).
 *
 * The Rayleigh value is nondecreasing in the iteration count and converges
 * from below; returns 0 for the zero operator.
 */
inline double estimate_operator_norm_sq(const SparseOperator& op, int iters, SamplerRng& rng) {
  if (iters < 1) throw InputError("estimate_operator_norm_sq: iters must be >= 1");
  if (op.cols() == 0 || op.rows() == 0 || op.nnz() == 0) return 0.0;
  Vec v = rng.unit_vec(op.cols());
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    Vec u = op.apply(v);
    lambda = norm_sq(u);  // = vᵀAᵀAv with ‖v‖ = 1
    Vec w = op.apply_adjoint(u);
    const double nw = norm(w);
    if (nw == 0.0) return 0.0;
    scale(w, 1.0 / nw);
    const double drift = dist(w, v);
    v = std::move(w);
    if (it > 2 && drift < 1e-15) break;
  }
  return lambda;
}

}  // namespace pnp
