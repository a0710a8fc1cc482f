#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "pnp/vec.hpp"

namespace pnp {

/// Live iterates of a splitting solver.
struct SolverState {
  Vec z;       // Douglas-Rachford iterate z^k
  Vec x;       // denoised iterate x^k
  Vec y;       // inner iterate / prox output y^k
  Vec v_prev;  // momentum memory v^k_{j-1}
  int k = 0;   // outer iteration counter
};

struct IterationRecord {
  int outer_iter = 0;
  int inner_iters_used = 0;
  double fp_residual = 0.0;
  double err_to_truth_log10 = 0.0;
  long long grad_block_evals_cum = 0;
  long long denoiser_calls_cum = 0;
  double wall_ms_cum = 0.0;
};

struct RunMetrics {
  std::vector<IterationRecord> rows;
  bool diverged = false;
  std::string note;
};

struct RunResult {
  SolverState state;
  RunMetrics metrics;
};

/// Per-outer-iteration view handed to observers; pointers are valid only
/// during the callback.
struct OuterSnapshot {
  int k = 0;
  int inner_iters = 0;
  const Vec* z_before = nullptr;
  const Vec* x_before = nullptr;
  const Vec* y_end = nullptr;
  const Vec* x_after = nullptr;
  const Vec* z_after = nullptr;
};

struct RunOptions {
  const Vec* ground_truth = nullptr;  // enables the err_to_truth_log10 column
  double prox_tol = 1e-10;            // CG tolerance for exact proximal steps
  bool record_wall_ms = false;        // off by default so reruns are byte-identical
  double early_stop_residual = 0.0;   // 0 disables early stopping
  std::function<void(const OuterSnapshot&)> observer;
};

namespace detail {

class MetricsRecorder {
 public:
  explicit MetricsRecorder(const RunOptions& opt)
      : opt_(&opt), start_(std::chrono::steady_clock::now()) {}

  void record(RunMetrics& m, int outer_iter, int inner_iters, double fp_residual, const Vec& x,
              long long grad_block_evals, long long denoiser_calls) const {
    IterationRecord r;
    r.outer_iter = outer_iter;
    r.inner_iters_used = inner_iters;
    r.fp_residual = fp_residual;
    r.err_to_truth_log10 =
        opt_->ground_truth ? std::log10(dist(x, *opt_->ground_truth))
                           : std::numeric_limits<double>::quiet_NaN();
    r.grad_block_evals_cum = grad_block_evals;
    r.denoiser_calls_cum = denoiser_calls;
    r.wall_ms_cum = opt_->record_wall_ms
                        ? std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start_)
                              .count()
                        : 0.0;
    m.rows.push_back(r);
  }

 private:
  const RunOptions* opt_;
  std::chrono::steady_clock::time_point start_;
};

inline bool divergence_guard(const Vec& v, double z0_norm) {
  // negated form so NaN iterates also trip the guard
  return !(norm(v) <= 1e6 * z0_norm + 1e6);
}

}  // namespace detail

/// CSV columns: outer_iter, inner_iters_used, fp_residual, err_to_truth_log10,
/// grad_block_evals_cum, denoiser_calls_cum, wall_ms_cum.
inline void write_metrics_csv(const RunMetrics& m, std::ostream& out) {
  out << "outer_iter,inner_iters_used,fp_residual,err_to_truth_log10,"
         "grad_block_evals_cum,denoiser_calls_cum,wall_ms_cum\n";
  char buf[200];
  for (const IterationRecord& r : m.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%lld,%lld,%.17g", r.outer_iter,
                  r.inner_iters_used, r.fp_residual, r.err_to_truth_log10,
                  r.grad_block_evals_cum, r.denoiser_calls_cum, r.wall_ms_cum);
    out << buf << '\n';
  }
}

}  // namespace pnp
