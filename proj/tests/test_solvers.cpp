#include <catch2/catch_amalgamated.hpp>

#include "instances.hpp"
#include "oracles.hpp"
#include "pnp/diagnostics.hpp"
#include "pnp/prox.hpp"
#include "pnp/solvers.hpp"

using namespace pnp;

namespace {

Partition trivial_partition(int n, int K = 1) {
  SamplerRng rng(0);
  return partition_rows(n, K, rng, PartitionStrategy::strided);
}

std::shared_ptr<SparseOperator> identity_shared(int n) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return std::make_shared<SparseOperator>(n, n, std::move(t));
}

Fidelity zero_fidelity(int d) {
  auto op = std::make_shared<SparseOperator>(d, d, std::vector<Triplet>{});
  return Fidelity::least_squares(op, Vec(d, 0.0), trivial_partition(d));
}

/// f(x) = 1/2 x^2 on R^1 (A = [1], b = 0, n = 1).
Fidelity half_norm_sq_1d() {
  return Fidelity::least_squares(identity_shared(1), {0.0}, trivial_partition(1));
}

}  // namespace

TEST_CASE("prox_exact", "[solvers]") {
  SamplerRng rng(73);
  SECTION("prox of the zero function returns z") {
    const Fidelity fid = zero_fidelity(4);
    const Vec z = oracle::random_vec(4, rng);
    REQUIRE(dist(prox_exact(fid, 1.5, z, 1e-12), z) <= 1e-12 * norm(z));
  }
  SECTION("closed form (1 + tau)^{-1} z for f = 1/2 x^2") {
    const Fidelity fid = half_norm_sq_1d();
    REQUIRE(prox_exact(fid, 1.0, {3.0}, 1e-13)[0] == Catch::Approx(1.5).margin(1e-12));
    REQUIRE(prox_exact(fid, 3.0, {2.0}, 1e-13)[0] == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("random 12x5 instance matches the dense solve oracle") {
    const auto inst = oracle::random_fidelity(12, 5, 2, rng, FidelityKind::pwls, 0.1);
    for (double tau : {0.5, 2.0}) {
      const Vec z = oracle::random_vec(5, rng);
      const Vec got = prox_exact(inst.fid, tau, z, 1e-12);
      const Eigen::VectorXd expect =
          oracle::dense_prox(inst.A, inst.b, inst.w, 0.1, tau, oracle::to_eigen(z));
      REQUIRE((oracle::to_eigen(got) - expect).norm() <= 1e-8 * expect.norm());
    }
  }
  SECTION("prox objective gradient vanishes at the output") {
    const auto inst = oracle::random_fidelity(10, 6, 2, rng, FidelityKind::least_squares);
    const Vec z = oracle::random_vec(6, rng);
    const double tau = 2.0;
    const Vec y = prox_exact(inst.fid, tau, z, 1e-11);
    Vec grad_prox = inst.fid.grad(y);
    scale(grad_prox, tau);
    for (std::size_t i = 0; i < grad_prox.size(); ++i) grad_prox[i] += y[i] - z[i];
    REQUIRE(norm(grad_prox) <= 1e-11 * (1.0 + norm(z)));
  }
  SECTION("unreachable tolerance raises CgError carrying the best iterate") {
    const auto inst = oracle::random_fidelity(400, 300, 2, rng, FidelityKind::least_squares);
    const Vec z = oracle::random_vec(300, rng);
    try {
      prox_exact(inst.fid, 1.0, z, 1e-300);
      FAIL("expected CgError");
    } catch (const CgError& e) {
      REQUIRE(e.best.size() == 300);
      REQUIRE(e.residual >= 0.0);
      const Eigen::VectorXd expect =
          oracle::dense_prox(inst.A, inst.b, inst.w, 0.0, 1.0, oracle::to_eigen(z));
      REQUIRE((oracle::to_eigen(e.best) - expect).norm() <= 1e-10 * expect.norm());
    }
  }
}

TEST_CASE("dr_operator", "[solvers]") {
  SamplerRng rng(79);
  SECTION("identity denoiser and zero fidelity give T = I") {
    const Fidelity fid = zero_fidelity(6);
    const Denoiser den = Denoiser::identity(3, 2);
    const Vec z = oracle::random_vec(6, rng);
    REQUIRE(dist(dr_operator(fid, den, 1.0, z), z) <= 1e-12 * norm(z));
  }
  SECTION("identity denoiser, f = 1/2 x^2, tau = 1: T(z) = z/2") {
    const Fidelity fid = half_norm_sq_1d();
    const Denoiser den = Denoiser::identity(1, 1);
    REQUIRE(dr_operator(fid, den, 1.0, {4.0})[0] == Catch::Approx(2.0).margin(1e-10));
  }
  SECTION("matches the update-rule oracle with a blend denoiser") {
    const int d = 16;  // 4x4 image
    SamplerRng gen(5);
    const auto inst = oracle::random_fidelity(24, d, 3, gen, FidelityKind::least_squares, 0.2);
    const Denoiser den = Denoiser::blend(4, 4, 0.5, BlurKind::gaussian, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      const Vec z = oracle::random_vec(d, gen);
      const Eigen::VectorXd y =
          oracle::dense_prox(inst.A, inst.b, inst.w, 0.2, 2.0, oracle::to_eigen(z));
      Vec reflected(d);
      for (int i = 0; i < d; ++i) reflected[i] = 2.0 * y(i) - z[i];
      const Vec x = den.apply(reflected);
      Vec expect(d);
      for (int i = 0; i < d; ++i) expect[i] = z[i] + x[i] - y(i);
      REQUIRE(dist(dr_operator(inst.fid, den, 2.0, z), expect) <=
              1e-10 * std::max(1.0, norm(expect)));
    }
  }
}

TEST_CASE("run_pnp_admm convergence", "[solvers]") {
  SamplerRng rng(83);
  SECTION("identity denoiser drives z to the minimizer of f") {
    const auto inst = oracle::random_fidelity(20, 6, 2, rng, FidelityKind::least_squares, 0.6);
    const Denoiser den = Denoiser::identity(3, 2);
    const double tau = 1.5;
    RunOptions opt;
    opt.prox_tol = 1e-12;
    const RunResult res = run_pnp_admm(inst.fid, den, tau, oracle::random_vec(6, rng), 80, opt);
    const Eigen::VectorXd x_star =
        (inst.A.transpose() * inst.A / 20 + 0.6 * Eigen::MatrixXd::Identity(6, 6))
            .ldlt()
            .solve(inst.A.transpose() * inst.b / 20);
    REQUIRE((oracle::to_eigen(res.state.z) - x_star).norm() <= 1e-8 * x_star.norm());

    const double mu = inst.fid.constants().mu;
    const double bound = 1.0 / (1.0 + tau * mu) + 1e-6;
    for (std::size_t i = 1; i < res.metrics.rows.size(); ++i) {
      const double prev = res.metrics.rows[i - 1].fp_residual;
      const double cur = res.metrics.rows[i].fp_residual;
      if (prev > 1e-12) REQUIRE(cur <= bound * prev);
    }
    REQUIRE(res.metrics.rows.back().denoiser_calls_cum ==
            static_cast<long long>(res.metrics.rows.size()));
  }
  SECTION("blend denoiser contracts with ratio delta = 0.7 on a mu = 1 instance") {
    SamplerRng gen(7);
    const Fidelity fid = testinst::ridged_instance(40, 16, 4, 1.0, gen);
    const Denoiser den = Denoiser::blend_with_beta(4, 4, BlurKind::gaussian, 1.0, 0.5);
    const double delta = theorem_delta(0.5, 2.0, 1.0);
    REQUIRE(delta == Catch::Approx(0.7).margin(1e-12));
    RunOptions opt;
    opt.prox_tol = 1e-12;
    const RunResult res = run_pnp_admm(fid, den, 2.0, oracle::random_vec(16, gen), 40, opt);
    for (std::size_t i = 1; i < res.metrics.rows.size(); ++i) {
      const double prev = res.metrics.rows[i - 1].fp_residual;
      const double cur = res.metrics.rows[i].fp_residual;
      if (prev > 1e-11) REQUIRE(cur <= delta * prev * (1.0 + 1e-6));
    }
  }
  SECTION("a fixed point stays fixed") {
    SamplerRng gen(9);
    const Fidelity fid = testinst::ridged_instance(36, 16, 3, 1.0, gen);
    const Denoiser den = Denoiser::blend(4, 4, 0.4, BlurKind::gaussian, 1.0);
    RunOptions opt;
    opt.prox_tol = 1e-13;
    const RunResult warm =
        run_pnp_admm(fid, den, 2.0, oracle::random_vec(16, gen), 200, opt);
    const RunResult pinned = run_pnp_admm(fid, den, 2.0, warm.state.z, 10, opt);
    for (const IterationRecord& r : pinned.metrics.rows) REQUIRE(r.fp_residual <= 1e-9);
  }
}

TEST_CASE("stochastic pnp-admm inner loop semantics", "[solvers]") {
  SECTION("K = 1 with a long accurate inner loop tracks the exact-prox solver") {
    SamplerRng gen(11);
    const Fidelity fid = testinst::ridged_instance(36, 16, 1, 1.0, gen);
    const Denoiser den = Denoiser::blend(4, 4, 0.5, BlurKind::gaussian, 1.0);
    const FidelityConstants c = fid.constants();
    const double tau = 2.0;
    Schedule sched;
    sched.tau = tau;
    sched.eta_const = 1.0 / (tau * c.L_minibatch + 1.0);
    sched.inner_const = 800;
    const Vec z0 = oracle::random_vec(16, gen);

    std::vector<Vec> z_exact;
    RunOptions opt_exact;
    opt_exact.prox_tol = 1e-12;
    opt_exact.observer = [&](const OuterSnapshot& s) { z_exact.push_back(*s.z_after); };
    run_pnp_admm(fid, den, tau, z0, 10, opt_exact);

    std::vector<Vec> z_sto;
    RunOptions opt_sto;
    opt_sto.observer = [&](const OuterSnapshot& s) { z_sto.push_back(*s.z_after); };
    SamplerRng rng(13);
    run_stochastic_pnp_admm(fid, den, sched, z0, z0, 10, rng, opt_sto);

    REQUIRE(z_exact.size() == z_sto.size());
    for (std::size_t k = 0; k < z_exact.size(); ++k)
      REQUIRE(dist(z_exact[k], z_sto[k]) <= 1e-4 * std::max(1.0, norm(z_exact[k])));
  }
  SECTION("eta = 0 freezes the inner loop: z <- z + D(2x - z) - x") {
    SamplerRng gen(17);
    const auto inst = oracle::random_fidelity(18, 9, 3, gen, FidelityKind::least_squares, 0.3);
    const Denoiser den = Denoiser::gaussian(3, 3, 0.8);
    Schedule sched;
    sched.tau = 1.0;
    sched.eta_const = 0.0;
    sched.inner_const = 7;
    sched.momentum_rule = Schedule::MomentumRule::fista;
    const Vec z0 = oracle::random_vec(9, gen);
    const Vec y00 = oracle::random_vec(9, gen);
    SamplerRng rng(19);
    std::vector<Vec> ys;
    RunOptions opt;
    opt.observer = [&](const OuterSnapshot& s) { ys.push_back(*s.y_end); };
    const RunResult res = run_stochastic_pnp_admm(inst.fid, den, sched, z0, y00, 3, rng, opt);

    Vec z = z0, x = y00;
    for (int k = 0; k < 3; ++k) {
      REQUIRE(dist(ys[k], x) == 0.0);  // inner loop is a no-op
      Vec reflected(9);
      for (int i = 0; i < 9; ++i) reflected[i] = 2.0 * x[i] - z[i];
      const Vec x_new = den.apply(reflected);
      for (int i = 0; i < 9; ++i) z[i] = z[i] + x_new[i] - x[i];
      x = x_new;
    }
    REQUIRE(dist(res.state.z, z) <= 1e-13 * std::max(1.0, norm(z)));
  }
  SECTION("divergence guard aborts with a diagnostic and keeps partial output") {
    SamplerRng gen(23);
    const auto inst = oracle::random_fidelity(18, 9, 3, gen, FidelityKind::least_squares);
    const Denoiser den = Denoiser::identity(3, 3);
    Schedule sched;
    sched.tau = 1.0;
    sched.eta_const = 1e4;  // far beyond stability
    sched.inner_const = 50;
    SamplerRng rng(29);
    const Vec z0 = oracle::random_vec(9, gen);
    const RunResult res = run_stochastic_pnp_admm(inst.fid, den, sched, z0, z0, 10, rng);
    REQUIRE(res.metrics.diverged);
    REQUIRE(res.metrics.note.find("diverged") != std::string::npos);
  }
}

TEST_CASE("stochastic pnp-admm on a desk CT problem", "[solvers]") {
  SamplerRng rng(31);
  auto ct = testinst::desk_ct(32, 48, 10, 1e4, rng);
  const Denoiser den = Denoiser::nlm(32, 32, 1, 3, 0.15);
  const ScaledDenoiser den_scaled(den, 32.0);
  const FidelityConstants c = ct.fid.constants();
  Schedule sched;  // the experimental protocol: N_j = 10, tau = 1, FISTA momentum
  sched.tau = 1.0;
  sched.eta_const = 1.0 / (2.0 * c.L_minibatch + 1.0);
  sched.inner_const = 10;
  sched.momentum_rule = Schedule::MomentumRule::fista;
  RunOptions opt;
  opt.ground_truth = &ct.truth;
  const Vec z0 = zeros(ct.fid.dim());
  SamplerRng solver_rng(37);
  const RunResult res =
      run_stochastic_pnp_admm(ct.fid, den_scaled, sched, z0, z0, 20, solver_rng, opt);
  REQUIRE_FALSE(res.metrics.diverged);
  const auto& rows = res.metrics.rows;
  REQUIRE(rows.size() == 20);
  // error decreases and the counters follow the protocol exactly
  REQUIRE(rows.back().err_to_truth_log10 < rows.front().err_to_truth_log10 - 0.1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].denoiser_calls_cum == static_cast<long long>(i + 1));
    REQUIRE(rows[i].grad_block_evals_cum == static_cast<long long>(10 * (i + 1)));
    REQUIRE(rows[i].inner_iters_used == 10);
  }
}

TEST_CASE("pnp-sgd", "[solvers]") {
  SECTION("identity denoiser with K = 1 reproduces the diagonal GD closed form") {
    const int d = 6;
    std::vector<Triplet> t;
    for (int i = 0; i < d; ++i) t.push_back({i, i, static_cast<double>(i + 1)});
    auto op = std::make_shared<SparseOperator>(d, d, std::move(t));
    SamplerRng gen(41);
    const Vec b = oracle::random_vec(d, gen);
    const Fidelity fid = Fidelity::least_squares(op, b, trivial_partition(d));
    const Denoiser den = Denoiser::identity(3, 2);
    const double eta = 0.25;
    const Vec z0 = oracle::random_vec(d, gen);
    SamplerRng rng(43);
    RunOptions opt;
    std::vector<Vec> xs;
    opt.observer = [&](const OuterSnapshot& s) { xs.push_back(*s.x_after); };
    run_pnp_sgd(fid, den, eta, Schedule::MomentumRule::zero, z0, 15, rng, opt);
    for (int k = 1; k <= 15; ++k) {
      for (int i = 0; i < d; ++i) {
        const double a = i + 1.0;
        const double x_star = b[i] / a;
        const double rate = 1.0 - eta * a * a / d;
        const double expect = x_star + std::pow(rate, k) * (z0[i] - x_star);
        REQUIRE(xs[k - 1][i] == Catch::Approx(expect).margin(1e-12));
      }
    }
  }
  SECTION("eta = 0 keeps the iterate constant after the first denoise") {
    SamplerRng gen(47);
    const auto inst = oracle::random_fidelity(12, 6, 3, gen, FidelityKind::least_squares);
    const Denoiser den = Denoiser::identity(3, 2);
    const Vec z0 = oracle::random_vec(6, gen);
    SamplerRng rng(53);
    RunOptions opt;
    std::vector<Vec> xs;
    opt.observer = [&](const OuterSnapshot& s) { xs.push_back(*s.x_after); };
    run_pnp_sgd(inst.fid, den, 0.0, Schedule::MomentumRule::fista, z0, 8, rng, opt);
    for (const Vec& x : xs) REQUIRE(x == z0);
  }
  SECTION("denoiser call counter equals the iteration counter") {
    SamplerRng gen(59);
    const auto inst = oracle::random_fidelity(12, 6, 3, gen, FidelityKind::least_squares);
    const Denoiser den = Denoiser::gaussian(3, 2, 0.7);
    SamplerRng rng(61);
    const RunResult res = run_pnp_sgd(inst.fid, den, 0.01, Schedule::MomentumRule::fista,
                                      zeros(6), 9, rng);
    for (std::size_t i = 0; i < res.metrics.rows.size(); ++i) {
      REQUIRE(res.metrics.rows[i].denoiser_calls_cum == static_cast<long long>(i + 1));
      REQUIRE(res.metrics.rows[i].grad_block_evals_cum == static_cast<long long>(i + 1));
    }
  }
}

TEST_CASE("pnp-fista", "[solvers]") {
  SECTION("identity denoiser minimizes a strongly convex quadratic") {
    SamplerRng gen(67);
    const auto inst = oracle::random_fidelity(24, 8, 4, gen, FidelityKind::least_squares, 0.4);
    const Denoiser den = Denoiser::identity(4, 2);
    const double L_usual = 2.0 * inst.fid.constants().L_minibatch;
    std::vector<Vec> xs;
    RunOptions opt;
    opt.observer = [&](const OuterSnapshot& s) { xs.push_back(*s.x_after); };
    const RunResult res = run_pnp_fista(inst.fid, den, 1.0 / L_usual, zeros(8), 150, opt);
    const Eigen::VectorXd x_star =
        (inst.A.transpose() * inst.A / 24 + 0.4 * Eigen::MatrixXd::Identity(8, 8))
            .ldlt()
            .solve(inst.A.transpose() * inst.b / 24);
    REQUIRE((oracle::to_eigen(res.state.x) - x_star).norm() <= 1e-6 * x_star.norm());
    // objective decreasing after burn-in
    for (std::size_t i = 21; i < xs.size(); ++i)
      REQUIRE(inst.fid.value(xs[i]) <= inst.fid.value(xs[i - 1]) * (1.0 + 1e-9) + 1e-15);
    REQUIRE(res.metrics.rows.back().grad_block_evals_cum == 150 * 4);
    REQUIRE(res.metrics.rows.back().denoiser_calls_cum == 150);
  }
  SECTION("matches pnp-sgd step for step when K = 1 with matching momentum") {
    SamplerRng gen(71);
    const auto inst = oracle::random_fidelity(14, 7, 1, gen, FidelityKind::least_squares, 0.2);
    const Denoiser den = Denoiser::gaussian(7, 1, 0.6);
    const Vec z0 = oracle::random_vec(7, gen);
    std::vector<Vec> x_fista, x_sgd;
    RunOptions opt_f, opt_s;
    opt_f.observer = [&](const OuterSnapshot& s) { x_fista.push_back(*s.x_after); };
    opt_s.observer = [&](const OuterSnapshot& s) { x_sgd.push_back(*s.x_after); };
    run_pnp_fista(inst.fid, den, 0.05, z0, 12, opt_f);
    SamplerRng rng(3);
    run_pnp_sgd(inst.fid, den, 0.05, Schedule::MomentumRule::fista, z0, 12, rng, opt_s);
    REQUIRE(x_fista.size() == x_sgd.size());
    for (std::size_t i = 0; i < x_fista.size(); ++i) REQUIRE(x_fista[i] == x_sgd[i]);
  }
}

TEST_CASE("inner objective identity", "[solvers]") {
  // The inner SGD minimizes (1/K) sum_q [tau f_q(x) + 1/2 ||x - z||^2]; its
  // full gradient at y must equal tau grad f(y) + y - z.
  SamplerRng gen(73);
  const auto inst = oracle::random_fidelity(20, 8, 4, gen, FidelityKind::pwls, 0.1);
  const double tau = 1.7;
  const Vec z = oracle::random_vec(8, gen);
  const Vec y = oracle::random_vec(8, gen);
  Vec avg(8, 0.0);
  for (int q = 0; q < 4; ++q) {
    Vec g = inst.fid.grad_minibatch(y, q);
    scale(g, tau);
    for (int i = 0; i < 8; ++i) g[i] += y[i] - z[i];
    axpy(0.25, g, avg);
  }
  Vec expect = inst.fid.grad(y);
  scale(expect, tau);
  for (int i = 0; i < 8; ++i) expect[i] += y[i] - z[i];
  REQUIRE(dist(avg, expect) <= 1e-12 * std::max(1.0, norm(expect)));
}
