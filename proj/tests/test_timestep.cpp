#include <doctest.h>

#include <cmath>

#include "specref/datagen.hpp"
#include "specref/norms.hpp"
#include "specref/timestep.hpp"

using namespace specref;

namespace {

double rel_err_vs_exact(const SpectralField& omega, int kappa, double nu,
                        double t) {
  TaylorGreen exact = taylor_green(kappa, nu, t, omega.grid);
  return rel_l2(omega, exact.omega);
}

}  // namespace

TEST_CASE("taylor-green accuracy with rk2_cn") {
  GridPtr g = make_grid(64, 1.0);
  SolverConfig cfg;
  cfg.scheme = Scheme::rk2_cn;
  cfg.dt = 1e-3;
  cfg.nu = 1e-3;
  SolverState st{0.0, taylor_green(1, cfg.nu, 0.0, g).omega};
  for (int k = 0; k < 1000; ++k) st = step(st, cfg);
  CHECK(st.t == doctest::Approx(1.0));
  CHECK(rel_err_vs_exact(st.field, 1, cfg.nu, 1.0) <= 1e-4);
}

TEST_CASE("zero field with zero forcing stays zero") {
  GridPtr g = make_grid(32, 1.0);
  SolverConfig cfg;
  SolverState st{0.0, SpectralField(g, false)};
  for (int k = 0; k < 5; ++k) st = step(st, cfg);
  for (const auto& z : st.field.coeffs) CHECK(std::abs(z) == 0.0);
}

TEST_CASE("pure diffusion follows the implicit closed form per mode") {
  // A single conjugate mode pair has vanishing convection (velocity is
  // parallel to the vorticity level sets), so the IMEX step reduces to the
  // diffusion factor exactly.
  GridPtr g = make_grid(32, 1.0);
  SpectralField f(g, false);
  f.coeffs[g->idx(2, 1)] = cplx{1.0, 0.5};
  f.coeffs[g->idx(30, 31)] = std::conj(cplx{1.0, 0.5});
  double ksq = g->k_sq[g->idx(2, 1)];
  double nu = 0.02, drag = 0.3, dt = 1e-2;
  double lam = -nu * ksq - drag;

  SolverConfig cfg;
  cfg.nu = nu;
  cfg.drag = drag;
  cfg.dt = dt;
  cfg.scheme = Scheme::imex_rk4;
  SolverState st{0.0, f};
  SolverState next = step(st, cfg);
  double factor_ie = 1.0 / (1.0 - dt * lam);
  CHECK(std::abs(next.field.coeffs[g->idx(2, 1)] -
                 f.coeffs[g->idx(2, 1)] * factor_ie) <= 1e-13);

  cfg.scheme = Scheme::rk2_cn;
  SolverState next2 = step(st, cfg);
  double factor_cn = (1.0 + 0.5 * dt * lam) / (1.0 - 0.5 * dt * lam);
  CHECK(std::abs(next2.field.coeffs[g->idx(2, 1)] -
                 f.coeffs[g->idx(2, 1)] * factor_cn) <= 1e-13);
}

TEST_CASE("b_gamma: fine step size, fixed point, derivative accuracy") {
  GridPtr g = make_grid(32, 1.0);
  SolverConfig cfg;
  cfg.nu = 1e-3;
  cfg.scheme = Scheme::imex_rk4;

  // Internal step dt^gamma: check via the diffusion factor with gamma = 2.
  SpectralField f(g, false);
  f.coeffs[g->idx(1, 0)] = cplx{1.0, 0.0};
  f.coeffs[g->idx(31, 0)] = cplx{1.0, 0.0};
  double ksq = g->k_sq[g->idx(1, 0)];
  SpectralField b = b_gamma(f, 2, 1e-2, cfg);
  double factor = 1.0 / (1.0 + 1e-4 * cfg.nu * ksq);
  CHECK(std::abs(b.coeffs[g->idx(1, 0)] - f.coeffs[g->idx(1, 0)] * factor) <=
        1e-14);
  CHECK_THROWS(b_gamma(f, 1, 1e-2, cfg));

  SpectralField zero(g, false);
  SpectralField bz = b_gamma(zero, 2, 1e-2, cfg);
  for (const auto& z : bz.coeffs) CHECK(std::abs(z) == 0.0);

  // D_t on Taylor-Green approximates the analytic time derivative
  // d/dt omega = -2 kappa_w^2 nu omega with error O(dt^gamma).
  GridPtr g64 = make_grid(64, 1.0);
  SpectralField tg = taylor_green(1, cfg.nu, 0.0, g64).omega;
  double kw = kTwoPi;
  double rate = -2.0 * kw * kw * cfg.nu;
  for (double dt : {0.05, 0.025}) {
    SpectralField dtf = dt_approx(tg, 2, dt, cfg);
    SpectralField expect = tg;
    for (auto& z : expect.coeffs) z *= rate;
    double err = rel_l2(dtf, expect);
    CHECK(err <= 2.0 * dt * dt * std::abs(rate));
  }

  // Richardson: halving the fine step halves the leading error term.
  SpectralField d1 = dt_approx(tg, 2, 0.04, cfg);
  SpectralField d2 = dt_approx(tg, 2, 0.04 / std::sqrt(2.0), cfg);  // h/2
  SpectralField d4 = dt_approx(tg, 2, 0.02, cfg);                   // h/4
  auto diff_norm = [](const SpectralField& a, const SpectralField& b) {
    SpectralField d = a;
    for (size_t i = 0; i < d.coeffs.size(); ++i) d.coeffs[i] -= b.coeffs[i];
    return sobolev_norm(d, NormSpec(0.0));
  };
  double r = diff_norm(d1, d2) / diff_norm(d2, d4);
  CHECK(r == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("steady stokes mode: forcing balancing diffusion gives D_t ~ 0") {
  GridPtr g = make_grid(32, 1.0);
  SpectralField om(g, false);
  om.coeffs[g->idx(2, 0)] = cplx{1.0, 0.0};
  om.coeffs[g->idx(30, 0)] = cplx{1.0, 0.0};
  double nu = 1e-2;
  SpectralField f = om;
  f.coeffs = kern::diag_mul(om.coeffs, symbols(*g).ksq);
  for (auto& z : f.coeffs) z *= nu;
  SolverConfig cfg;
  cfg.nu = nu;
  cfg.forcing = f;
  SpectralField dtf = dt_approx(om, 2, 0.05, cfg);
  CHECK(sobolev_norm(dtf, NormSpec(0.0)) <=
        1e-10 * sobolev_norm(om, NormSpec(0.0)));
}

TEST_CASE("advance: uniform times, trajectory length, enstrophy decay") {
  GridPtr g = make_grid(64, 1.0);
  SolverConfig cfg;
  cfg.dt = 1e-3;
  cfg.nu = 1e-3;
  cfg.scheme = Scheme::imex_rk4;
  SpectralField ic = dealias(mcwilliams_sample(g, 4, 1.0, 42, 1.0));
  make_mean_free(ic);
  SolverState st{0.0, ic};
  SpectralTrajectory traj = advance(st, cfg, 1.0, 100);
  CHECK(traj.size() == 11);  // floor(1.0 / (dt*100)) + 1
  for (size_t i = 1; i < traj.times.size(); ++i)
    CHECK(traj.times[i] - traj.times[i - 1] == doctest::Approx(0.1).epsilon(1e-12));

  double prev = -1.0;
  for (const auto& f : traj.snapshots) {
    double z = sobolev_norm(f, NormSpec(0.0));
    if (prev >= 0.0) CHECK(z <= prev * (1.0 + 1e-10));
    prev = z;
    for (const auto& c : f.coeffs) CHECK(std::isfinite(c.real()));
  }
}

TEST_CASE("unforced viscous evolution never grows enstrophy per step") {
  GridPtr g = make_grid(64, 1.0);
  SolverConfig cfg;
  cfg.dt = 1e-3;
  cfg.nu = 1e-3;
  cfg.scheme = Scheme::rk2_cn;
  SpectralField ic = dealias(mcwilliams_sample(g, 4, 1.0, 43, 1.0));
  make_mean_free(ic);
  SolverState st{0.0, ic};
  double prev = sobolev_norm(st.field, NormSpec(0.0));
  for (int k = 0; k < 200; ++k) {
    st = step(st, cfg);
    double z = sobolev_norm(st.field, NormSpec(0.0));
    CHECK(z * z <= prev * prev * (1.0 + 1e-10));
    prev = z;
  }
}

TEST_CASE("temporal convergence order of rk2_cn is two") {
  GridPtr g = make_grid(64, 1.0);
  int kappa = 4;
  double nu = 1e-2, t_end = 0.5;
  std::vector<double> errs;
  for (double dt : {4e-3, 2e-3, 1e-3, 5e-4}) {
    SolverConfig cfg;
    cfg.scheme = Scheme::rk2_cn;
    cfg.dt = dt;
    cfg.nu = nu;
    SolverState st{0.0, taylor_green(kappa, nu, 0.0, g).omega};
    long steps = std::lround(t_end / dt);
    for (long k = 0; k < steps; ++k) st = step(st, cfg);
    errs.push_back(rel_err_vs_exact(st.field, kappa, nu, t_end));
  }
  for (size_t i = 1; i < errs.size(); ++i) CHECK(errs[i - 1] / errs[i] >= 3.5);
}

TEST_CASE("v-p snapshots stay divergence-free") {
  GridPtr g = make_grid(32, 1.0);
  SolverConfig cfg;
  cfg.form = Formulation::vp;
  cfg.dt = 1e-3;
  cfg.nu = 1e-3;
  SolverState st{0.0, taylor_green(1, cfg.nu, 0.0, g).u};
  const auto& sy = symbols(*g);
  size_t plane = g->size();
  for (int k = 0; k < 20; ++k) {
    st = step(st, cfg);
    double scale = 0.0, dmax = 0.0;
    for (size_t m = 0; m < plane; ++m) {
      scale = std::max(scale, std::abs(st.field.coeffs[m]));
      dmax = std::max(dmax, std::abs(sy.ikx[m] * st.field.coeffs[m] +
                                     sy.iky[m] * st.field.coeffs[plane + m]));
    }
    CHECK(dmax <= 1e-12 * scale * kTwoPi * 16);
  }

  // And the V-P Taylor-Green solution matches the exact decay.
  SolverState st2{0.0, taylor_green(1, cfg.nu, 0.0, g).u};
  for (int k = 0; k < 200; ++k) st2 = step(st2, cfg);
  TaylorGreen exact = taylor_green(1, cfg.nu, 0.2, g);
  CHECK(rel_l2(st2.field, exact.u) <= 1e-5);
}

TEST_CASE("blow-up is detected and names the time") {
  GridPtr g = make_grid(32, 1.0);
  SolverConfig cfg;
  cfg.dt = 0.5;  // grossly unstable for an O(1) turbulent field
  cfg.nu = 1e-8;
  SpectralField ic = dealias(mcwilliams_sample(g, 4, 1.0, 44, 100.0));
  make_mean_free(ic);
  SolverState st{0.0, ic};
  bool thrown = false;
  try {
    for (int k = 0; k < 200; ++k) st = step(st, cfg);
  } catch (const BlowUpError& e) {
    thrown = true;
    CHECK(e.time > 0.0);
  }
  CHECK(thrown);
}

TEST_CASE("cfl_dt arithmetic and sentinel") {
  GridPtr g = make_grid(64, 1.0);
  RVec u1(g->size(), 1.0), u2(g->size(), 0.0);
  SpectralField u = transform_vector(u1, u2, g);
  CHECK(cfl_dt(u, *g, 0.5) == doctest::Approx(0.5 / 64.0));

  GridPtr g128 = make_grid(128, 1.0);
  RVec v1(g128->size(), 1.0), v2(g128->size(), 0.0);
  SpectralField v = transform_vector(v1, v2, g128);
  CHECK(cfl_dt(v, *g128, 0.5) == doctest::Approx(0.5 * cfl_dt(u, *g, 0.5)));

  SpectralField tg = taylor_green(1, 1e-3, 0.0, g).u;
  CHECK(cfl_dt(tg, *g, 0.4) == doctest::Approx(0.4 / 64.0).epsilon(1e-6));

  SpectralField rest(g, true);
  CHECK(std::isinf(cfl_dt(rest, *g, 0.5)));
  CHECK_THROWS(cfl_dt(rest, *g, 0.0));
}
