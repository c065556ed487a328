#include <doctest.h>

#include <cmath>

#include "specref/datagen.hpp"
#include "specref/norms.hpp"
#include "specref/ops.hpp"

using namespace specref;

TEST_CASE("taylor-green: pointwise value, curl consistency, decay rate") {
  GridPtr g = make_grid(32, kTwoPi);
  TaylorGreen tg = taylor_green(1, 1e-3, 0.0, g);
  RVec w = inverse(tg.omega);
  // omega(pi/2, pi/2) = 2 at t = 0 for kappa = 1.
  CHECK(w[g->idx(8, 8)] == doctest::Approx(2.0).epsilon(1e-12));

  SpectralField curl = curl2d(tg.u);
  double diff = 0.0, scale = 0.0;
  for (size_t i = 0; i < curl.coeffs.size(); ++i) {
    diff = std::max(diff, std::abs(curl.coeffs[i] - tg.omega.coeffs[i]));
    scale = std::max(scale, std::abs(tg.omega.coeffs[i]));
  }
  CHECK(diff <= 1e-12 * scale);

  double nu = 1e-3, s = 0.7;
  TaylorGreen later = taylor_green(2, nu, s, g);
  TaylorGreen start = taylor_green(2, nu, 0.0, g);
  double ratio = sobolev_norm(later.omega, NormSpec(0.0)) /
                 sobolev_norm(start.omega, NormSpec(0.0));
  double kw = kTwoPi * 2 / g->L;
  CHECK(ratio == doctest::Approx(std::exp(-2.0 * kw * kw * nu * s)).epsilon(1e-12));

  CHECK_THROWS(taylor_green(9, 1e-3, 0.0, g));  // 2*kappa beyond Nyquist
}

TEST_CASE("grf sampler: determinism, mean-free, per-mode variance") {
  GridPtr g = make_grid(32, 1.0);
  SpectralField a = grf_sample(g, 2.5, 7.0, 99);
  SpectralField b = grf_sample(g, 2.5, 7.0, 99);
  for (size_t i = 0; i < a.coeffs.size(); ++i) CHECK(a.coeffs[i] == b.coeffs[i]);
  CHECK(std::abs(a.coeffs[0]) == 0.0);
  CHECK_NOTHROW(inverse(a));  // conjugate symmetric

  // Monte Carlo per-mode variance against (|k|^2 + tau^2)^(-alpha).
  double alpha = 2.5, tau = 7.0;
  int samples = 2000;
  double n2 = 32.0 * 32.0;
  std::vector<std::pair<int, int>> probes = {{1, 0}, {0, 2}, {2, 1}, {3, 3}};
  RVec acc(probes.size(), 0.0);
  for (int s = 0; s < samples; ++s) {
    SpectralField f = grf_sample(g, alpha, tau, 10000 + s);
    for (size_t p = 0; p < probes.size(); ++p) {
      cplx c = f.coeffs[g->idx(probes[p].first, probes[p].second)] / n2;
      acc[p] += std::norm(c);
    }
  }
  for (size_t p = 0; p < probes.size(); ++p) {
    double si = probes[p].first, sj = probes[p].second;
    double ksq = kTwoPi * kTwoPi * (si * si + sj * sj);
    double expect = std::pow(ksq + tau * tau, -alpha);
    CHECK(acc[p] / samples == doctest::Approx(expect).epsilon(0.10));
  }
}

TEST_CASE("mcwilliams sampler: radial law, exact energy normalization") {
  GridPtr g = make_grid(64, 1.0);
  int k0 = 4;
  double tau = 1.0;

  SpectralField om = mcwilliams_sample(g, k0, tau, 7, 1.0);
  SpectralField u = rot_grad(inverse_laplacian(om));
  double e = sobolev_norm(u, NormSpec(0.0));
  CHECK(0.5 * e * e == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(om.coeffs[0]) == 0.0);
  CHECK_NOTHROW(inverse(om));

  // Radial average of |psi_hat|^2 over seeds against the modulus law
  // (unnormalized draw, so the constant is known).
  int samples = 160;
  double n2 = 64.0 * 64.0;
  RVec shell(20, 0.0), count(20, 0.0);
  for (int s = 0; s < samples; ++s) {
    SpectralField o = mcwilliams_sample(g, k0, tau, 500 + s, -1.0);
    SpectralField psi = inverse_laplacian(o);
    for (int i = 0; i < 64; ++i) {
      for (int j = 0; j < 64; ++j) {
        double r = std::hypot(double(signed_freq(i, 64)), double(signed_freq(j, 64)));
        int bin = int(std::floor(r + 0.5));
        if (bin < 2 || bin >= 20) continue;
        shell[bin] += std::norm(psi.coeffs[g->idx(i, j)] / n2);
        count[bin] += 1.0;
      }
    }
  }
  for (int bin = 2; bin < 16; ++bin) {
    double got = shell[bin] / count[bin];
    double expect = 1.0 / (bin * (tau * tau + std::pow(double(bin) / k0, 4.0)));
    CHECK(got / expect == doctest::Approx(1.0).epsilon(0.15));
  }
}

TEST_CASE("generate_dataset: shapes, mean-free snapshots, determinism") {
  DatasetSpec spec;
  spec.n_train = 2;
  spec.n_test = 1;
  spec.n_gen = 64;
  spec.n_down = 32;
  spec.dt = 2e-3;
  spec.burn_in = 0.1;
  spec.ell = 4;
  spec.n_t = 3;
  spec.delta_t = 0.02;
  IcSpec ic;
  ic.kind = IcKind::mcwilliams;
  ic.seed = 11;
  SolverConfig cfg;
  cfg.dt = spec.dt;
  cfg.nu = 1e-3;
  Dataset ds = generate_dataset(spec, ic, cfg);
  REQUIRE(ds.samples.size() == 3);
  CHECK(ds.n == 32);
  size_t plane = 32 * 32;
  for (const auto& s : ds.samples) {
    CHECK(s.input.size() == spec.ell * plane);
    CHECK(s.output.size() == spec.n_t * plane);
    CHECK(s.times_in.size() == size_t(spec.ell));
    CHECK(s.times_out.size() == size_t(spec.n_t));
    // Snapshots are mean-free.
    GridPtr g = make_grid(32, 1.0);
    RVec first(s.input.begin(), s.input.begin() + plane);
    SpectralField f = transform(first, g);
    CHECK(std::abs(f.coeffs[0]) <= 1e-10 * plane);
  }
  // Uniform snapshot spacing across the input/output boundary.
  const auto& s0 = ds.samples[0];
  for (size_t i = 1; i < s0.times_in.size(); ++i)
    CHECK(s0.times_in[i] - s0.times_in[i - 1] == doctest::Approx(spec.delta_t));
  CHECK(s0.times_out[0] - s0.times_in.back() == doctest::Approx(spec.delta_t));

  Dataset ds2 = generate_dataset(spec, ic, cfg);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(ds.samples[i].input == ds2.samples[i].input);
    CHECK(ds.samples[i].output == ds2.samples[i].output);
  }
}

TEST_CASE("taylor-green dataset with zero burn-in starts at the analytic field") {
  DatasetSpec spec;
  spec.n_gen = 64;
  spec.n_down = 64;
  spec.L = kTwoPi;
  spec.dt = 1e-3;
  spec.burn_in = 0.0;
  spec.ell = 2;
  spec.n_t = 2;
  spec.delta_t = 0.01;
  SolverConfig cfg;
  cfg.dt = spec.dt;
  cfg.nu = 1e-3;
  cfg.scheme = Scheme::rk2_cn;
  Dataset ds = generate_taylor_green_dataset(spec, {3}, cfg);
  GridPtr g = make_grid(64, kTwoPi);
  size_t plane = g->size();
  RVec first(ds.samples[0].input.begin(), ds.samples[0].input.begin() + plane);
  RVec exact = inverse(taylor_green(3, cfg.nu, 0.0, g).omega);
  double dmax = 0.0;
  for (size_t i = 0; i < plane; ++i)
    dmax = std::max(dmax, std::abs(first[i] - exact[i]));
  CHECK(dmax <= 1e-11);
}
