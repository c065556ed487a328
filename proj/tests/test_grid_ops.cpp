#include <doctest.h>

#include <cmath>

#include "specref/datagen.hpp"
#include "specref/norms.hpp"
#include "specref/ops.hpp"

using namespace specref;

namespace {

SpectralField random_scalar(const GridPtr& g, uint64_t seed, bool band_limited = true) {
  SpectralField f = grf_sample(g, 2.5, 7.0, seed);
  if (band_limited) f = dealias(f);
  double nn = sobolev_norm(f, NormSpec(0.0));
  for (auto& z : f.coeffs) z /= nn;
  return f;
}

SpectralField random_divfree(const GridPtr& g, uint64_t seed) {
  return rot_grad(inverse_laplacian(random_scalar(g, seed)));
}

double linf_diff(const CVec& a, const CVec& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double linf(const CVec& a) {
  double m = 0.0;
  for (const auto& z : a) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

TEST_CASE("make_grid wavenumbers, dealias mask, rejection") {
  GridPtr g8 = make_grid(8, 1.0);
  RVec expect = {0, 1, 2, 3, -4, -3, -2, -1};
  for (int j = 0; j < 8; ++j)
    CHECK(g8->kx[j] == doctest::Approx(kTwoPi * expect[j]));
  CHECK(g8->k_sq[0] == 0.0);

  GridPtr g64 = make_grid(64, 1.0);
  for (int i = 0; i < 64; ++i) {
    int si = std::abs(signed_freq(i, 64));
    bool kept = g64->dealias_mask[g64->idx(i, 0)] != 0;
    CHECK(kept == (si <= 21));
  }
  // k_sq symmetric under k -> -k.
  for (int i = 1; i < 64; ++i)
    for (int j = 1; j < 64; ++j)
      CHECK(g64->k_sq[g64->idx(i, j)] ==
            g64->k_sq[g64->idx(64 - i, 64 - j)]);

  CHECK_THROWS(make_grid(7, 1.0));
  CHECK_THROWS(make_grid(4, 1.0));
  CHECK_THROWS(make_grid(8, 0.0));
}

TEST_CASE("transform: pure mode, round trip, trig interpolation") {
  GridPtr g = make_grid(8, 1.0);
  RVec f(g->size());
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      f[g->idx(i, j)] = std::sin(kTwoPi * i / 8.0);
  SpectralField fh = transform(f, g);
  // Only the conjugate pair at (+-1, 0) carries energy.
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double mag = std::abs(fh.coeffs[g->idx(i, j)]);
      if ((i == 1 || i == 7) && j == 0)
        CHECK(mag == doctest::Approx(32.0));  // n^2 / 2
      else
        CHECK(mag <= 1e-12 * 32.0);
    }

  // Round trip on a random 32^2 field.
  GridPtr g32 = make_grid(32, 1.0);
  SpectralField r = random_scalar(g32, 5, false);
  RVec phys = inverse(r);
  SpectralField r2 = transform(phys, g32);
  CHECK(linf_diff(r.coeffs, r2.coeffs) <= 1e-12 * linf(r.coeffs));

  // Upsampling sin(2pi x) to 32^2 matches the analytic values.
  RVec up = inverse(fh, 32);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      CHECK(up[size_t(i) * 32 + j] ==
            doctest::Approx(std::sin(kTwoPi * i / 32.0)).epsilon(1e-12));

  RVec bad(30);
  CHECK_THROWS(transform(bad, g));
}

TEST_CASE("parseval: spectral L2 equals mesh-weighted quadrature") {
  GridPtr g = make_grid(64, 1.0);
  for (int s = 0; s < 5; ++s) {
    SpectralField f = random_scalar(g, 10 + s, false);
    RVec phys = inverse(f);
    double quad = 0.0;
    for (double v : phys) quad += v * v;
    quad = std::sqrt(quad * g->dx * g->dx);
    CHECK(sobolev_norm(f, NormSpec(0.0)) == doctest::Approx(quad).epsilon(1e-12));
  }
}

TEST_CASE("dealias: keep low mode, kill high mode, idempotent") {
  GridPtr g = make_grid(16, 1.0);
  SpectralField f(g, false);
  f.coeffs[g->idx(1, 0)] = cplx{1.0, 0.0};
  SpectralField d = dealias(f);
  CHECK(d.coeffs[g->idx(1, 0)] == f.coeffs[g->idx(1, 0)]);

  SpectralField hi(g, false);
  hi.coeffs[g->idx(7, 0)] = cplx{1.0, 0.0};
  hi.coeffs[g->idx(9, 0)] = cplx{1.0, 0.0};
  SpectralField dh = dealias(hi);
  CHECK(linf(dh.coeffs) == 0.0);

  SpectralField r = random_scalar(g, 3, false);
  SpectralField d1 = dealias(r);
  SpectralField d2 = dealias(d1);
  CHECK(linf_diff(d1.coeffs, d2.coeffs) == 0.0);
}

TEST_CASE("inverse_laplacian: eigenfunction, zero, inverse relation") {
  GridPtr g = make_grid(32, 1.0);
  RVec f(g->size());
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      f[g->idx(i, j)] = std::sin(kTwoPi * i / 32.0);
  SpectralField om = transform(f, g);
  SpectralField psi = inverse_laplacian(om);
  RVec pphys = inverse(psi);
  for (size_t i = 0; i < pphys.size(); ++i)
    CHECK(pphys[i] == doctest::Approx(f[i] / (kTwoPi * kTwoPi)).epsilon(1e-12));

  SpectralField zero(g, false);
  CHECK(linf(inverse_laplacian(zero).coeffs) == 0.0);

  SpectralField r = random_scalar(g, 6);
  SpectralField back = inverse_laplacian(r);
  back.coeffs = kern::diag_mul(back.coeffs, symbols(*g).ksq);
  CHECK(linf_diff(back.coeffs, r.coeffs) <= 1e-12 * linf(r.coeffs));

  SpectralField with_mean = r;
  with_mean.coeffs[0] = cplx{7.0, 0.0};
  CHECK_THROWS(inverse_laplacian(with_mean));
}

TEST_CASE("rot_grad: analytic, constant, divergence-free") {
  GridPtr g = make_grid(32, 1.0);
  RVec psi(g->size());
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      psi[g->idx(i, j)] = std::sin(kTwoPi * j / 32.0);
  SpectralField u = rot_grad(transform(psi, g));
  RVec up = inverse(u);
  size_t plane = g->size();
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      CHECK(up[g->idx(i, j)] ==
            doctest::Approx(kTwoPi * std::cos(kTwoPi * j / 32.0)).epsilon(1e-12));
      CHECK(std::abs(up[plane + g->idx(i, j)]) <= 1e-12 * kTwoPi);
    }

  RVec cst(g->size(), 3.5);
  SpectralField uc = rot_grad(transform(cst, g));
  CHECK(linf(uc.coeffs) <= 1e-9);

  SpectralField ur = rot_grad(inverse_laplacian(random_scalar(g, 8)));
  const auto& sy = symbols(*g);
  double dmax = 0.0;
  for (size_t m = 0; m < plane; ++m)
    dmax = std::max(dmax, std::abs(sy.ikx[m] * ur.coeffs[m] +
                                   sy.iky[m] * ur.coeffs[plane + m]));
  CHECK(dmax <= 1e-12 * linf(ur.coeffs) * kTwoPi * 16);

  CHECK_THROWS(rot_grad(ur));  // vector input rejected
}

TEST_CASE("curl2d: vector identity and analytic case") {
  GridPtr g = make_grid(32, 1.0);
  SpectralField psi = random_scalar(g, 9);
  SpectralField lhs = curl2d(rot_grad(psi));
  SpectralField rhs = psi;
  rhs.coeffs = kern::diag_mul(psi.coeffs, symbols(*g).ksq);
  CHECK(linf_diff(lhs.coeffs, rhs.coeffs) <= 1e-12 * linf(rhs.coeffs));

  RVec u1(g->size()), u2(g->size(), 0.0);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      u1[g->idx(i, j)] = std::cos(kTwoPi * j / 32.0);
  SpectralField w = curl2d(transform_vector(u1, u2, g));
  RVec wp = inverse(w);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      CHECK(wp[g->idx(i, j)] ==
            doctest::Approx(kTwoPi * std::sin(kTwoPi * j / 32.0)).epsilon(1e-12));

  RVec cst(g->size(), 1.0);
  CHECK(linf(curl2d(transform_vector(cst, cst, g)).coeffs) <= 1e-9);
  CHECK_THROWS(curl2d(psi));  // scalar input rejected
}

TEST_CASE("leray projection: annihilates gradients, fixes range, idempotent") {
  GridPtr g = make_grid(32, 1.0);
  // Pure gradient of sin(2pi x): (2pi cos(2pi x), 0).
  RVec g1(g->size()), g2(g->size(), 0.0);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      g1[g->idx(i, j)] = kTwoPi * std::cos(kTwoPi * i / 32.0);
  SpectralField grad = transform_vector(g1, g2, g);
  SpectralField pg = leray_project(grad);
  CHECK(linf(pg.coeffs) <= 1e-12 * linf(grad.coeffs));

  SpectralField df = random_divfree(g, 11);
  SpectralField pdf = leray_project(df);
  CHECK(linf_diff(pdf.coeffs, df.coeffs) <= 1e-12 * linf(df.coeffs));

  SpectralField mix(g, true);
  SpectralField a = random_scalar(g, 12), b = random_scalar(g, 13);
  std::copy(a.coeffs.begin(), a.coeffs.end(), mix.coeffs.begin());
  std::copy(b.coeffs.begin(), b.coeffs.end(), mix.coeffs.begin() + mix.plane());
  SpectralField p1 = leray_project(mix), p2 = leray_project(p1);
  CHECK(linf_diff(p1.coeffs, p2.coeffs) <= 1e-13 * linf(p1.coeffs));
}

namespace {

// Dense convection oracle: upsample the (dealiased) factors to an m^2 grid,
// multiply pointwise there, transform back, truncate, and mask.
SpectralField convection_vs_oracle(const SpectralField& omega, int m) {
  const GridPtr& g = omega.grid;
  int n = g->n;
  const auto& sy = symbols(*g);
  CVec wd = kern::diag_mul(omega.coeffs, sy.mask);
  CVec psi = kern::diag_mul(wd, sy.inv_ksq);
  auto up = [&](const CVec& c) { return kern::ifft2(kern::pad2(c, n, m), m); };
  CVec u1 = up(kern::diag_mul(psi, sy.iky));
  CVec u2 = up(kern::scale(kern::diag_mul(psi, sy.ikx), -1.0));
  CVec wx = up(kern::diag_mul(wd, sy.ikx));
  CVec wy = up(kern::diag_mul(wd, sy.iky));
  CVec prod(size_t(m) * m);
  for (size_t i = 0; i < prod.size(); ++i)
    prod[i] = cplx{u1[i].real() * wx[i].real() + u2[i].real() * wy[i].real(), 0.0};
  SpectralField out = omega;
  out.coeffs = kern::diag_mul(kern::trunc2(kern::fft2(prod, m), m, n), sy.mask);
  return out;
}

SpectralField convection_vp_oracle(const SpectralField& u, int m) {
  const GridPtr& g = u.grid;
  int n = g->n;
  size_t plane = g->size(), fine = size_t(m) * m;
  const auto& sy = symbols(*g);
  CVec ud = kern::diag_mul(u.coeffs, sy.mask);
  auto up = [&](const CVec& c) { return kern::ifft2(kern::pad2(c, n, m), m); };
  CVec u1 = up(CVec(ud.begin(), ud.begin() + plane));
  CVec u2 = up(CVec(ud.begin() + plane, ud.end()));
  SpectralField out = u;
  for (int c = 0; c < 2; ++c) {
    CVec uc(ud.begin() + c * plane, ud.begin() + (c + 1) * plane);
    CVec gx = up(kern::diag_mul(uc, sy.ikx));
    CVec gy = up(kern::diag_mul(uc, sy.iky));
    CVec prod(fine);
    for (size_t i = 0; i < fine; ++i)
      prod[i] =
          cplx{u1[i].real() * gx[i].real() + u2[i].real() * gy[i].real(), 0.0};
    CVec res = kern::diag_mul(kern::trunc2(kern::fft2(prod, m), m, n), sy.mask);
    std::copy(res.begin(), res.end(), out.coeffs.begin() + c * plane);
  }
  return out;
}

}  // namespace

TEST_CASE("convection_vs: constant, Taylor-Green, oversampled oracle") {
  GridPtr g = make_grid(64, 1.0);
  SpectralField c(g, false);  // constant field is mean only: convection zero
  CHECK(linf(convection_vs(c).coeffs) == 0.0);

  // Taylor-Green: velocity is parallel to the vorticity level sets.
  GridPtr g128 = make_grid(128, 1.0);
  SpectralField tg = taylor_green(1, 1e-3, 0.0, g128).omega;
  SpectralField conv = convection_vs(tg);
  CHECK(sobolev_norm(conv, NormSpec(0.0)) <=
        1e-10 * sobolev_norm(tg, NormSpec(0.0)));

  // Random field against the 192^2 dense-product oracle.
  SpectralField r = grf_sample(g, 2.5, 7.0, 21);
  double nn = sobolev_norm(r, NormSpec(0.0));
  for (auto& z : r.coeffs) z /= nn;
  SpectralField fast = convection_vs(r);
  SpectralField slow = convection_vs_oracle(r, 192);
  CHECK(linf_diff(fast.coeffs, slow.coeffs) <= 1e-10 * linf(slow.coeffs));
}

TEST_CASE("convection_vp: constant, oracle, Taylor-Green pressure gradient") {
  GridPtr g = make_grid(64, 1.0);
  RVec cst(g->size(), 1.0);
  SpectralField cu = transform_vector(cst, cst, g);
  CHECK(linf(convection_vp(cu).coeffs) <= 1e-9 * linf(cu.coeffs));

  // u = rot_grad(psi) with psi = sin(2pi x) sin(2pi y).
  RVec psi(g->size());
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j)
      psi[g->idx(i, j)] =
          std::sin(kTwoPi * i / 64.0) * std::sin(kTwoPi * j / 64.0);
  SpectralField u = rot_grad(transform(psi, g));
  SpectralField fast = convection_vp(u);
  SpectralField slow = convection_vp_oracle(u, 192);
  CHECK(linf_diff(fast.coeffs, slow.coeffs) <= 1e-10 * (linf(slow.coeffs) + 1.0));

  // Taylor-Green: (u.grad)u is a pure pressure gradient.
  SpectralField tg = taylor_green(1, 1e-3, 0.0, g).u;
  SpectralField proj = leray_project(convection_vp(tg));
  CHECK(sobolev_norm(proj, NormSpec(0.0)) <=
        1e-10 * sobolev_norm(tg, NormSpec(0.0)));
}

TEST_CASE("trilinear form: skew-symmetry and a divergence counterexample") {
  GridPtr g = make_grid(32, 1.0);
  for (int s = 0; s < 5; ++s) {
    SpectralField z = random_divfree(g, 100 + s);
    SpectralField u = random_divfree(g, 200 + s);
    SpectralField v = random_divfree(g, 300 + s);
    double bound = seminorm(z, 1.0) * seminorm(u, 1.0) * seminorm(v, 1.0);
    CHECK(std::abs(trilinear_form(z, u, v) + trilinear_form(z, v, u)) <=
          1e-10 * bound);
    CHECK(std::abs(trilinear_form(z, v, v)) <= 1e-10 * bound);
  }

  // z = grad(phi) has divergence, and the identity visibly fails.
  RVec phi(g->size());
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      phi[g->idx(i, j)] = std::sin(kTwoPi * i / 32.0);
  SpectralField phih = transform(phi, g);
  const auto& sy = symbols(*g);
  SpectralField zbad(g, true);
  CVec gx = kern::diag_mul(phih.coeffs, sy.ikx);
  CVec gy = kern::diag_mul(phih.coeffs, sy.iky);
  std::copy(gx.begin(), gx.end(), zbad.coeffs.begin());
  std::copy(gy.begin(), gy.end(), zbad.coeffs.begin() + zbad.plane());
  SpectralField u = random_divfree(g, 400);
  SpectralField v = random_divfree(g, 401);
  double bound = seminorm(zbad, 1.0) * seminorm(u, 1.0) * seminorm(v, 1.0);
  CHECK(std::abs(trilinear_form(zbad, v, v)) > 1e-10 * bound);
  (void)u;

  GridPtr g2 = make_grid(16, 1.0);
  SpectralField mism = random_divfree(g2, 402);
  CHECK_THROWS(trilinear_form(mism, u, v));
}

TEST_CASE("conjugate symmetry preserved by operations") {
  GridPtr g = make_grid(32, 1.0);
  SpectralField f = random_scalar(g, 500, false);
  for (const SpectralField& out :
       {dealias(f), inverse_laplacian(f), convection_vs(f), curl2d(rot_grad(f))}) {
    CHECK_NOTHROW(inverse(out));  // throws if the imaginary residue is large
  }
}

TEST_CASE("poincare inequality with the scaled wavenumber constant") {
  GridPtr g = make_grid(32, 1.0);
  for (int s = 0; s < 5; ++s) {
    SpectralField f = random_scalar(g, 600 + s, false);
    CHECK(seminorm(f, 1.0) >= kTwoPi * sobolev_norm(f, NormSpec(0.0)) * (1 - 1e-12));
  }
}

TEST_CASE("spectral resampling round trip preserves retained modes") {
  GridPtr g = make_grid(64, 1.0);
  GridPtr fine = make_grid(96, 1.0);
  SpectralField f = random_scalar(g, 700, false);
  SpectralField up = resample(f, fine);
  SpectralField back = resample(up, g);
  CHECK(linf_diff(back.coeffs, f.coeffs) <= 1e-12 * linf(f.coeffs));
}
