#pragma once

#include "specref/ops.hpp"

namespace specref {

enum class Scheme { imex_rk4, rk2_cn };
enum class Formulation { vs, vp };

// Constant per-mode factors of one IMEX step. The implicit symbol is
// lam = -nu*|k|^2 - drag, treated by Crank-Nicolson (rk2_cn) or per-stage
// implicit Euler (imex_rk4); convection is explicit and de-aliased.
struct StepSymbols {
  GridPtr grid;
  Scheme scheme = Scheme::rk2_cn;
  Formulation form = Formulation::vs;
  double dt = 0.0, nu = 0.0, drag = 0.0;
  CVec efac_half;  // 1 + dt/2 * lam
  CVec hfac_half;  // 1 / (1 - dt/2 * lam)
  CVec hfac_full;  // 1 / (1 - dt   * lam)
  CVec forcing;    // curl of force (vs) or 2-plane force (vp); empty if none
};

StepSymbols make_step_symbols(const GridPtr& g, Scheme scheme, Formulation form,
                              double dt, double nu, double drag,
                              const SpectralField* forcing);

// The raw (eager) execution context. The autodiff tape provides the same
// surface, so the step and convection algorithms below are written once.
struct RawCtx {
  const Grid* grid;
  explicit RawCtx(const Grid& g) : grid(&g) {}
  using F = CVec;

  F fft2(const F& v) { return kern::fft2(v, grid->n); }
  F ifft2_re(const F& v) { return kern::ifft2_re(v, grid->n); }
  F diag(const F& v, const CVec* sym) { return kern::diag_mul(v, *sym); }
  F mul(const F& a, const F& b) { return kern::mul(a, b); }
  F add(const F& a, const F& b) { return kern::add(a, b); }
  F sub(const F& a, const F& b) { return kern::sub(a, b); }
  F scale(const F& a, double c) { return kern::scale(a, c); }
  F axpy(const F& a, double c, const F& b) { return kern::axpy(a, c, b); }
  F add_const(const F& a, const CVec* c) { return kern::add_const(a, *c); }
  F zero_dc(const F& v) {
    F out = v;
    kern::zero_dc(out, grid->size());
    return out;
  }
  F leray(const F& v) { return kern::leray(v, *grid); }
  F slice(const F& v, int c) {
    size_t plane = grid->size();
    return F(v.begin() + c * plane, v.begin() + (c + 1) * plane);
  }
  F join(const F& a, const F& b) {
    F out(a.size() + b.size());
    std::copy(a.begin(), a.end(), out.begin());
    std::copy(b.begin(), b.end(), out.begin() + a.size());
    return out;
  }
};

// De-aliased convection (rot psi . grad omega) for the V-S formulation.
// Inputs are masked first, so the 64-point product of two band-limited
// factors is alias-free within the retained modes.
template <class Ctx>
typename Ctx::F convection_vs_t(Ctx& cx, const GridSymbols& s,
                                const typename Ctx::F& w_hat) {
  auto wd = cx.diag(w_hat, &s.mask);
  auto psi = cx.diag(wd, &s.inv_ksq);
  auto u1 = cx.ifft2_re(cx.diag(psi, &s.iky));
  auto u2 = cx.ifft2_re(cx.scale(cx.diag(psi, &s.ikx), -1.0));
  auto wx = cx.ifft2_re(cx.diag(wd, &s.ikx));
  auto wy = cx.ifft2_re(cx.diag(wd, &s.iky));
  auto conv = cx.add(cx.mul(u1, wx), cx.mul(u2, wy));
  return cx.diag(cx.fft2(conv), &s.mask);
}

// De-aliased (u . grad) u for the V-P formulation (componentwise products).
template <class Ctx>
typename Ctx::F convection_vp_t(Ctx& cx, const GridSymbols& s,
                                const typename Ctx::F& u_hat) {
  auto ud = cx.diag(u_hat, &s.mask);
  auto u1h = cx.slice(ud, 0);
  auto u2h = cx.slice(ud, 1);
  auto u1 = cx.ifft2_re(u1h);
  auto u2 = cx.ifft2_re(u2h);
  typename Ctx::F out_c[2];
  for (int c = 0; c < 2; ++c) {
    const auto& uc = c == 0 ? u1h : u2h;
    auto gx = cx.ifft2_re(cx.diag(uc, &s.ikx));
    auto gy = cx.ifft2_re(cx.diag(uc, &s.iky));
    auto conv = cx.add(cx.mul(u1, gx), cx.mul(u2, gy));
    out_c[c] = cx.diag(cx.fft2(conv), &s.mask);
  }
  return cx.join(out_c[0], out_c[1]);
}

// Explicit part: forcing minus convection.
template <class Ctx>
typename Ctx::F explicit_rhs_t(Ctx& cx, const GridSymbols& gs,
                               const StepSymbols& s, const typename Ctx::F& x) {
  auto conv = s.form == Formulation::vs ? convection_vs_t(cx, gs, x)
                                        : convection_vp_t(cx, gs, x);
  auto r = cx.scale(conv, -1.0);
  if (!s.forcing.empty()) r = cx.add_const(r, &s.forcing);
  return r;
}

namespace detail {
template <class Ctx>
typename Ctx::F stage_clean(Ctx& cx, const StepSymbols& s,
                            const typename Ctx::F& x) {
  return s.form == Formulation::vp ? cx.leray(x) : cx.zero_dc(x);
}
}  // namespace detail

// One IMEX step. rk2_cn: Heun on convection with Crank-Nicolson diffusion.
// imex_rk4: classical four-stage RK on convection with per-stage implicit
// Euler diffusion; with convection off it reduces to x/(1 - dt*lam) exactly.
template <class Ctx>
typename Ctx::F imex_step_t(Ctx& cx, const GridSymbols& gs, const StepSymbols& s,
                            const typename Ctx::F& x0) {
  if (s.scheme == Scheme::rk2_cn) {
    auto k1 = explicit_rhs_t(cx, gs, s, x0);
    auto ex = cx.diag(x0, &s.efac_half);
    auto xs = detail::stage_clean(
        cx, s, cx.diag(cx.axpy(ex, s.dt, k1), &s.hfac_half));
    auto k2 = explicit_rhs_t(cx, gs, s, xs);
    auto xn = cx.diag(cx.axpy(ex, 0.5 * s.dt, cx.add(k1, k2)), &s.hfac_half);
    return detail::stage_clean(cx, s, xn);
  }
  auto k1 = explicit_rhs_t(cx, gs, s, x0);
  auto x1 = detail::stage_clean(
      cx, s, cx.diag(cx.axpy(x0, 0.5 * s.dt, k1), &s.hfac_half));
  auto k2 = explicit_rhs_t(cx, gs, s, x1);
  auto x2 = detail::stage_clean(
      cx, s, cx.diag(cx.axpy(x0, 0.5 * s.dt, k2), &s.hfac_half));
  auto k3 = explicit_rhs_t(cx, gs, s, x2);
  auto x3 = detail::stage_clean(
      cx, s, cx.diag(cx.axpy(x0, s.dt, k3), &s.hfac_full));
  auto k4 = explicit_rhs_t(cx, gs, s, x3);
  auto ksum = cx.add(cx.add(k1, k4), cx.scale(cx.add(k2, k3), 2.0));
  auto xn = cx.diag(cx.axpy(x0, s.dt / 6.0, ksum), &s.hfac_full);
  return detail::stage_clean(cx, s, xn);
}

}  // namespace specref
