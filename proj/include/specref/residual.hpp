#pragma once

#include "specref/imex.hpp"
#include "specref/norms.hpp"

namespace specref {

// PDE residual of the V-S formulation in spectral coefficients:
// R = curl_f - dt_omega - dealias(rot psi . grad omega) + nu*Lap(omega).
// The zero mode is removed: the residual of a mean-free evolution is
// mean-free (the convection mean is a flux integral over the torus), so any
// DC content is numerical junk the quotient-space norms must not see.
template <class Ctx>
typename Ctx::F residual_vs_t(Ctx& cx, const GridSymbols& gs,
                              const typename Ctx::F& w_hat,
                              const typename Ctx::F& dt_w,
                              const CVec* curl_f, double nu) {
  auto conv = convection_vs_t(cx, gs, w_hat);
  auto r = cx.sub(cx.scale(conv, -1.0), dt_w);
  r = cx.axpy(r, -nu, cx.diag(w_hat, &gs.ksq));  // + nu * Laplacian
  if (curl_f) r = cx.add_const(r, curl_f);
  return cx.zero_dc(r);
}

// V-P residual, Leray-projected so only the solenoidal part (the part seen
// by divergence-free test functions) contributes to the norm.
template <class Ctx>
typename Ctx::F residual_vp_t(Ctx& cx, const GridSymbols& gs,
                              const typename Ctx::F& u_hat,
                              const typename Ctx::F& dt_u, const CVec* f,
                              double nu) {
  auto conv = convection_vp_t(cx, gs, u_hat);
  auto r = cx.sub(cx.scale(conv, -1.0), dt_u);
  r = cx.axpy(r, -nu, cx.diag(u_hat, &gs.ksq));
  if (f) r = cx.add_const(r, f);
  return cx.zero_dc(cx.leray(r));
}

SpectralField residual_vs(const SpectralField& omega,
                          const SpectralField& dt_omega,
                          const SpectralField* curl_f, double nu);
SpectralField residual_vp(const SpectralField& u, const SpectralField& dt_u,
                          const SpectralField* f, double nu);

struct EstimatorConfig {
  Formulation form = Formulation::vs;
  double nu = 1e-3;
  double alpha = 0.0;               // regularization of the negative norm
  const SpectralField* forcing = nullptr;
};

// eta_m = || R(field_m, dt_field_m) ||_{ -1, alpha, n }.
double eta_m(const SpectralField& field_m, const SpectralField& dt_field_m,
             const EstimatorConfig& cfg);

struct EstimatorReport {
  Formulation form = Formulation::vs;
  RVec times;
  RVec eta;           // per-step eta_m
  double eta_total = 0.0;  // sqrt(sum eta_m^2)
};

// Per-step estimator over aligned snapshots/derivatives.
EstimatorReport eta_total(const SpectralTrajectory& traj,
                          const std::vector<SpectralField>& dt_fields,
                          const EstimatorConfig& cfg);

// Weight spectrum of the squared negative norm: quad/(alpha+|k|^2), zero DC.
// Shared by the tape-side loss; cached per (grid, alpha).
std::shared_ptr<const CVec> neg_norm_weights(const GridPtr& g, double alpha);
// Weight spectrum of the squared L2 norm (uniform quad weight).
std::shared_ptr<const CVec> l2_weights(const GridPtr& g);

}  // namespace specref
