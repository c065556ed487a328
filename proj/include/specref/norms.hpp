#pragma once

#include "specref/grid.hpp"

namespace specref {

// Sobolev order / regularization / quotient-space selector for norms.
// quotient (exclude k=0) is forced on when s < 0 and alpha == 0, since the
// unregularized negative weight is singular at the zero mode.
struct NormSpec {
  double s = 0.0;
  double alpha = 0.0;
  bool quotient = false;

  NormSpec(double s_, double alpha_ = 0.0, bool quotient_ = false)
      : s(s_), alpha(alpha_), quotient(quotient_ || (s_ < 0.0 && alpha_ == 0.0)) {}
};

// ||f||_s^2 = sum (1+|k|^2)^s |c_k|^2 with the grid's scaled wavenumbers and
// the quadrature weight making s=0 the physical L2 norm. Vector fields sum
// over components. Errors when s<0, alpha=0 and the field has a mean.
double sobolev_norm(const SpectralField& f, const NormSpec& spec);

// |f|_s^2 = sum_{k != 0} |k|^{2s} |c_k|^2 (a norm on the quotient space).
double seminorm(const SpectralField& f, double s);

// Regularized negative norm (sum_{k != 0} (alpha+|k|^2)^{-1} |c_k|^2)^{1/2}.
// Requires a mean-free field when alpha == 0.
double neg_norm(const SpectralField& f, double alpha = 0.0);

// Two independent routes to the dual norm of a mean-free field: the
// functional value <f, (-Delta)^{-1} f>^{1/2} via inverse_laplacian plus mesh
// quadrature, and the spectral seminorm |f|_{-1}.
struct DualNormPair {
  double functional;
  double seminorm;
};
DualNormPair dual_norm_check(const SpectralField& f);

// Bochner norm over a uniformly spaced trajectory; p = 2 integrates
// (dt * sum ||.||_s^2)^{1/2}, p = inf takes the max over snapshots.
double bochner_norm(const SpectralTrajectory& traj, double s, double p);

// Radial shell sums with unit-width bins centered at integer |j| radii.
struct SpectrumCurve {
  RVec k_bins;
  RVec values;
};
SpectrumCurve enstrophy_spectrum(const SpectralField& omega);
SpectrumCurve energy_spectrum(const SpectralField& u);

// Least-squares slope of log(value) vs log(k) over bins in [k_lo, k_hi].
double fit_slope(const SpectrumCurve& curve, double k_lo, double k_hi);

// ||a - b||_0 / ||b||_0. Errors when ||b|| == 0.
double rel_l2(const SpectralField& a, const SpectralField& b);

}  // namespace specref
