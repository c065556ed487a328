#pragma once

#include "specref/fft.hpp"
#include "specref/grid.hpp"

namespace specref {

// Plane-level kernels on raw coefficient arrays. Batch is inferred from the
// vector size; `sym` arrays are one plane and broadcast across components.
namespace kern {

CVec fft2(const CVec& v, int n);
CVec ifft2(const CVec& v, int n);          // complex inverse (normalized)
CVec ifft2_re(const CVec& v, int n);       // inverse, imaginary part dropped
CVec diag_mul(const CVec& v, const CVec& sym);
CVec mul(const CVec& a, const CVec& b);
CVec add(const CVec& a, const CVec& b);
CVec sub(const CVec& a, const CVec& b);
CVec scale(const CVec& a, double c);
CVec axpy(const CVec& a, double c, const CVec& b);  // a + c*b
CVec add_const(const CVec& a, const CVec& c);
void zero_dc(CVec& v, size_t plane);
CVec leray(const CVec& u2, const Grid& g);  // 2-plane Helmholtz projection

// Spectral zero-padding n -> m (m >= n); Nyquist rows split in half so real
// fields stay real. Coefficients are rescaled by (m/n)^2 so physical values
// are preserved (trigonometric interpolation).
CVec pad2(const CVec& v, int n, int m);
// Spectral truncation m -> n; folds the fine +/-Nyquist pair into the coarse
// Nyquist bin so that trunc(pad(x)) == x. Rescales by (n/m)^2.
CVec trunc2(const CVec& v, int m, int n);

}  // namespace kern

// Wavenumber symbol arrays for a grid (i*kx, i*ky, 1/|k|^2 with zero DC,
// dealias mask as 0/1). Built once per grid and cached inside it.
struct GridSymbols {
  CVec ikx, iky, inv_ksq, mask, ksq;
  CVec dc_zero;  // ones with a zero at k=0 (mean removal in spectral form)
  // Helmholtz projector entries per mode: P = I - k k^T / |k|^2, identity at DC.
  CVec lp11, lp12, lp22;
};
const GridSymbols& symbols(const Grid& g);

// -- Public field operations ------------------------------------------------

// Forward transform of one real physical plane (size must be n^2).
SpectralField transform(const RVec& phys, const GridPtr& g);
// Two-component version for velocity fields (each plane n^2).
SpectralField transform_vector(const RVec& u1, const RVec& u2, const GridPtr& g);

// Inverse transform onto an n_out^2 grid (n_out >= n performs trigonometric
// interpolation). Vector fields return both planes back to back. Errors if
// conjugate symmetry is violated (imaginary residue above 1e-12 relative).
RVec inverse(const SpectralField& f, int n_out = 0);

SpectralField dealias(const SpectralField& f);
SpectralField inverse_laplacian(const SpectralField& omega);
SpectralField rot_grad(const SpectralField& psi);          // scalar -> vector
SpectralField curl2d(const SpectralField& u);              // vector -> scalar
SpectralField leray_project(const SpectralField& u);       // vector -> vector
SpectralField convection_vs(const SpectralField& omega);   // dealiased (rot psi . grad omega)
SpectralField convection_vp(const SpectralField& u);       // dealiased (u . grad) u

// c(z,u,v) = integral ((z.grad)u).v via pointwise products on a 2n-per-axis
// oversampled grid (exact for the cubic product of band-limited fields).
double trilinear_form(const SpectralField& z, const SpectralField& u,
                      const SpectralField& v);

// Spectral resampling between grids (mode truncation / zero-padding).
SpectralField resample(const SpectralField& f, const GridPtr& target);

// Mean of the physical field (DC coefficient / n^2), per component c.
cplx dc_coeff(const SpectralField& f, int c = 0);
void make_mean_free(SpectralField& f);

double max_speed(const SpectralField& u);  // max pointwise |u| of a vector field

}  // namespace specref
