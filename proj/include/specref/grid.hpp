#pragma once

#include <memory>

#include "specref/core.hpp"

namespace specref {

// Uniform periodic grid on the torus (0,L)^2 with n points per axis.
// Wavenumbers are the signed integer FFT indices scaled by 2*pi/L; the same
// scaled wavenumbers enter every norm and differential operator.
struct Grid {
  int n = 0;
  double L = 1.0;
  double dx = 0.0;
  RVec kx, ky;             // signed wavenumber per FFT bin, length n each
  RVec k_sq;               // |k|^2 per mode, row-major [n*n], k_sq[0] == 0
  std::vector<uint8_t> dealias_mask;  // 2/3 rule: keeps |j_x| < n/3 and |j_y| < n/3

  size_t size() const { return static_cast<size_t>(n) * n; }
  size_t idx(int i, int j) const { return static_cast<size_t>(i) * n + j; }
};

using GridPtr = std::shared_ptr<const Grid>;

// Builds a grid; n must be even and >= 8, L positive.
GridPtr make_grid(int n, double L = 1.0);

// One snapshot in spectral form: full-spectrum complex coefficients of the
// unnormalized forward DFT (physical values are recovered by inverse/n^2).
// Vector fields store two coefficient planes back to back.
struct SpectralField {
  GridPtr grid;
  bool is_vector = false;
  CVec coeffs;  // size n^2 (scalar) or 2*n^2 (vector)

  SpectralField() = default;
  SpectralField(GridPtr g, bool vec)
      : grid(std::move(g)), is_vector(vec),
        coeffs((vec ? 2 : 1) * grid->size(), cplx{0.0, 0.0}) {}

  int n() const { return grid->n; }
  size_t plane() const { return grid->size(); }
  const cplx* comp(int c) const { return coeffs.data() + c * plane(); }
  cplx* comp(int c) { return coeffs.data() + c * plane(); }
};

// A time-stamped sequence of snapshots.
struct SpectralTrajectory {
  RVec times;
  std::vector<SpectralField> snapshots;

  size_t size() const { return snapshots.size(); }
};

}  // namespace specref
