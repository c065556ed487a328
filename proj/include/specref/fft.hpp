#pragma once

#include "specref/core.hpp"

namespace specref::fft {

// Complex-to-complex transforms backed by FFTW3 (plans cached, guarded by a
// mutex so concurrent callers are safe; execution itself runs lock-free).
// Convention: forward is an unnormalized DFT, inverse divides by the number
// of transformed points. All plans use FFTW_ESTIMATE so results are
// bit-reproducible run to run.

// 2D transform of each trailing n-by-n slice of `v` (batch = v.size()/n^2).
void fft2(const cplx* in, cplx* out, int n, int batch, bool forward);

// Transform along axis 0 of a row-major [len, ncol] block: all ncol columns.
void fft_cols(const cplx* in, cplx* out, int len, int ncol, bool forward);

// Unnormalized transforms (adjoint building blocks): plain DFT sums with
// exponent sign e^{-} (forward=true) or e^{+}, no 1/N anywhere.
void fft2_unnorm(const cplx* in, cplx* out, int n, int batch, bool forward);
void fft_cols_unnorm(const cplx* in, cplx* out, int len, int ncol, bool forward);

inline CVec fft2(const CVec& v, int n, int batch, bool forward) {
  CVec out(v.size());
  fft2(v.data(), out.data(), n, batch, forward);
  return out;
}

}  // namespace specref::fft
