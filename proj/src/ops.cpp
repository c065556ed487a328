#include "specref/ops.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "specref/imex.hpp"

namespace specref {

namespace kern {

CVec fft2(const CVec& v, int n) {
  return fft::fft2(v, n, static_cast<int>(v.size() / (size_t(n) * n)), true);
}

CVec ifft2(const CVec& v, int n) {
  return fft::fft2(v, n, static_cast<int>(v.size() / (size_t(n) * n)), false);
}

CVec ifft2_re(const CVec& v, int n) {
  CVec out = ifft2(v, n);
  for (auto& z : out) z = cplx{z.real(), 0.0};
  return out;
}

CVec diag_mul(const CVec& v, const CVec& sym) {
  CVec out(v.size());
  size_t plane = sym.size();
  for (size_t p = 0; p < v.size() / plane; ++p)
    for (size_t i = 0; i < plane; ++i)
      out[p * plane + i] = v[p * plane + i] * sym[i];
  return out;
}

CVec mul(const CVec& a, const CVec& b) {
  CVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

CVec add(const CVec& a, const CVec& b) {
  CVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

CVec sub(const CVec& a, const CVec& b) {
  CVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

CVec scale(const CVec& a, double c) {
  CVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  return out;
}

CVec axpy(const CVec& a, double c, const CVec& b) {
  CVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + c * b[i];
  return out;
}

CVec add_const(const CVec& a, const CVec& c) {
  CVec out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + c[i];
  return out;
}

void zero_dc(CVec& v, size_t plane) {
  for (size_t p = 0; p < v.size() / plane; ++p) v[p * plane] = cplx{0.0, 0.0};
}

// Wavenumber entering first derivatives: zero on the unpaired Nyquist line
// (keeps real fields real; the projector below uses the same convention so
// its output is divergence-free under the discrete divergence).
inline double deriv_k(const Grid& g, int idx) {
  return std::abs(signed_freq(idx, g.n)) == g.n / 2 ? 0.0 : g.kx[idx];
}

CVec leray(const CVec& u2, const Grid& g) {
  size_t plane = g.size();
  CVec out(u2.size());
  for (int i = 0; i < g.n; ++i) {
    double kx = deriv_k(g, i);
    for (int j = 0; j < g.n; ++j) {
      size_t m = g.idx(i, j);
      double ky = deriv_k(g, j);
      double ks = kx * kx + ky * ky;
      cplx a = u2[m], b = u2[plane + m];
      if (ks == 0.0) {
        out[m] = a;
        out[plane + m] = b;
      } else {
        cplx kd = (kx * a + ky * b) / ks;
        out[m] = a - kx * kd;
        out[plane + m] = b - ky * kd;
      }
    }
  }
  return out;
}

CVec pad2(const CVec& v, int n, int m) {
  if (m < n) throw std::invalid_argument("pad2: m must be >= n");
  size_t planes = v.size() / (size_t(n) * n);
  CVec out(planes * size_t(m) * m, cplx{0.0, 0.0});
  double s = double(m) * m / (double(n) * n);
  int ny = n / 2;  // coarse Nyquist magnitude
  for (size_t p = 0; p < planes; ++p) {
    const cplx* in = v.data() + p * size_t(n) * n;
    cplx* o = out.data() + p * size_t(m) * m;
    for (int i = 0; i < n; ++i) {
      int si = signed_freq(i, n);
      double wi = (std::abs(si) == ny && m > n) ? 0.5 : 1.0;
      for (int j = 0; j < n; ++j) {
        int sj = signed_freq(j, n);
        double wj = (std::abs(sj) == ny && m > n) ? 0.5 : 1.0;
        cplx val = in[size_t(i) * n + j] * (s * wi * wj);
        // Nyquist content is split between +ny and -ny on the fine grid.
        for (int a = 0; a < ((std::abs(si) == ny && m > n) ? 2 : 1); ++a) {
          int fi = freq_bin(a == 0 ? si : -si, m);
          for (int b = 0; b < ((std::abs(sj) == ny && m > n) ? 2 : 1); ++b) {
            int fj = freq_bin(b == 0 ? sj : -sj, m);
            o[size_t(fi) * m + fj] += val;
          }
        }
      }
    }
  }
  return out;
}

CVec trunc2(const CVec& v, int m, int n) {
  if (n > m) throw std::invalid_argument("trunc2: n must be <= m");
  size_t planes = v.size() / (size_t(m) * m);
  CVec out(planes * size_t(n) * n, cplx{0.0, 0.0});
  double s = double(n) * n / (double(m) * m);
  int ny = n / 2;
  for (size_t p = 0; p < planes; ++p) {
    const cplx* in = v.data() + p * size_t(m) * m;
    cplx* o = out.data() + p * size_t(n) * n;
    for (int i = 0; i < n; ++i) {
      int si = signed_freq(i, n);
      for (int j = 0; j < n; ++j) {
        int sj = signed_freq(j, n);
        cplx acc{0.0, 0.0};
        for (int a = 0; a < ((si == -ny && m > n) ? 2 : 1); ++a) {
          int fi = freq_bin(a == 0 ? si : ny, m);
          for (int b = 0; b < ((sj == -ny && m > n) ? 2 : 1); ++b) {
            int fj = freq_bin(b == 0 ? sj : ny, m);
            acc += in[size_t(fi) * m + fj];
          }
        }
        o[size_t(i) * n + j] = acc * s;
      }
    }
  }
  return out;
}

}  // namespace kern

const GridSymbols& symbols(const Grid& g) {
  static std::mutex mu;
  static std::map<const Grid*, GridSymbols> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(&g);
  if (it != cache.end()) return it->second;
  GridSymbols s;
  size_t plane = g.size();
  s.ikx.resize(plane);
  s.iky.resize(plane);
  s.inv_ksq.resize(plane);
  s.mask.resize(plane);
  s.ksq.resize(plane);
  s.dc_zero.assign(plane, cplx{1.0, 0.0});
  s.dc_zero[0] = cplx{0.0, 0.0};
  s.lp11.resize(plane);
  s.lp12.resize(plane);
  s.lp22.resize(plane);
  // Odd derivative symbols vanish on the unpaired Nyquist line; otherwise
  // differentiating a real field would break its conjugate symmetry. The
  // Helmholtz projector uses the same wavenumbers for consistency.
  for (int i = 0; i < g.n; ++i) {
    double kx = kern::deriv_k(g, i);
    for (int j = 0; j < g.n; ++j) {
      size_t m = g.idx(i, j);
      double ky = kern::deriv_k(g, j);
      s.ikx[m] = cplx{0.0, kx};
      s.iky[m] = cplx{0.0, ky};
      s.inv_ksq[m] = g.k_sq[m] > 0.0 ? cplx{1.0 / g.k_sq[m], 0.0} : cplx{0.0, 0.0};
      s.mask[m] = cplx{g.dealias_mask[m] ? 1.0 : 0.0, 0.0};
      s.ksq[m] = cplx{g.k_sq[m], 0.0};
      double ks = kx * kx + ky * ky;
      if (ks > 0.0) {
        s.lp11[m] = cplx{1.0 - kx * kx / ks, 0.0};
        s.lp12[m] = cplx{-kx * ky / ks, 0.0};
        s.lp22[m] = cplx{1.0 - ky * ky / ks, 0.0};
      } else {
        s.lp11[m] = cplx{1.0, 0.0};
        s.lp12[m] = cplx{0.0, 0.0};
        s.lp22[m] = cplx{1.0, 0.0};
      }
    }
  }
  return cache.emplace(&g, std::move(s)).first->second;
}

namespace {

void check_same_grid(const SpectralField& a, const SpectralField& b,
                     const char* who) {
  if (a.grid->n != b.grid->n || a.grid->L != b.grid->L)
    throw std::invalid_argument(std::string(who) + ": fields on mismatched grids");
}

double linf(const CVec& v) {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

SpectralField transform(const RVec& phys, const GridPtr& g) {
  if (phys.size() != g->size())
    throw std::invalid_argument("transform: input is not a square n-by-n field");
  CVec tmp(phys.size());
  for (size_t i = 0; i < phys.size(); ++i) tmp[i] = cplx{phys[i], 0.0};
  SpectralField f(g, false);
  f.coeffs = kern::fft2(tmp, g->n);
  return f;
}

SpectralField transform_vector(const RVec& u1, const RVec& u2, const GridPtr& g) {
  if (u1.size() != g->size() || u2.size() != g->size())
    throw std::invalid_argument("transform_vector: input is not square");
  CVec tmp(2 * g->size());
  for (size_t i = 0; i < g->size(); ++i) {
    tmp[i] = cplx{u1[i], 0.0};
    tmp[g->size() + i] = cplx{u2[i], 0.0};
  }
  SpectralField f(g, true);
  f.coeffs = kern::fft2(tmp, g->n);
  return f;
}

RVec inverse(const SpectralField& f, int n_out) {
  int n = f.n();
  if (n_out == 0) n_out = n;
  if (n_out < n)
    throw std::invalid_argument("inverse: n_out must be >= grid n");
  CVec c = (n_out == n) ? f.coeffs : kern::pad2(f.coeffs, n, n_out);
  CVec phys = kern::ifft2(c, n_out);
  double mag = linf(phys);
  RVec out(phys.size());
  double worst_im = 0.0;
  for (size_t i = 0; i < phys.size(); ++i) {
    out[i] = phys[i].real();
    worst_im = std::max(worst_im, std::abs(phys[i].imag()));
  }
  if (worst_im > 1e-12 * (mag + 1e-300) && worst_im > 1e-14)
    throw std::runtime_error("inverse: conjugate symmetry violated (imag residue " +
                             std::to_string(worst_im) + ")");
  return out;
}

SpectralField dealias(const SpectralField& f) {
  SpectralField out = f;
  out.coeffs = kern::diag_mul(f.coeffs, symbols(*f.grid).mask);
  return out;
}

SpectralField inverse_laplacian(const SpectralField& omega) {
  if (omega.is_vector)
    throw std::invalid_argument("inverse_laplacian: expected scalar field");
  double c0 = std::abs(omega.coeffs[0]);
  if (c0 > 1e-12 * (linf(omega.coeffs) + 1e-300) && c0 > 1e-13)
    throw std::invalid_argument("inverse_laplacian: input not mean-free");
  SpectralField out = omega;
  out.coeffs = kern::diag_mul(omega.coeffs, symbols(*omega.grid).inv_ksq);
  return out;
}

SpectralField rot_grad(const SpectralField& psi) {
  if (psi.is_vector)
    throw std::invalid_argument("rot_grad: expected scalar field");
  const auto& s = symbols(*psi.grid);
  SpectralField u(psi.grid, true);
  CVec u1 = kern::diag_mul(psi.coeffs, s.iky);
  CVec u2 = kern::scale(kern::diag_mul(psi.coeffs, s.ikx), -1.0);
  std::copy(u1.begin(), u1.end(), u.coeffs.begin());
  std::copy(u2.begin(), u2.end(), u.coeffs.begin() + u.plane());
  return u;
}

SpectralField curl2d(const SpectralField& u) {
  if (!u.is_vector) throw std::invalid_argument("curl2d: expected vector field");
  const auto& s = symbols(*u.grid);
  SpectralField w(u.grid, false);
  size_t plane = u.plane();
  CVec u1(u.coeffs.begin(), u.coeffs.begin() + plane);
  CVec u2(u.coeffs.begin() + plane, u.coeffs.end());
  w.coeffs = kern::sub(kern::diag_mul(u2, s.ikx), kern::diag_mul(u1, s.iky));
  return w;
}

SpectralField leray_project(const SpectralField& u) {
  if (!u.is_vector)
    throw std::invalid_argument("leray_project: expected vector field");
  SpectralField out = u;
  out.coeffs = kern::leray(u.coeffs, *u.grid);
  return out;
}

cplx dc_coeff(const SpectralField& f, int c) {
  return f.coeffs[c * f.plane()] / double(f.plane());
}

void make_mean_free(SpectralField& f) { kern::zero_dc(f.coeffs, f.plane()); }

SpectralField resample(const SpectralField& f, const GridPtr& target) {
  SpectralField out(target, f.is_vector);
  if (target->n >= f.n())
    out.coeffs = kern::pad2(f.coeffs, f.n(), target->n);
  else
    out.coeffs = kern::trunc2(f.coeffs, f.n(), target->n);
  return out;
}

SpectralField convection_vs(const SpectralField& omega) {
  if (omega.is_vector)
    throw std::invalid_argument("convection_vs: expected scalar vorticity");
  RawCtx cx(*omega.grid);
  SpectralField out = omega;
  out.coeffs = convection_vs_t(cx, symbols(*omega.grid), omega.coeffs);
  return out;
}

SpectralField convection_vp(const SpectralField& u) {
  if (!u.is_vector)
    throw std::invalid_argument("convection_vp: expected vector field");
  RawCtx cx(*u.grid);
  SpectralField out = u;
  out.coeffs = convection_vp_t(cx, symbols(*u.grid), u.coeffs);
  return out;
}

double trilinear_form(const SpectralField& z, const SpectralField& u,
                      const SpectralField& v) {
  check_same_grid(z, u, "trilinear_form");
  check_same_grid(z, v, "trilinear_form");
  if (!z.is_vector || !u.is_vector || !v.is_vector)
    throw std::invalid_argument("trilinear_form: expected vector fields");
  int n = z.n(), m = 2 * n;  // exact quadrature for the cubic product
  const auto& s = symbols(*z.grid);
  size_t plane = z.plane(), fine = size_t(m) * m;
  auto up = [&](const CVec& c) { return kern::ifft2(kern::pad2(c, n, m), m); };
  CVec z1 = up(CVec(z.coeffs.begin(), z.coeffs.begin() + plane));
  CVec z2 = up(CVec(z.coeffs.begin() + plane, z.coeffs.end()));
  // Compensated summation: the skew-symmetry property cancels to the
  // accumulation noise floor, so plain sequential sums are not enough.
  double acc = 0.0, comp = 0.0;
  auto kahan_add = [&](double term) {
    double y = term - comp;
    double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
  };
  for (int c = 0; c < 2; ++c) {
    CVec uc(u.coeffs.begin() + c * plane, u.coeffs.begin() + (c + 1) * plane);
    CVec gx = up(kern::diag_mul(uc, s.ikx));
    CVec gy = up(kern::diag_mul(uc, s.iky));
    CVec vc = up(CVec(v.coeffs.begin() + c * plane, v.coeffs.begin() + (c + 1) * plane));
    for (size_t i = 0; i < fine; ++i)
      kahan_add((z1[i].real() * gx[i].real() + z2[i].real() * gy[i].real()) *
                vc[i].real());
  }
  double w = (z.grid->L / m) * (z.grid->L / m);
  return acc * w;
}

double max_speed(const SpectralField& u) {
  if (!u.is_vector) throw std::invalid_argument("max_speed: expected vector field");
  int n = u.n();
  CVec phys = kern::ifft2(u.coeffs, n);
  size_t plane = u.plane();
  double best = 0.0;
  for (size_t i = 0; i < plane; ++i) {
    double a = phys[i].real(), b = phys[plane + i].real();
    best = std::max(best, std::sqrt(a * a + b * b));
  }
  return best;
}

}  // namespace specref
