#include "specref/norms.hpp"

#include <cmath>

#include "specref/ops.hpp"

namespace specref {

namespace {

double quad_weight(const Grid& g) {
  double n2 = double(g.n) * g.n;
  return (g.L * g.L) / (n2 * n2);
}

void require_mean_free(const SpectralField& f, const char* who) {
  double mag = 0.0;
  for (const auto& z : f.coeffs) mag = std::max(mag, std::abs(z));
  for (int c = 0; c < (f.is_vector ? 2 : 1); ++c) {
    double dc = std::abs(f.coeffs[c * f.plane()]);
    if (dc > 1e-12 * (mag + 1e-300) && dc > 1e-13)
      throw std::invalid_argument(std::string(who) +
                                  ": field must be mean-free");
  }
}

template <class W>
double weighted_sq(const SpectralField& f, bool skip_dc, W&& weight) {
  const Grid& g = *f.grid;
  double acc = 0.0;
  for (int c = 0; c < (f.is_vector ? 2 : 1); ++c) {
    const cplx* p = f.comp(c);
    for (size_t m = 0; m < g.size(); ++m) {
      if (skip_dc && m == 0) continue;
      acc += weight(g.k_sq[m]) * std::norm(p[m]);
    }
  }
  return acc * quad_weight(g);
}

}  // namespace

double sobolev_norm(const SpectralField& f, const NormSpec& spec) {
  if (spec.s < 0.0 && spec.alpha == 0.0) require_mean_free(f, "sobolev_norm");
  double s = spec.s;
  return std::sqrt(weighted_sq(f, spec.quotient, [s](double ksq) {
    return std::pow(1.0 + ksq, s);
  }));
}

double seminorm(const SpectralField& f, double s) {
  return std::sqrt(
      weighted_sq(f, true, [s](double ksq) { return std::pow(ksq, s); }));
}

double neg_norm(const SpectralField& f, double alpha) {
  if (alpha == 0.0) require_mean_free(f, "neg_norm");
  return std::sqrt(weighted_sq(
      f, true, [alpha](double ksq) { return 1.0 / (alpha + ksq); }));
}

DualNormPair dual_norm_check(const SpectralField& f) {
  require_mean_free(f, "dual_norm_check");
  SpectralField psi = inverse_laplacian(f);
  RVec fp = inverse(f);
  RVec pp = inverse(psi);
  const Grid& g = *f.grid;
  double w = g.dx * g.dx;
  double acc = 0.0;
  for (size_t i = 0; i < fp.size(); ++i) acc += fp[i] * pp[i];
  return {std::sqrt(std::max(0.0, acc * w)), seminorm(f, -1.0)};
}

double bochner_norm(const SpectralTrajectory& traj, double s, double p) {
  if (traj.snapshots.empty())
    throw std::invalid_argument("bochner_norm: empty trajectory");
  if (traj.times.size() != traj.snapshots.size())
    throw std::invalid_argument("bochner_norm: times/snapshots mismatch");
  NormSpec spec(s);
  if (std::isinf(p)) {
    double best = 0.0;
    for (const auto& f : traj.snapshots)
      best = std::max(best, sobolev_norm(f, spec));
    return best;
  }
  if (p != 2.0) throw std::invalid_argument("bochner_norm: p must be 2 or inf");
  double dt = traj.times.size() > 1 ? traj.times[1] - traj.times[0] : 1.0;
  for (size_t i = 1; i < traj.times.size(); ++i) {
    double d = traj.times[i] - traj.times[i - 1];
    if (std::abs(d - dt) > 1e-12 * std::max(1.0, std::abs(dt)))
      throw std::invalid_argument("bochner_norm: non-uniform spacing");
  }
  double acc = 0.0;
  for (const auto& f : traj.snapshots) {
    double v = sobolev_norm(f, spec);
    acc += v * v;
  }
  return std::sqrt(dt * acc);
}

namespace {

SpectrumCurve shell_sums(const SpectralField& f, double comp_scale) {
  const Grid& g = *f.grid;
  int rmax = static_cast<int>(std::floor(std::hypot(g.n / 2.0, g.n / 2.0) + 0.5));
  SpectrumCurve c;
  c.k_bins.resize(rmax + 1);
  c.values.assign(rmax + 1, 0.0);
  for (int r = 0; r <= rmax; ++r) c.k_bins[r] = r;
  double w = quad_weight(g) * comp_scale;
  for (int comp = 0; comp < (f.is_vector ? 2 : 1); ++comp) {
    const cplx* p = f.comp(comp);
    for (int i = 0; i < g.n; ++i) {
      double si = signed_freq(i, g.n);
      for (int j = 0; j < g.n; ++j) {
        double sj = signed_freq(j, g.n);
        int r = static_cast<int>(std::floor(std::hypot(si, sj) + 0.5));
        c.values[r] += w * std::norm(p[size_t(i) * g.n + j]);
      }
    }
  }
  return c;
}

}  // namespace

SpectrumCurve enstrophy_spectrum(const SpectralField& omega) {
  if (omega.is_vector)
    throw std::invalid_argument("enstrophy_spectrum: expected scalar vorticity");
  return shell_sums(omega, 1.0);
}

SpectrumCurve energy_spectrum(const SpectralField& u) {
  if (!u.is_vector)
    throw std::invalid_argument("energy_spectrum: expected vector velocity");
  return shell_sums(u, 0.5);
}

double fit_slope(const SpectrumCurve& curve, double k_lo, double k_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (size_t i = 0; i < curve.k_bins.size(); ++i) {
    double k = curve.k_bins[i], v = curve.values[i];
    if (k < k_lo || k > k_hi || k <= 0.0 || v <= 0.0) continue;
    double x = std::log(k), y = std::log(v);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("fit_slope: empty band");
  double denom = count * sxx - sx * sx;
  return (count * sxy - sx * sy) / denom;
}

double rel_l2(const SpectralField& a, const SpectralField& b) {
  if (a.grid->n != b.grid->n || a.is_vector != b.is_vector)
    throw std::invalid_argument("rel_l2: mismatched fields");
  double nb = sobolev_norm(b, NormSpec(0.0));
  if (nb == 0.0) throw std::invalid_argument("rel_l2: reference has zero norm");
  SpectralField d = b;
  for (size_t i = 0; i < d.coeffs.size(); ++i)
    d.coeffs[i] = a.coeffs[i] - b.coeffs[i];
  return sobolev_norm(d, NormSpec(0.0)) / nb;
}

}  // namespace specref
