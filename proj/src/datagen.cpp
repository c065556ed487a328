#include "specref/datagen.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "specref/norms.hpp"
#include "specref/ops.hpp"
#include "specref/rng.hpp"

namespace specref {

TaylorGreen taylor_green(int kappa, double nu, double t, const GridPtr& g) {
  if (kappa < 1) throw std::invalid_argument("taylor_green: kappa must be >= 1");
  if (2 * kappa > g->n / 2)
    throw std::invalid_argument("taylor_green: kappa beyond Nyquist");
  double kw = kTwoPi * kappa / g->L;  // wave vector magnitude per axis
  double amp = std::exp(-2.0 * kw * kw * nu * t);
  int n = g->n;
  RVec u1(g->size()), u2(g->size()), w(g->size());
  for (int i = 0; i < n; ++i) {
    double x = i * g->dx;
    for (int j = 0; j < n; ++j) {
      double y = j * g->dx;
      size_t m = g->idx(i, j);
      u1[m] = amp * std::sin(kw * x) * std::cos(kw * y);
      u2[m] = -amp * std::cos(kw * x) * std::sin(kw * y);
      w[m] = 2.0 * kw * amp * std::sin(kw * x) * std::sin(kw * y);
    }
  }
  TaylorGreen out{transform_vector(u1, u2, g), transform(w, g)};
  return out;
}

namespace {

// Fills a conjugate-symmetric spectrum: modulus(m) gives the coefficient
// magnitude for mode index m (in math-coefficient normalization); draws are
// addressed per mode so iteration order is irrelevant.
SpectralField hermitian_random_field(
    const GridPtr& g, uint64_t seed, uint64_t stream,
    const std::function<double(double)>& coeff_std, bool random_modulus) {
  const Grid& gr = *g;
  int n = gr.n;
  SpectralField f(g, false);
  Philox gen(seed, stream);
  double n2 = double(n) * n;
  for (int i = 0; i < n; ++i) {
    int si = signed_freq(i, n);
    for (int j = 0; j < n; ++j) {
      int sj = signed_freq(j, n);
      if (si == 0 && sj == 0) continue;  // mean-free
      int ci = (n - i) % n, cj = (n - j) % n;
      bool self_conj = (ci == i && cj == j);
      // Canonical member of each conjugate pair fills both slots.
      if (!self_conj && (ci < i || (ci == i && cj < j))) continue;
      uint64_t draw = uint64_t(i) * n + j;
      double sigma = coeff_std(std::hypot(double(si), double(sj)));
      cplx c;
      if (random_modulus) {
        auto [g1, g2] = gen.gaussian_pair_at(draw);
        c = self_conj ? cplx{sigma * g1, 0.0}
                      : cplx{sigma * g1, sigma * g2} / std::sqrt(2.0);
      } else {
        double phase = kTwoPi * gen.uniform_at(draw);
        c = self_conj ? cplx{sigma * ((gen.uniform_at(draw + 1) < 0.5) ? -1.0 : 1.0), 0.0}
                      : sigma * cplx{std::cos(phase), std::sin(phase)};
      }
      f.coeffs[gr.idx(i, j)] = c * n2;  // store unnormalized-DFT coefficients
      if (!self_conj) f.coeffs[gr.idx(ci, cj)] = std::conj(c) * n2;
    }
  }
  return f;
}

double kinetic_energy(const SpectralField& omega) {
  SpectralField u = rot_grad(inverse_laplacian(omega));
  double e = sobolev_norm(u, NormSpec(0.0));
  return 0.5 * e * e;
}

}  // namespace

SpectralField grf_sample(const GridPtr& g, double alpha, double tau,
                         uint64_t seed) {
  if (!(alpha > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("grf_sample: alpha and tau must be positive");
  double scale = kTwoPi / g->L;
  return hermitian_random_field(
      g, seed, /*stream=*/1,
      [alpha, tau, scale](double r) {
        double ks = scale * r;
        return std::pow(ks * ks + tau * tau, -alpha / 2.0);
      },
      /*random_modulus=*/true);
}

SpectralField mcwilliams_sample(const GridPtr& g, int k0, double tau,
                                uint64_t seed, double normalize_energy) {
  if (k0 < 1) throw std::invalid_argument("mcwilliams_sample: k0 must be >= 1");
  double k04 = double(k0) * k0 * k0 * k0;
  SpectralField psi = hermitian_random_field(
      g, seed, /*stream=*/2,
      [tau, k04](double r) {
        // |psi_hat|^2 = r^{-1} (tau^2 + (r/k0)^4)^{-1}, integer-index radius
        double p = 1.0 / (r * (tau * tau + r * r * r * r / k04));
        return std::sqrt(p);
      },
      /*random_modulus=*/false);
  SpectralField omega = psi;
  omega.coeffs = kern::diag_mul(psi.coeffs, symbols(*g).ksq);  // omega = -Lap psi
  if (normalize_energy > 0.0) {
    double e = kinetic_energy(omega);
    double s = std::sqrt(normalize_energy / e);
    for (auto& z : omega.coeffs) z *= s;
  }
  return omega;
}

SpectralField sample_ic(const IcSpec& ic, const GridPtr& g) {
  ic.validate();
  switch (ic.kind) {
    case IcKind::taylor_green:
      return taylor_green(ic.kappa, 1e-3, 0.0, g).omega;
    case IcKind::grf: {
      SpectralField f = grf_sample(g, ic.alpha, ic.tau_grf, ic.seed);
      if (ic.normalize_energy > 0.0) {
        double e = kinetic_energy(f);
        double s = std::sqrt(ic.normalize_energy / e);
        for (auto& z : f.coeffs) z *= s;
      }
      return f;
    }
    case IcKind::mcwilliams:
      return mcwilliams_sample(g, ic.k0, ic.tau_mc, ic.seed, ic.normalize_energy);
  }
  throw std::logic_error("sample_ic: unknown kind");
}

int worker_count() {
  if (const char* env = std::getenv("SPECTRAL_REFINE_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

RVec to_phys_plane(const SpectralField& f) { return inverse(f); }

TrajectorySample run_trajectory(const DatasetSpec& spec, const SolverConfig& cfg,
                                const SpectralField& ic, uint64_t seed) {
  GridPtr fine = ic.grid;
  GridPtr coarse = spec.n_down == fine->n ? fine : make_grid(spec.n_down, spec.L);
  SolverState st{0.0, dealias(ic)};
  make_mean_free(st.field);
  SolverConfig c = cfg;
  int rec = spec.record_every();

  // Burn-in, then record ell inputs followed by n_t outputs, all delta_t apart.
  long burn_steps = std::lround(spec.burn_in / c.dt);
  StepSymbols sym = make_step_symbols(fine, c.scheme, c.form, c.dt, c.nu, c.drag,
                                      c.forcing ? &*c.forcing : nullptr);
  RawCtx cx(*fine);
  const GridSymbols& gs = symbols(*fine);
  auto advance_steps = [&](long k) {
    for (long s = 0; s < k; ++s) {
      double before = 0.0;
      for (const auto& z : st.field.coeffs) before += std::norm(z);
      st.field.coeffs = imex_step_t(cx, gs, sym, st.field.coeffs);
      st.t += c.dt;
      double after = 0.0;
      for (const auto& z : st.field.coeffs) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
          throw BlowUpError("trajectory blow-up (seed " + std::to_string(seed) +
                                ") at t=" + std::to_string(st.t), st.t);
        after += std::norm(z);
      }
      if (after > 1e12 * (before + 1e-300))
        throw BlowUpError("trajectory blow-up (seed " + std::to_string(seed) +
                              ") at t=" + std::to_string(st.t), st.t);
    }
  };

  advance_steps(burn_steps);
  TrajectorySample out;
  out.seed = seed;
  size_t plane = coarse->size();
  out.input.reserve(size_t(spec.ell) * plane);
  out.output.reserve(size_t(spec.n_t) * plane);
  for (int k = 0; k < spec.ell + spec.n_t; ++k) {
    if (k > 0) advance_steps(rec);
    SpectralField snap = st.field;
    if (coarse != fine) snap = resample(snap, coarse);
    RVec plane_data = to_phys_plane(snap);
    double t = spec.burn_in + k * spec.delta_t;
    if (k < spec.ell) {
      out.input.insert(out.input.end(), plane_data.begin(), plane_data.end());
      out.times_in.push_back(t);
    } else {
      out.output.insert(out.output.end(), plane_data.begin(), plane_data.end());
      out.times_out.push_back(t);
    }
  }
  return out;
}

Dataset run_many(const DatasetSpec& spec, const SolverConfig& cfg,
                 const std::function<SpectralField(int)>& ic_for,
                 const std::function<uint64_t(int)>& seed_for, int count) {
  spec.validate();
  cfg.validate();
  Dataset ds;
  ds.n = spec.n_down;
  ds.ell = spec.ell;
  ds.n_t = spec.n_t;
  ds.L = spec.L;
  ds.delta_t = spec.delta_t;
  ds.nu = cfg.nu;
  ds.samples.resize(count);
  int workers = std::min(worker_count(), count);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(count);
  auto work = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        ds.samples[i] = run_trajectory(spec, cfg, ic_for(i), seed_for(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return ds;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec, const IcSpec& ic,
                         const SolverConfig& cfg) {
  ic.validate();
  GridPtr fine = make_grid(spec.n_gen, spec.L);
  int count = spec.n_train + spec.n_test;
  return run_many(
      spec, cfg,
      [&](int i) {
        IcSpec one = ic;
        one.seed = mix_seed(ic.seed, uint64_t(i));
        return sample_ic(one, fine);
      },
      [&](int i) { return mix_seed(ic.seed, uint64_t(i)); }, count);
}

Dataset generate_taylor_green_dataset(const DatasetSpec& spec,
                                      const std::vector<int>& kappa_list,
                                      const SolverConfig& cfg) {
  GridPtr fine = make_grid(spec.n_gen, spec.L);
  return run_many(
      spec, cfg,
      [&](int i) { return taylor_green(kappa_list[i], cfg.nu, 0.0, fine).omega; },
      [&](int i) { return uint64_t(kappa_list[i]); },
      static_cast<int>(kappa_list.size()));
}

}  // namespace specref
