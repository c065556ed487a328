#include "specref/stfno.hpp"

#include <cmath>

#include "specref/ops.hpp"
#include "specref/rng.hpp"

namespace specref {

namespace {

ad::CTensor gaussian_tensor(std::vector<int> shape, double std_dev,
                            uint64_t seed, uint64_t stream, bool complex_init) {
  ad::CTensor t(std::move(shape));
  Philox gen(seed, stream);
  for (size_t i = 0; i < t.size(); ++i) {
    auto [g1, g2] = gen.gaussian_pair_at(i);
    t.v[i] = complex_init ? cplx{std_dev * g1, std_dev * g2}
                          : cplx{std_dev * g1, 0.0};
  }
  return t;
}

ad::CTensor const_tensor(std::vector<int> shape, double value) {
  ad::CTensor t(std::move(shape));
  for (auto& z : t.v) z = cplx{value, 0.0};
  return t;
}

}  // namespace

StfnoModel make_model(const StfnoConfig& cfg) {
  cfg.validate();
  StfnoModel m;
  m.cfg = cfg;
  int dv = cfg.d_v, km = cfg.k_max, tm = cfg.tau_max;
  int ch = cfg.channels_out();
  int lp = cfg.d_t + cfg.latent_pad();
  uint64_t stream = 0;
  auto put = [&](const std::string& name, ad::CTensor t) {
    m.order.push_back(name);
    m.params.emplace(name, std::move(t));
    m.trainable.insert(name);
  };
  put("lift.w", gaussian_tensor({2, dv}, 1.0, cfg.seed, stream++, false));
  for (int c = 0; c < dv; ++c) m.at("lift.w").v[size_t(dv) + c] = cplx{0.0, 0.0};
  put("lift.depthwise",
      gaussian_tensor({dv, 2 * km, 2 * km}, 0.1, cfg.seed, stream++, true));
  put("lift.pos", gaussian_tensor({4, dv}, 0.1, cfg.seed, stream++, false));
  for (int c = 0; c < dv; ++c) m.at("lift.pos").v[size_t(3) * dv + c] = cplx{0.0, 0.0};
  put("lift.ln_gain", const_tensor({dv}, 1.0));
  put("lift.ln_bias", const_tensor({dv}, 0.0));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    double r_std = 1.0 / (double(dv) * dv);
    put(p + "R", gaussian_tensor({4, tm, km, km, dv, dv}, r_std, cfg.seed,
                                 stream++, true));
    ad::CTensor w = gaussian_tensor({dv + 1, dv}, 1.0 / std::sqrt(double(dv)),
                                    cfg.seed, stream++, false);
    for (int c = 0; c < dv; ++c) w.v[size_t(dv) * dv + c] = cplx{0.0, 0.0};
    put(p + "W", std::move(w));
  }
  ad::CTensor red = gaussian_tensor({dv + 1, ch}, 1.0 / std::sqrt(double(dv)),
                                    cfg.seed, stream++, false);
  for (int c = 0; c < ch; ++c) red.v[size_t(dv) * ch + c] = cplx{0.0, 0.0};
  put("proj.reduce", std::move(red));
  // The final full-spectrum layer starts at zero so a fresh model reproduces
  // the skip snapshot exactly.
  put("proj.Ks_S", ad::CTensor({ch, lp, cfg.n_train, cfg.n_train}));
  put("proj.Ks_w0", ad::CTensor({1}));
  put("proj.Ks_b0", ad::CTensor({1}));
  return m;
}

size_t param_count(const StfnoModel& m) {
  size_t n = 0;
  for (const auto& name : m.order) n += m.params.at(name).size();
  return n;
}

void freeze_backbone(StfnoModel& m, bool include_reduction) {
  m.trainable.clear();
  m.trainable.insert("proj.Ks_S");
  m.trainable.insert("proj.Ks_w0");
  m.trainable.insert("proj.Ks_b0");
  if (include_reduction) m.trainable.insert("proj.reduce");
}

void unfreeze_all(StfnoModel& m) {
  m.trainable.clear();
  for (const auto& name : m.order) m.trainable.insert(name);
}

BoundModel bind(ad::Tape& tape, const StfnoModel& m, bool respect_freeze) {
  BoundModel b;
  b.tape = &tape;
  b.model = &m;
  for (const auto& name : m.order) {
    const auto& t = m.params.at(name);
    bool train = !respect_freeze || m.trainable.count(name) > 0;
    b.ids[name] = train ? tape.leaf(t) : tape.constant(t);
  }
  return b;
}

BoundModel bind_with(ad::Tape& tape, const StfnoModel& m,
                     const std::map<std::string, int>& provided) {
  BoundModel b;
  b.tape = &tape;
  b.model = &m;
  for (const auto& name : m.order) {
    auto it = provided.find(name);
    b.ids[name] = it != provided.end() ? it->second
                                       : tape.constant(m.params.at(name));
  }
  return b;
}

namespace {

// Inverse-DFT evaluation matrix: coefficients of an L-point transform
// evaluated at circle coordinates x (fractions of the padded window).
// deriv_scale != 0 differentiates the basis, scaling each row by
// i * 2 pi * freq * deriv_scale.
std::shared_ptr<const CVec> eval_matrix(const std::vector<double>& x, int L,
                                        double deriv_scale = 0.0) {
  auto E = std::make_shared<CVec>(x.size() * size_t(L));
  for (size_t r = 0; r < x.size(); ++r) {
    for (int b = 0; b < L; ++b) {
      double f = signed_freq(b, L);
      double phase = kTwoPi * f * x[r];
      cplx e = cplx{std::cos(phase), std::sin(phase)} / double(L);
      if (deriv_scale != 0.0) e *= cplx{0.0, kTwoPi * f * deriv_scale};
      (*E)[r * L + b] = e;
    }
  }
  return E;
}

// Positional encodings (t, x, y) normalized to [0,1]. The spatial channels
// are passed through the first periodic harmonic, (1 - cos(2 pi x))/2, so
// the encoding is band-limited and identical across grid resolutions (a raw
// ramp would alias differently at different n and spoil zero-shot
// super-resolution).
ad::CTensor positional_encoding(int d_t, int n) {
  ad::CTensor p({3, d_t, n, n});
  size_t plane = size_t(n) * n;
  for (int t = 0; t < d_t; ++t) {
    double tv = double(t + 1) / d_t;
    for (int i = 0; i < n; ++i) {
      double xv = 0.5 * (1.0 - std::cos(kTwoPi * i / n));
      for (int j = 0; j < n; ++j) {
        double yv = 0.5 * (1.0 - std::cos(kTwoPi * j / n));
        size_t at = size_t(t) * plane + size_t(i) * n + j;
        p.v[at] = cplx{tv, 0.0};
        p.v[d_t * plane + at] = cplx{xv, 0.0};
        p.v[2 * d_t * plane + at] = cplx{yv, 0.0};
      }
    }
  }
  return p;
}

int apply_activation(BoundModel& b, int h) {
  return b.model->cfg.act == Activation::gelu ? b.tape->gelu(h) : h;
}

}  // namespace

std::vector<double> output_window_times(int n_t_out) {
  std::vector<double> t(n_t_out);
  for (int m = 0; m < n_t_out; ++m) t[m] = double(m + 1) / double(n_t_out);
  return t;
}

int latent_on_tape(BoundModel& b, const ad::CTensor& input, const GridPtr& g) {
  const StfnoConfig& cfg = b.model->cfg;
  ad::Tape& t = *b.tape;
  if (input.shape.size() != 4 || input.shape[0] != 1)
    throw std::invalid_argument("latent_on_tape: input must be [1, ell, n, n]");
  int ell = input.shape[1];
  if (ell < 2) throw std::invalid_argument("lift: need at least 2 snapshots");
  int n = g->n;
  if (2 * cfg.k_max > n)
    throw std::invalid_argument("lift: grid does not resolve k_max");
  const GridSymbols& gs = symbols(*g);

  int a = t.constant(input);
  int v0 = t.affine_channel(a, b.id("lift.w"));  // [d_v, ell, n, n]
  int p_in = cfg.pad_of(ell);
  int vp = t.time_wrap_pad(v0, p_in);
  int L_in = ell + p_in;
  // Window samples are end-aligned: sample i of a K-sample window sits at
  // window time (i+1)/K, i.e. circle position i/L after padding. Latent
  // sample j is therefore evaluated at x = ((j+1) ell/d_t - 1) / L_in.
  std::vector<double> xs(cfg.d_t);
  for (int j = 0; j < cfg.d_t; ++j)
    xs[j] = (double(j + 1) / cfg.d_t * ell - 1.0) / L_in;
  int vt = t.re_project(t.time_matmul(t.fft_t(vp), eval_matrix(xs, L_in), cfg.d_t));

  int vh = t.fft2(vt, n);
  int mixed = t.depthwise_mix(vh, b.id("lift.depthwise"), cfg.k_max);
  int v2 = t.add(vt, t.re_project(t.ifft2(mixed, n)));

  int pos = t.constant(positional_encoding(cfg.d_t, n));
  int pe = t.affine_channel(pos, b.id("lift.pos"));
  // The linear-activation configuration keeps the norm affine-only so every
  // stage stays linear and super-resolution is spectrally exact.
  int h = t.layer_norm(t.add(v2, pe), b.id("lift.ln_gain"), b.id("lift.ln_bias"),
                       /*normalize=*/cfg.act == Activation::gelu);
  (void)gs;

  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    int hf = t.fft_t(t.fft2(h, n));
    int mix = t.spectral_mix(hf, b.id(p + "R"), cfg.tau_max, cfg.k_max);
    int spec = t.re_project(t.ifft2(t.ifft_t(mix), n));
    int wpath = t.affine_channel(h, b.id(p + "W"));
    h = apply_activation(b, t.add(wpath, spec));
  }
  return h;
}

int projection_spectrum_on_tape(BoundModel& b, int latent, const GridPtr& g_in,
                                int n_out) {
  const StfnoConfig& cfg = b.model->cfg;
  ad::Tape& t = *b.tape;
  int n = g_in->n;
  if (n_out < cfg.n_train)
    throw std::invalid_argument("project: n_out below training resolution");
  if (n_out < n)
    throw std::invalid_argument("project: n_out below evaluation resolution");

  int z = t.affine_channel(latent, b.id("proj.reduce"));  // [ch, d_t, n, n]
  int zp = t.time_wrap_pad(z, cfg.latent_pad());          // [ch, L_p, n, n]
  int Z = t.fft_t(t.fft2(zp, n));

  int S = b.id("proj.Ks_S");
  int M;
  if (n == cfg.n_train) {
    M = t.mul(Z, S);
  } else {
    // The learned multiplier covers the training modes; higher modes pass
    // only through the skip path.
    int Zlow = t.trunc2(Z, n, cfg.n_train);
    M = t.pad2(t.mul(Zlow, S), cfg.n_train, n);
  }
  int tot = t.add(M, t.scale_svar(Z, b.id("proj.Ks_w0")));
  if (cfg.form == Formulation::vs) {
    // Vorticity corrections stay mean-free; the layer bias is meaningless
    // here and stays untouched at zero.
    tot = t.diag(tot, &symbols(*g_in).dc_zero);
  } else {
    // Bias enters as a constant field: coefficient n^2*L_p at the zero mode.
    int lp = cfg.d_t + cfg.latent_pad();
    ad::CTensor dc({cfg.channels_out(), lp, n, n});
    for (int c = 0; c < cfg.channels_out(); ++c)
      dc.v[size_t(c) * lp * n * n] = cplx{double(n) * n * lp, 0.0};
    tot = t.add(tot, t.scale_svar(t.constant(dc), b.id("proj.Ks_b0")));
  }
  if (n_out > n) tot = t.pad2(tot, n, n_out);
  return tot;
}

int eval_times_on_tape(BoundModel& b, int spectrum, const GridPtr& g_out,
                       const std::vector<double>& window_times,
                       const SpectralField& skip, double gauge_time) {
  const StfnoConfig& cfg = b.model->cfg;
  ad::Tape& t = *b.tape;
  int lp = cfg.d_t + cfg.latent_pad();
  // Window time t maps to circle position (t d_t - 1)/L_p, so t = 1 lands on
  // the last latent sample and the whole output window is interpolation.
  std::vector<double> xs(window_times.size());
  for (size_t i = 0; i < xs.size(); ++i)
    xs[i] = (window_times[i] * cfg.d_t - 1.0) / lp;
  // Gauge: the correction vanishes at gauge_time (the skip snapshot's own
  // time), so the output trajectory is anchored there and the model
  // integrates the learned time derivative away from a known state.
  auto E = std::make_shared<CVec>(*eval_matrix(xs, lp));
  {
    double xg = (gauge_time * cfg.d_t - 1.0) / lp;
    auto E0 = eval_matrix({xg}, lp);
    for (size_t r = 0; r < xs.size(); ++r)
      for (int bn = 0; bn < lp; ++bn) (*E)[r * lp + bn] -= (*E0)[bn];
  }
  int Y = t.time_matmul(spectrum, std::move(E), static_cast<int>(xs.size()));
  if (cfg.form == Formulation::vp && cfg.helmholtz) {
    // Project the correction to be solenoidal per retained mode.
    const auto& gs = symbols(*g_out);
    int u1 = t.slice_plane(Y, 0);
    int u2 = t.slice_plane(Y, 1);
    int p1 = t.add(t.diag(u1, &gs.lp11), t.diag(u2, &gs.lp12));
    int p2 = t.add(t.diag(u1, &gs.lp12), t.diag(u2, &gs.lp22));
    Y = t.join2(p1, p2);
  }
  if (skip.grid->n != g_out->n)
    throw std::invalid_argument("eval_times: skip snapshot resolution mismatch");
  // Skip connection in spectral form.
  int out;
  if (cfg.form == Formulation::vs) {
    auto sc = std::make_shared<CVec>(skip.coeffs);
    out = t.add_const(Y, std::move(sc));
  } else {
    size_t plane = skip.plane();
    auto s1 = std::make_shared<CVec>(skip.coeffs.begin(),
                                     skip.coeffs.begin() + plane);
    auto s2 = std::make_shared<CVec>(skip.coeffs.begin() + plane,
                                     skip.coeffs.end());
    int c0 = t.add_const(t.slice_plane(Y, 0), std::move(s1));
    int c1 = t.add_const(t.slice_plane(Y, 1), std::move(s2));
    out = t.join2(c0, c1);
  }
  return out;
}

int eval_deriv_on_tape(BoundModel& b, int spectrum, const GridPtr& g_out,
                       const std::vector<double>& window_times,
                       double window_seconds) {
  const StfnoConfig& cfg = b.model->cfg;
  ad::Tape& t = *b.tape;
  int lp = cfg.d_t + cfg.latent_pad();
  std::vector<double> xs(window_times.size());
  for (size_t i = 0; i < xs.size(); ++i)
    xs[i] = (window_times[i] * cfg.d_t - 1.0) / lp;
  // d/dt_phys = d/dx * dx/dt_window * dt_window/dt_phys.
  double scale = (double(cfg.d_t) / lp) / window_seconds;
  int Y = t.time_matmul(spectrum, eval_matrix(xs, lp, scale),
                        static_cast<int>(xs.size()));
  if (cfg.form == Formulation::vp && cfg.helmholtz) {
    const auto& gs = symbols(*g_out);
    int u1 = t.slice_plane(Y, 0);
    int u2 = t.slice_plane(Y, 1);
    int p1 = t.add(t.diag(u1, &gs.lp11), t.diag(u2, &gs.lp12));
    int p2 = t.add(t.diag(u1, &gs.lp12), t.diag(u2, &gs.lp22));
    Y = t.join2(p1, p2);
  }
  return Y;
}

int forward_on_tape(BoundModel& b, const ad::CTensor& input,
                    const SpectralField& u_last, const GridPtr& g_in,
                    int n_t_out, int n_out) {
  int h = latent_on_tape(b, input, g_in);
  int tot = projection_spectrum_on_tape(b, h, g_in, n_out);
  GridPtr g_out = n_out == g_in->n ? g_in : make_grid(n_out, g_in->L);
  SpectralField skip =
      u_last.grid->n == n_out ? u_last : resample(u_last, g_out);
  return eval_times_on_tape(b, tot, g_out, output_window_times(n_t_out), skip);
}

namespace {

SpectralTrajectory spectral_output_to_traj(const ad::CTensor& out,
                                           const GridPtr& g, double t0,
                                           double dt_out, bool vec) {
  int ch = out.shape[0], T = out.shape[1];
  size_t plane = g->size();
  SpectralTrajectory traj;
  for (int m = 0; m < T; ++m) {
    SpectralField f(g, vec);
    for (int c = 0; c < ch; ++c)
      for (size_t i = 0; i < plane; ++i)
        f.coeffs[c * plane + i] =
            out.v[(size_t(c) * T + m) * plane + i];
    traj.snapshots.push_back(std::move(f));
    traj.times.push_back(t0 + (m + 1) * dt_out);
  }
  return traj;
}

}  // namespace

SpectralTrajectory forward(const StfnoModel& m, const RVec& input, int ell,
                           int n, int n_t_out, int n_out, double t0,
                           double delta_t_out) {
  if (input.size() != size_t(ell) * n * n)
    throw std::invalid_argument("forward: input size mismatch");
  if (m.cfg.form == Formulation::vp)
    throw std::invalid_argument(
        "forward: scalar entry point supports the V-S formulation only");
  GridPtr g = make_grid(n, m.cfg.L);
  ad::CTensor in({1, ell, n, n});
  for (size_t i = 0; i < input.size(); ++i) in.v[i] = cplx{input[i], 0.0};
  RVec last(input.end() - size_t(n) * n, input.end());
  SpectralField u_last = transform(last, g);
  ad::Tape t;
  BoundModel b = bind(t, m, /*respect_freeze=*/false);
  int out = forward_on_tape(b, in, u_last, g, n_t_out, n_out);
  GridPtr g_out = n_out == n ? g : make_grid(n_out, m.cfg.L);
  return spectral_output_to_traj(t.val(out), g_out, t0, delta_t_out,
                                 m.cfg.form == Formulation::vp);
}

SpectralTrajectory rollout_baseline(const StfnoModel& m, const RVec& input,
                                    int ell, int n, int k_steps, double t0,
                                    double delta_t) {
  SpectralTrajectory traj;
  if (k_steps == 0) return traj;
  RVec window = input;
  size_t plane = size_t(n) * n;
  for (int k = 0; k < k_steps; ++k) {
    SpectralTrajectory one =
        forward(m, window, ell, n, /*n_t_out=*/1, n, t0 + k * delta_t, delta_t);
    traj.snapshots.push_back(one.snapshots[0]);
    traj.times.push_back(one.times[0]);
    RVec next = inverse(one.snapshots[0]);
    window.erase(window.begin(), window.begin() + plane);
    window.insert(window.end(), next.begin(), next.end());
  }
  return traj;
}

}  // namespace specref
