#include "specref/train.hpp"

#include <algorithm>
#include <cmath>

#include "specref/rng.hpp"
#include "specref/timestep.hpp"

namespace specref {

namespace {

// Spectral coefficients of a stack of physical planes: [1, count, n, n].
ad::CTensor planes_to_spectral(const RVec& planes, int count, const GridPtr& g) {
  int n = g->n;
  size_t plane = g->size();
  CVec tmp(size_t(count) * plane);
  for (size_t i = 0; i < tmp.size(); ++i) tmp[i] = cplx{planes[i], 0.0};
  CVec spec = kern::fft2(tmp, n);
  ad::CTensor out({1, count, n, n});
  out.v = std::move(spec);
  return out;
}

ad::CTensor planes_to_phys_tensor(const RVec& planes, int count, int n) {
  ad::CTensor out({1, count, n, n});
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = cplx{planes[i], 0.0};
  return out;
}

SpectralField last_snapshot_field(const RVec& input, int ell, const GridPtr& g) {
  size_t plane = g->size();
  RVec last(input.begin() + size_t(ell - 1) * plane, input.begin() + size_t(ell) * plane);
  return transform(last, g);
}

double tensor_weighted_sq(const ad::CTensor& t, const CVec& w) {
  double acc = 0.0;
  size_t plane = w.size();
  for (size_t i = 0; i < t.size(); ++i)
    acc += w[i % plane].real() * std::norm(t.v[i]);
  return acc;
}

}  // namespace

TrainResult train(StfnoModel& m, const Dataset& data, int n_train,
                  const TrainConfig& cfg) {
  if (data.n != m.cfg.n_train)
    throw std::invalid_argument("train: dataset grid does not match the model");
  if (m.cfg.d_t > data.n_t)
    throw std::invalid_argument("train: latent time steps exceed data n_t");
  if (n_train < 1 || n_train > static_cast<int>(data.samples.size()))
    throw std::invalid_argument("train: bad n_train");
  TrainResult result;
  if (cfg.epochs == 0) return result;

  GridPtr g = make_grid(data.n, data.L);
  auto w_loss = cfg.loss == LossKind::l2 ? l2_weights(g)
                                         : neg_norm_weights(g, cfg.alpha);

  // Precompute spectral ground truth and its norm per sample.
  std::vector<ad::CTensor> gt(n_train);
  std::vector<double> gt_norm(n_train);
  std::vector<ad::CTensor> inputs(n_train);
  std::vector<SpectralField> lasts;
  lasts.reserve(n_train);
  for (int s = 0; s < n_train; ++s) {
    const auto& smp = data.samples[s];
    gt[s] = planes_to_spectral(smp.output, data.n_t, g);
    gt_norm[s] = std::sqrt(tensor_weighted_sq(gt[s], *w_loss));
    inputs[s] = planes_to_phys_tensor(smp.input, data.ell, data.n);
    lasts.push_back(last_snapshot_field(smp.input, data.ell, g));
  }

  int steps_per_epoch = (n_train + cfg.batch - 1) / cfg.batch;
  OptimizerConfig oc;
  oc.lr = cfg.lr;
  oc.weight_decay = cfg.weight_decay;
  oc.one_cycle = cfg.one_cycle;
  oc.total_steps = cfg.epochs * steps_per_epoch;
  Adam adam(oc);

  unfreeze_all(m);
  std::vector<int> order(n_train);
  for (int i = 0; i < n_train; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle(cfg.shuffle_seed, epoch);
    for (int i = n_train - 1; i > 0; --i)
      std::swap(order[i], order[shuffle.u64() % (i + 1)]);
    double epoch_acc = 0.0;
    for (int b0 = 0; b0 < n_train; b0 += cfg.batch) {
      int bsz = std::min(cfg.batch, n_train - b0);
      std::map<std::string, ad::CTensor> grads;
      for (int k = 0; k < bsz; ++k) {
        int s = order[b0 + k];
        ad::Tape t;
        BoundModel bm = bind(t, m, /*respect_freeze=*/false);
        int out = forward_on_tape(bm, inputs[s], lasts[s], g, data.n_t, data.n);
        int diff = t.sub(out, t.constant(gt[s]));
        int ss = t.sum_sq_weighted(diff, w_loss, 1.0);
        int loss = t.scale(t.sqrt_scalar(ss), 1.0 / (gt_norm[s] * bsz));
        double lv = t.val(loss).v[0].real();
        if (!std::isfinite(lv))
          throw std::runtime_error("train: non-finite loss in batch " +
                                   std::to_string(b0 / cfg.batch) + " of epoch " +
                                   std::to_string(epoch));
        epoch_acc += lv * bsz;
        t.backward(loss);
        for (const auto& name : m.order) {
          const auto& a = t.adj(bm.id(name));
          if (a.v.empty()) continue;
          auto [it, fresh] = grads.try_emplace(name, a);
          if (!fresh)
            for (size_t i = 0; i < it->second.size(); ++i)
              it->second.v[i] += a.v[i];
        }
      }
      adam.step(m.params, grads);
    }
    result.epoch_loss.push_back(epoch_acc / n_train);
  }

  // Energy-signature diagnostic: enstrophy-slope gap on the first sample.
  if (m.cfg.form == Formulation::vs) {
    const auto& smp = data.samples[0];
    SpectralTrajectory pred = forward(m, smp.input, data.ell, data.n, data.n_t,
                                      data.n, smp.times_in.back(), data.delta_t);
    RVec last_gt(smp.output.end() - g->size(), smp.output.end());
    SpectralField ref = transform(last_gt, g);
    double hi = std::min(double(data.n) / 3.0, 32.0);
    double lo = std::min(8.0, hi / 2.0);
    double sp = fit_slope(enstrophy_spectrum(pred.snapshots.back()), lo, hi);
    double sr = fit_slope(enstrophy_spectrum(ref), lo, hi);
    result.slope_gap = sp - sr;
  }
  return result;
}

std::vector<std::string> trainable_names(const StfnoModel& m) {
  std::vector<std::string> names;
  for (const auto& name : m.order)
    if (m.trainable.count(name)) names.push_back(name);
  return names;
}

ad::CTensor extract_latent(const StfnoModel& m, const RVec& input, int ell,
                           const GridPtr& g) {
  ad::Tape t;
  BoundModel b = bind_with(t, m, {});  // everything constant
  ad::CTensor in = planes_to_phys_tensor(input, ell, g->n);
  int h = latent_on_tape(b, in, g);
  return t.val(h);
}

// The per-step estimator realizes R = f - dt(u_N) - conv(u_N) + nu Lap(u_N)
// with the spatial right-hand side bundled through one fine solver step,
// D_t u := ((Delta t)^-gamma)(B_gamma(u) - u) = f - conv(u) + nu Lap(u) + O(h),
// and the time derivative taken analytically on the network's continuous
// temporal basis: R ~ D_t(u_m) - d/dt u_N(t_m). Pairing the fine step with
// the state's own difference quotient instead would cancel the spatial terms
// for any state and leave nothing to optimize.
int build_finetune_loss(ad::Tape& tape, const StfnoModel& m,
                        const std::vector<int>& provided_leaf_ids,
                        const ad::CTensor& latent, const SpectralField& u_last,
                        int n_t_out, const FinetuneConfig& cfg,
                        const GridPtr& g,
                        const std::vector<SpectralField>& prior_snapshots,
                        std::vector<double>* eta_per_step) {
  auto names = trainable_names(m);
  if (names.size() != provided_leaf_ids.size())
    throw std::invalid_argument("build_finetune_loss: leaf count mismatch");
  std::map<std::string, int> provided;
  for (size_t i = 0; i < names.size(); ++i) provided[names[i]] = provided_leaf_ids[i];
  BoundModel b = bind_with(tape, m, provided);

  int lat = tape.constant(latent);
  int tot = projection_spectrum_on_tape(b, lat, g, g->n);

  double h = std::pow(cfg.delta_t, cfg.gamma);
  auto sym = std::make_shared<StepSymbols>(make_step_symbols(
      g, cfg.scheme, m.cfg.form, h, cfg.nu, cfg.drag, cfg.forcing));
  tape.retain(sym);  // nodes borrow the step factors
  const StepSymbols& S = *sym;

  const GridSymbols& gs = symbols(*g);
  ad::TapeCtx cx{&tape, g.get()};
  auto w = cfg.loss == LossKind::h_neg1 ? neg_norm_weights(g, cfg.alpha)
                                        : l2_weights(g);
  // Collocation covers the output times plus one point inside the leading
  // gap (the paper's time interval opens before the first output step).
  // The extra point sits at a half node: it pins the otherwise invisible
  // jump between the anchor and the first output, and it must not complete
  // a full uniform circle of nodes, where the symmetric init would become a
  // stationary point of the summed gradients.
  std::vector<double> times = {0.5 / n_t_out};
  for (double tm : output_window_times(n_t_out)) times.push_back(tm);
  double window_seconds = n_t_out * cfg.delta_t;
  int loss = -1;
  for (size_t mi = 0; mi < times.size(); ++mi) {
    int u_m = eval_times_on_tape(b, tot, g, {times[mi]}, u_last);
    int du_m = eval_deriv_on_tape(b, tot, g, {times[mi]}, window_seconds);
    int ub = imex_step_t(cx, gs, S, u_m);
    for (const auto& z : tape.val(ub).v)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw BlowUpError("finetune: fine step blew up at output step " +
                              std::to_string(mi), times[mi]);
    int dt_u = tape.scale(tape.sub(ub, u_m), 1.0 / h);
    int r = cx.zero_dc(tape.sub(dt_u, du_m));
    int e2 = tape.sum_sq_weighted(r, w, 1.0);
    if (eta_per_step && mi > 0)
      eta_per_step->push_back(
          std::sqrt(std::max(0.0, tape.val(e2).v[0].real())));
    loss = loss < 0 ? e2 : tape.add(loss, e2);
  }
  if (cfg.ridge > 0.0) {
    // Temporal-frequency-squared ridge over the correction spectrum: node
    // collocation cannot tell tau-aliased corrections apart, and this picks
    // the smooth-in-time representative of each aliasing class.
    int lp = m.cfg.d_t + m.cfg.latent_pad();
    int ch = m.cfg.channels_out();
    size_t plane = g->size();
    auto wr = std::make_shared<CVec>(size_t(ch) * lp * plane);
    for (int c = 0; c < ch; ++c)
      for (int tb = 0; tb < lp; ++tb) {
        double tf = signed_freq(tb, lp) / double(lp);
        for (size_t k = 0; k < plane; ++k)
          (*wr)[(size_t(c) * lp + tb) * plane + k] =
              (*w)[k].real() * tf * tf;
      }
    double scale = cfg.ridge / (double(lp) * lp);
    loss = tape.add(loss, tape.sum_sq_weighted(tot, std::move(wr), scale));
  }
  return loss;
}

namespace {

SpectralTrajectory reconstruct_output(const StfnoModel& m,
                                      const ad::CTensor& latent,
                                      const SpectralField& u_last, int n_t_out,
                                      const GridPtr& g, double t0, double dt) {
  ad::Tape t;
  BoundModel b = bind_with(t, m, {});
  int lat = t.constant(latent);
  int tot = projection_spectrum_on_tape(b, lat, g, g->n);
  int out = eval_times_on_tape(b, tot, g, output_window_times(n_t_out), u_last);
  const ad::CTensor& o = t.val(out);
  int ch = o.shape[0];
  size_t plane = g->size();
  SpectralTrajectory traj;
  for (int mi = 0; mi < n_t_out; ++mi) {
    SpectralField f(g, ch == 2);
    for (int c = 0; c < ch; ++c)
      for (size_t i = 0; i < plane; ++i)
        f.coeffs[c * plane + i] = o.v[(size_t(c) * n_t_out + mi) * plane + i];
    traj.snapshots.push_back(std::move(f));
    traj.times.push_back(t0 + (mi + 1) * dt);
  }
  return traj;
}

}  // namespace

FinetuneResult finetune_parallel(StfnoModel& m, const RVec& input, int ell,
                                 int n, int n_t_out, const FinetuneConfig& cfg) {
  cfg.validate();
  GridPtr g = make_grid(n, m.cfg.L);
  freeze_backbone(m, cfg.include_reduction);
  ad::CTensor latent = extract_latent(m, input, ell, g);  // held fixed
  SpectralField u_last = last_snapshot_field(input, ell, g);

  auto names = trainable_names(m);
  OptimizerConfig oc;
  oc.lr = cfg.lr;
  Adam adam(oc);
  FinetuneResult res;

  for (int it = 0; it < cfg.iters; ++it) {
    ad::Tape t;
    std::vector<int> leaves;
    leaves.reserve(names.size());
    for (const auto& nm : names) leaves.push_back(t.leaf(m.params.at(nm)));
    int loss;
    try {
      loss = build_finetune_loss(t, m, leaves, latent, u_last, n_t_out, cfg, g);
    } catch (const BlowUpError& e) {
      throw BlowUpError(std::string(e.what()) + " (iteration " +
                            std::to_string(it) + ")", e.time);
    }
    double lv = t.val(loss).v[0].real();
    if (!std::isfinite(lv))
      throw std::runtime_error("finetune: non-finite estimator at iteration " +
                               std::to_string(it));
    res.eta_history.push_back(std::sqrt(std::max(0.0, lv)));
    t.backward(loss);
    std::map<std::string, ad::CTensor> grads;
    for (size_t i = 0; i < names.size(); ++i) {
      const auto& a = t.adj(leaves[i]);
      if (!a.v.empty()) grads.emplace(names[i], a);
    }
    adam.step(m.params, grads);
  }

  res.traj = reconstruct_output(m, latent, u_last, n_t_out, g, 0.0, cfg.delta_t);
  {
    // Estimator of the final state, evaluated without gradients.
    ad::Tape t;
    std::vector<int> leaves;
    for (const auto& nm : names) leaves.push_back(t.leaf(m.params.at(nm)));
    std::vector<double> per_step;
    build_finetune_loss(t, m, leaves, latent, u_last, n_t_out, cfg, g, &per_step);
    res.final_eta.assign(per_step.begin(), per_step.end());
  }
  return res;
}

FinetuneResult finetune_guaranteed(StfnoModel& m, const RVec& input, int ell,
                                   int n, int n_t_out,
                                   const FinetuneConfig& cfg) {
  cfg.validate();
  GridPtr g = make_grid(n, m.cfg.L);
  freeze_backbone(m, cfg.include_reduction);
  ad::CTensor latent = extract_latent(m, input, ell, g);
  SpectralField u_base = last_snapshot_field(input, ell, g);

  auto names = trainable_names(m);
  auto times = output_window_times(n_t_out);
  FinetuneResult res;

  double h = std::pow(cfg.delta_t, cfg.gamma);
  double window_seconds = n_t_out * cfg.delta_t;
  auto sym = std::make_shared<StepSymbols>(make_step_symbols(
      g, cfg.scheme, m.cfg.form, h, cfg.nu, cfg.drag, cfg.forcing));
  auto w = cfg.loss == LossKind::h_neg1 ? neg_norm_weights(g, cfg.alpha)
                                        : l2_weights(g);
  for (int mi = 0; mi < n_t_out; ++mi) {
    OptimizerConfig oc;
    oc.lr = cfg.lr;
    Adam adam(oc);
    int j = 0;
    while (true) {
      ad::Tape t;
      t.retain(sym);
      std::vector<int> leaves;
      for (const auto& nm : names) leaves.push_back(t.leaf(m.params.at(nm)));
      std::map<std::string, int> provided;
      for (size_t i = 0; i < names.size(); ++i) provided[names[i]] = leaves[i];
      BoundModel b = bind_with(t, m, provided);
      int lat = t.constant(latent);
      int tot = projection_spectrum_on_tape(b, lat, g, g->n);
      // The correction is gauged at the previous output time so each step
      // integrates away from the previously corrected snapshot; the residual
      // is collocated at both ends of the sub-interval.
      double gauge = mi == 0 ? 0.0 : times[mi - 1];
      const GridSymbols& gs = symbols(*g);
      ad::TapeCtx cx{&t, g.get()};
      int e2 = -1;
      int u_m = -1;
      double eta = 0.0;
      for (double tc : {gauge, times[mi]}) {
        int u_c = eval_times_on_tape(b, tot, g, {tc}, u_base, gauge);
        int du_c = eval_deriv_on_tape(b, tot, g, {tc}, window_seconds);
        int ub = imex_step_t(cx, gs, *sym, u_c);
        int dt_u = t.scale(t.sub(ub, u_c), 1.0 / h);
        int r = cx.zero_dc(t.sub(dt_u, du_c));
        int term = t.sum_sq_weighted(r, w, 1.0);
        if (tc == times[mi]) {
          eta = std::sqrt(std::max(0.0, t.val(term).v[0].real()));
          u_m = u_c;
        }
        e2 = e2 < 0 ? term : t.add(e2, term);
      }
      if (!std::isfinite(eta))
        throw std::runtime_error("finetune: non-finite eta_m at step " +
                                 std::to_string(mi));
      bool done = eta <= cfg.tol;
      bool capped = j >= cfg.iter_max;
      if (done || capped) {
        if (capped && !done) res.capped_steps.push_back(mi);
        // Fix this step's corrected snapshot as the next skip base.
        const ad::CTensor& uo = t.val(u_m);
        SpectralField next(g, m.cfg.form == Formulation::vp);
        next.coeffs = uo.v;
        res.traj.snapshots.push_back(next);
        res.traj.times.push_back((mi + 1) * cfg.delta_t);
        res.final_eta.push_back(eta);
        u_base = std::move(next);
        break;
      }
      t.backward(e2);
      std::map<std::string, ad::CTensor> grads;
      for (size_t i = 0; i < names.size(); ++i) {
        const auto& a = t.adj(leaves[i]);
        if (!a.v.empty()) grads.emplace(names[i], a);
      }
      adam.step(m.params, grads);
      ++j;
    }
  }
  return res;
}

std::vector<SpectralField> centered_differences(const SpectralTrajectory& traj) {
  size_t n = traj.snapshots.size();
  if (n < 2)
    throw std::invalid_argument("centered_differences: need >= 2 snapshots");
  std::vector<SpectralField> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    size_t lo = i == 0 ? 0 : i - 1;
    size_t hi = i + 1 == n ? n - 1 : i + 1;
    double span = traj.times[hi] - traj.times[lo];
    SpectralField d = traj.snapshots[i];
    for (size_t k = 0; k < d.coeffs.size(); ++k)
      d.coeffs[k] =
          (traj.snapshots[hi].coeffs[k] - traj.snapshots[lo].coeffs[k]) / span;
    out.push_back(std::move(d));
  }
  return out;
}

EvalMetrics evaluate(const SpectralTrajectory& pred,
                     const SpectralTrajectory& ref, const EstimatorConfig& cfg) {
  if (pred.size() != ref.size() || pred.size() == 0)
    throw std::invalid_argument("evaluate: trajectory length mismatch");
  EvalMetrics m;
  m.rel_l2_final = rel_l2(pred.snapshots.back(), ref.snapshots.back());

  auto dts = centered_differences(pred);
  EstimatorConfig a0 = cfg;
  a0.alpha = 0.0;
  EstimatorConfig a1 = cfg;
  a1.alpha = 1.0;
  m.res_neg_final_a0 = eta_m(pred.snapshots.back(), dts.back(), a0);
  m.res_neg_final_a1 = eta_m(pred.snapshots.back(), dts.back(), a1);

  SpectralTrajectory diff = pred;
  for (size_t i = 0; i < diff.size(); ++i)
    for (size_t k = 0; k < diff.snapshots[i].coeffs.size(); ++k)
      diff.snapshots[i].coeffs[k] -= ref.snapshots[i].coeffs[k];
  double dnorm = bochner_norm(diff, 0.0, 2.0);
  double rnorm = bochner_norm(ref, 0.0, 2.0);
  m.bochner_rel_l2 = rnorm > 0 ? dnorm / rnorm : dnorm;

  const SpectralField& pf = pred.snapshots.back();
  const SpectralField& rf = ref.snapshots.back();
  if (!pf.is_vector) {
    double hi = std::min(double(pf.n()) / 3.0, 32.0);
    double lo = std::min(8.0, hi / 2.0);
    m.slope_pred = fit_slope(enstrophy_spectrum(pf), lo, hi);
    m.slope_ref = fit_slope(enstrophy_spectrum(rf), lo, hi);
  }
  return m;
}

}  // namespace specref
