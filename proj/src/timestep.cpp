#include "specref/timestep.hpp"

#include <cmath>
#include <limits>

namespace specref {

StepSymbols make_step_symbols(const GridPtr& g, Scheme scheme, Formulation form,
                              double dt, double nu, double drag,
                              const SpectralField* forcing) {
  StepSymbols s;
  s.grid = g;
  s.scheme = scheme;
  s.form = form;
  s.dt = dt;
  s.nu = nu;
  s.drag = drag;
  size_t plane = g->size();
  s.efac_half.resize(plane);
  s.hfac_half.resize(plane);
  s.hfac_full.resize(plane);
  for (size_t m = 0; m < plane; ++m) {
    double lam = -nu * g->k_sq[m] - drag;
    s.efac_half[m] = cplx{1.0 + 0.5 * dt * lam, 0.0};
    s.hfac_half[m] = cplx{1.0 / (1.0 - 0.5 * dt * lam), 0.0};
    s.hfac_full[m] = cplx{1.0 / (1.0 - dt * lam), 0.0};
  }
  if (forcing) {
    if (forcing->n() != g->n)
      throw std::invalid_argument("step: forcing grid mismatch");
    s.forcing = forcing->coeffs;
  }
  return s;
}

namespace {

double sq_norm(const CVec& v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::norm(z);
  return acc;
}

void check_finite(const CVec& v, double before_sq, double t) {
  double after_sq = 0.0;
  for (const auto& z : v) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw BlowUpError("solver blow-up (non-finite state) at t=" +
                            std::to_string(t), t);
    after_sq += std::norm(z);
  }
  if (after_sq > 1e12 * (before_sq + 1e-300))
    throw BlowUpError("solver blow-up (norm growth) at t=" + std::to_string(t), t);
}

CVec step_coeffs(const SpectralField& f, const StepSymbols& sym, double t) {
  RawCtx cx(*f.grid);
  double before = sq_norm(f.coeffs);
  CVec next = imex_step_t(cx, symbols(*f.grid), sym, f.coeffs);
  check_finite(next, before, t);
  return next;
}

}  // namespace

SolverState step(const SolverState& state, const SolverConfig& cfg) {
  cfg.validate();
  bool want_vec = cfg.form == Formulation::vp;
  if (state.field.is_vector != want_vec)
    throw std::invalid_argument("step: field kind does not match formulation");
  StepSymbols sym =
      make_step_symbols(state.field.grid, cfg.scheme, cfg.form, cfg.dt, cfg.nu,
                        cfg.drag, cfg.forcing ? &*cfg.forcing : nullptr);
  SolverState out;
  out.t = state.t + cfg.dt;
  out.field = state.field;
  out.field.coeffs = step_coeffs(state.field, sym, out.t);
  return out;
}

SpectralField b_gamma(const SpectralField& f, int gamma, double dt,
                      const SolverConfig& cfg) {
  if (gamma < 2) throw std::invalid_argument("b_gamma: gamma must be >= 2");
  double h = std::pow(dt, gamma);
  StepSymbols sym =
      make_step_symbols(f.grid, cfg.scheme, cfg.form, h, cfg.nu, cfg.drag,
                        cfg.forcing ? &*cfg.forcing : nullptr);
  SpectralField out = f;
  out.coeffs = step_coeffs(f, sym, h);
  return out;
}

SpectralField dt_approx(const SpectralField& f, int gamma, double dt,
                        const SolverConfig& cfg) {
  SpectralField b = b_gamma(f, gamma, dt, cfg);
  double inv_h = 1.0 / std::pow(dt, gamma);
  SpectralField out = f;
  for (size_t i = 0; i < out.coeffs.size(); ++i)
    out.coeffs[i] = (b.coeffs[i] - f.coeffs[i]) * inv_h;
  return out;
}

SpectralTrajectory advance(const SolverState& state, const SolverConfig& cfg,
                           double t_end, int record_every) {
  cfg.validate();
  if (!(t_end > state.t))
    throw std::invalid_argument("advance: t_end must exceed state.t");
  if (record_every < 1)
    throw std::invalid_argument("advance: record_every must be >= 1");
  long n_steps = static_cast<long>(std::floor((t_end - state.t) / cfg.dt + 1e-9));
  long n_rec = n_steps / record_every;
  SpectralTrajectory traj;
  traj.times.reserve(n_rec + 1);
  traj.snapshots.reserve(n_rec + 1);
  traj.times.push_back(state.t);
  traj.snapshots.push_back(state.field);
  StepSymbols s =
      make_step_symbols(state.field.grid, cfg.scheme, cfg.form, cfg.dt, cfg.nu,
                        cfg.drag, cfg.forcing ? &*cfg.forcing : nullptr);
  SpectralField cur = state.field;
  for (long k = 1; k <= n_steps; ++k) {
    double t = state.t + k * cfg.dt;
    cur.coeffs = step_coeffs(cur, s, t);
    if (k % record_every == 0) {
      traj.times.push_back(state.t + double(k) * cfg.dt);
      traj.snapshots.push_back(cur);
    }
  }
  return traj;
}

double cfl_dt(const SpectralField& u, const Grid& g, double safety) {
  if (!(safety > 0.0) || safety > 1.0)
    throw std::invalid_argument("cfl_dt: safety must lie in (0, 1]");
  double vmax = max_speed(u);
  if (vmax == 0.0) return std::numeric_limits<double>::infinity();
  return safety * g.dx / vmax;
}

}  // namespace specref
