#include "specref/residual.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace specref {

namespace {

void require_mean_free(const SpectralField& f, const char* who) {
  double mag = 0.0;
  for (const auto& z : f.coeffs) mag = std::max(mag, std::abs(z));
  double dc = std::abs(f.coeffs[0]);
  if (dc > 1e-12 * (mag + 1e-300) && dc > 1e-13)
    throw std::invalid_argument(std::string(who) + ": omega must be mean-free");
}

void require_same_grid(const SpectralField& a, const SpectralField& b,
                       const char* who) {
  if (a.grid->n != b.grid->n || a.grid->L != b.grid->L)
    throw std::invalid_argument(std::string(who) + ": grid mismatch");
}

}  // namespace

SpectralField residual_vs(const SpectralField& omega,
                          const SpectralField& dt_omega,
                          const SpectralField* curl_f, double nu) {
  require_mean_free(omega, "residual_vs");
  require_same_grid(omega, dt_omega, "residual_vs");
  if (curl_f) require_same_grid(omega, *curl_f, "residual_vs");
  RawCtx cx(*omega.grid);
  SpectralField out = omega;
  out.coeffs = residual_vs_t(cx, symbols(*omega.grid), omega.coeffs,
                             dt_omega.coeffs, curl_f ? &curl_f->coeffs : nullptr,
                             nu);
  return out;
}

SpectralField residual_vp(const SpectralField& u, const SpectralField& dt_u,
                          const SpectralField* f, double nu) {
  if (!u.is_vector) throw std::invalid_argument("residual_vp: expected velocity");
  require_same_grid(u, dt_u, "residual_vp");
  if (f) require_same_grid(u, *f, "residual_vp");
  RawCtx cx(*u.grid);
  SpectralField out = u;
  out.coeffs = residual_vp_t(cx, symbols(*u.grid), u.coeffs, dt_u.coeffs,
                             f ? &f->coeffs : nullptr, nu);
  return out;
}

double eta_m(const SpectralField& field_m, const SpectralField& dt_field_m,
             const EstimatorConfig& cfg) {
  SpectralField r =
      cfg.form == Formulation::vs
          ? residual_vs(field_m, dt_field_m, cfg.forcing, cfg.nu)
          : residual_vp(field_m, dt_field_m, cfg.forcing, cfg.nu);
  return neg_norm(r, cfg.alpha);
}

EstimatorReport eta_total(const SpectralTrajectory& traj,
                          const std::vector<SpectralField>& dt_fields,
                          const EstimatorConfig& cfg) {
  if (traj.snapshots.size() != dt_fields.size())
    throw std::invalid_argument("eta_total: snapshot/derivative length mismatch");
  EstimatorReport rep;
  rep.form = cfg.form;
  rep.times = traj.times;
  double acc = 0.0;
  for (size_t m = 0; m < traj.snapshots.size(); ++m) {
    double e = eta_m(traj.snapshots[m], dt_fields[m], cfg);
    rep.eta.push_back(e);
    acc += e * e;
  }
  rep.eta_total = std::sqrt(acc);
  return rep;
}

std::shared_ptr<const CVec> neg_norm_weights(const GridPtr& g, double alpha) {
  static std::mutex mu;
  static std::map<std::pair<const Grid*, double>, std::shared_ptr<const CVec>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(g.get(), alpha);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  double n2 = double(g->n) * g->n;
  double quad = (g->L * g->L) / (n2 * n2);
  auto w = std::make_shared<CVec>(g->size());
  for (size_t m = 0; m < g->size(); ++m)
    (*w)[m] = m == 0 ? cplx{0.0, 0.0}
                     : cplx{quad / (alpha + g->k_sq[m]), 0.0};
  cache.emplace(key, w);
  return w;
}

std::shared_ptr<const CVec> l2_weights(const GridPtr& g) {
  static std::mutex mu;
  static std::map<const Grid*, std::shared_ptr<const CVec>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(g.get());
  if (it != cache.end()) return it->second;
  double n2 = double(g->n) * g->n;
  double quad = (g->L * g->L) / (n2 * n2);
  auto w = std::make_shared<CVec>(g->size(), cplx{quad, 0.0});
  cache.emplace(g.get(), w);
  return w;
}

}  // namespace specref
