#include "specref/optimizer.hpp"

#include <cmath>

namespace specref {

double Adam::current_lr() const {
  if (!cfg_.one_cycle) return cfg_.lr;
  double floor = cfg_.floor_frac * cfg_.lr;
  int total = std::max(1, cfg_.total_steps);
  int warm = std::max(1, static_cast<int>(std::lround(cfg_.warmup_frac * total)));
  if (t_ < warm) {
    double f = double(t_) / warm;
    return floor + (cfg_.lr - floor) * f;
  }
  double f = double(t_ - warm) / std::max(1, total - warm);
  f = std::min(1.0, f);
  return floor + 0.5 * (cfg_.lr - floor) * (1.0 + std::cos(kPi * f));
}

void Adam::step(std::map<std::string, ad::CTensor>& params,
                const std::map<std::string, ad::CTensor>& grads) {
  double lr = current_lr();
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (const auto& [name, g] : grads) {
    auto pit = params.find(name);
    if (pit == params.end()) continue;
    ad::CTensor& p = pit->second;
    ad::CTensor& m = m_.try_emplace(name, ad::CTensor(p.shape)).first->second;
    ad::CTensor& v = v_.try_emplace(name, ad::CTensor(p.shape)).first->second;
    for (size_t i = 0; i < p.size(); ++i) {
      double gr = g.v.empty() ? 0.0 : g.v[i].real();
      double gi = g.v.empty() ? 0.0 : g.v[i].imag();
      double mr = cfg_.beta1 * m.v[i].real() + (1 - cfg_.beta1) * gr;
      double mi = cfg_.beta1 * m.v[i].imag() + (1 - cfg_.beta1) * gi;
      double vr = cfg_.beta2 * v.v[i].real() + (1 - cfg_.beta2) * gr * gr;
      double vi = cfg_.beta2 * v.v[i].imag() + (1 - cfg_.beta2) * gi * gi;
      m.v[i] = cplx{mr, mi};
      v.v[i] = cplx{vr, vi};
      double ur = lr * (mr / bc1) / (std::sqrt(vr / bc2) + cfg_.eps);
      double ui = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
      double pr = p.v[i].real() - ur - lr * cfg_.weight_decay * p.v[i].real();
      double pi = p.v[i].imag() - ui - lr * cfg_.weight_decay * p.v[i].imag();
      p.v[i] = cplx{pr, pi};
    }
  }
}

}  // namespace specref
