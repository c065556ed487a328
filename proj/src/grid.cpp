#include "specref/grid.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace specref {

// Grids are memoized by (n, L): they are immutable and shared, and derived
// caches (symbols, norm weights) can key on the grid address safely.
GridPtr make_grid(int n, double L) {
  if (n < 8 || n % 2 != 0)
    throw std::invalid_argument("make_grid: n must be even and >= 8, got " +
                                std::to_string(n));
  if (!(L > 0.0)) throw std::invalid_argument("make_grid: L must be positive");
  static std::mutex mu;
  static std::map<std::pair<int, double>, GridPtr> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({n, L});
    if (it != cache.end()) return it->second;
  }
  auto g = std::make_shared<Grid>();
  g->n = n;
  g->L = L;
  g->dx = L / n;
  g->kx.resize(n);
  g->ky.resize(n);
  double scale = kTwoPi / L;
  for (int j = 0; j < n; ++j) {
    g->kx[j] = scale * signed_freq(j, n);
    g->ky[j] = scale * signed_freq(j, n);
  }
  g->k_sq.resize(g->size());
  g->dealias_mask.resize(g->size());
  double cutoff = n / 3.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      g->k_sq[g->idx(i, j)] = g->kx[i] * g->kx[i] + g->ky[j] * g->ky[j];
      bool keep = std::abs(signed_freq(i, n)) < cutoff &&
                  std::abs(signed_freq(j, n)) < cutoff;
      g->dealias_mask[g->idx(i, j)] = keep ? 1 : 0;
    }
  }
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(std::make_pair(n, L), std::move(g)).first->second;
}

}  // namespace specref
