#pragma once

#include <functional>
#include <string>

#include "specref/timestep.hpp"

namespace specref {

enum class IcKind { taylor_green, grf, mcwilliams };

struct IcSpec {
  IcKind kind = IcKind::mcwilliams;
  uint64_t seed = 0;
  int kappa = 1;                       // taylor_green: vortex count per period
  double alpha = 2.5, tau_grf = 7.0;   // grf: covariance exponent/shift (assumed defaults)
  int k0 = 4;                          // mcwilliams: energy concentration wavenumber
  double tau_mc = 1.0;
  double normalize_energy = 1.0;       // kinetic energy target; <= 0 disables

  void validate() const {
    if (kappa < 1) throw std::invalid_argument("IcSpec: kappa must be positive");
    if (k0 < 1) throw std::invalid_argument("IcSpec: k0 must be >= 1");
    if (alpha <= 1.0) throw std::invalid_argument("IcSpec: alpha must be > 1");
  }
};

struct DatasetSpec {
  int n_train = 8, n_test = 2;
  int n_gen = 128, n_down = 64;  // generation and downsampled grid sizes
  double L = 1.0;
  double dt = 1e-3;
  double burn_in = 2.0;
  int ell = 10;     // input snapshots
  int n_t = 10;     // output snapshots
  double delta_t = 0.05;  // snapshot spacing (integer multiple of dt)

  void validate() const {
    if (burn_in < 0.0) throw std::invalid_argument("DatasetSpec: burn_in >= 0");
    double ratio = delta_t / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
      throw std::invalid_argument("DatasetSpec: delta_t must be a multiple of dt");
    if (ell < 2 || n_t < 1) throw std::invalid_argument("DatasetSpec: bad ell/n_t");
  }
  int record_every() const { return int(std::round(delta_t / dt)); }
};

// Exact Taylor-Green solution at time t: velocity and vorticity. kappa counts
// vortex cells per period; on an edge-L grid the wave vector is 2*pi*kappa/L.
struct TaylorGreen {
  SpectralField u;
  SpectralField omega;
};
TaylorGreen taylor_green(int kappa, double nu, double t, const GridPtr& g);

// Mean-free Gaussian vorticity with per-mode std (|k|^2 + tau^2)^(-alpha/2),
// conjugate-symmetric, deterministic in the seed.
SpectralField grf_sample(const GridPtr& g, double alpha, double tau,
                         uint64_t seed);

// Random-phase streamfunction with |psi_hat(k)|^2 ~ k^{-1}(tau^2+(k/k0)^4)^{-1}
// (k in integer-index units), returned as vorticity omega = -Laplace(psi),
// rescaled so the kinetic energy matches normalize_energy when positive.
SpectralField mcwilliams_sample(const GridPtr& g, int k0, double tau,
                                uint64_t seed, double normalize_energy = 1.0);

SpectralField sample_ic(const IcSpec& ic, const GridPtr& g);

// One input/output trajectory pair, stored as physical vorticity planes.
struct TrajectorySample {
  RVec input;    // [ell, n, n]
  RVec output;   // [n_t, n, n]
  RVec times_in, times_out;
  uint64_t seed = 0;
};

struct Dataset {
  int n = 0, ell = 0, n_t = 0;
  double L = 1.0, delta_t = 0.0, nu = 0.0;
  std::vector<TrajectorySample> samples;
};

// Samples the IC per trajectory (seed mixed with the trajectory index),
// burns in, records ell + n_t snapshots spaced delta_t, spectrally
// downsamples to n_down. Trajectories run on a small thread pool capped by
// SPECTRAL_REFINE_THREADS. A blown-up trajectory aborts with its seed named.
Dataset generate_dataset(const DatasetSpec& spec, const IcSpec& ic,
                         const SolverConfig& cfg);

// Taylor-Green datasets are built from the solver with kappa varying per
// trajectory: kappa = kappa_list[i].
Dataset generate_taylor_green_dataset(const DatasetSpec& spec,
                                      const std::vector<int>& kappa_list,
                                      const SolverConfig& cfg);

int worker_count();  // SPECTRAL_REFINE_THREADS cap (default: hardware)

}  // namespace specref
