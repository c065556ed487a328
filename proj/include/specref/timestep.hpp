#pragma once

#include <optional>

#include "specref/imex.hpp"

namespace specref {

struct SolverConfig {
  Scheme scheme = Scheme::rk2_cn;
  Formulation form = Formulation::vs;
  double dt = 1e-3;
  double nu = 1e-3;
  double drag = 0.0;  // linear drag, treated implicitly with diffusion
  std::optional<SpectralField> forcing;  // curl of force (vs) or force (vp)

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SolverConfig: dt must be > 0");
    if (!(nu > 0.0)) throw std::invalid_argument("SolverConfig: nu must be > 0");
    if (drag < 0.0) throw std::invalid_argument("SolverConfig: drag must be >= 0");
  }
};

struct SolverState {
  double t = 0.0;
  SpectralField field;  // omega (vs) or u (vp)
};

// Advances one dt. Throws BlowUpError naming the time when the state turns
// non-finite or its norm grows by more than 1e6x within the step.
SolverState step(const SolverState& state, const SolverConfig& cfg);

// One step of size dt^gamma (gamma >= 2); the fine-step operator used by the
// fine-tuner. The tape-differentiable variant lives with the tape context.
SpectralField b_gamma(const SpectralField& f, int gamma, double dt,
                      const SolverConfig& cfg);

// (b_gamma(f) - f) / dt^gamma, a high-order estimate of the time derivative.
SpectralField dt_approx(const SpectralField& f, int gamma, double dt,
                        const SolverConfig& cfg);

// Marches to t_end, recording a snapshot every record_every steps (the
// initial state included). Snapshot times are uniform by construction.
SpectralTrajectory advance(const SolverState& state, const SolverConfig& cfg,
                           double t_end, int record_every);

// safety * dx / max|u|; +infinity when the field is at rest.
double cfl_dt(const SpectralField& u, const Grid& g, double safety);

}  // namespace specref
