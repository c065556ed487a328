#pragma once

#include <map>
#include <set>

#include "specref/autodiff.hpp"
#include "specref/imex.hpp"

namespace specref {

enum class Activation { gelu, linear };

// Trajectory-to-trajectory spatiotemporal Fourier operator. The input window
// (any ell >= 2 snapshots) is lifted onto d_v channels at d_t latent time
// steps; the backbone applies spatiotemporal spectral convolutions truncated
// at (tau_max, k_max); the projection reduces channels and applies a final
// full-spectrum spectral layer whose temporal basis is evaluated at
// arbitrary output times, plus a skip from the last input snapshot.
struct StfnoConfig {
  int layers = 2;
  int d_v = 8;
  int d_t = 10;
  int tau_max = 5;
  int k_max = 8;
  double t_pad = 0.2;  // temporal padding, fraction of the window
  bool helmholtz = true;
  Formulation form = Formulation::vs;
  Activation act = Activation::gelu;  // linear also turns layer-norm stats off
  int n_train = 64;
  double L = 1.0;
  uint64_t seed = 1;

  int channels_out() const { return form == Formulation::vp ? 2 : 1; }
  int pad_of(int steps) const {
    return static_cast<int>(std::lround(t_pad * steps));
  }
  int latent_pad() const { return pad_of(d_t); }

  void validate() const {
    if (layers < 1 || d_v < 1 || d_t < 2)
      throw std::invalid_argument("StfnoConfig: bad layers/d_v/d_t");
    if (tau_max < 1 || 2 * tau_max > d_t)
      throw std::invalid_argument("StfnoConfig: tau_max must satisfy 1 <= tau_max <= d_t/2");
    if (k_max < 1 || 2 * k_max > n_train)
      throw std::invalid_argument("StfnoConfig: k_max must satisfy 1 <= k_max <= n/2");
  }
};

struct StfnoModel {
  StfnoConfig cfg;
  std::vector<std::string> order;                // deterministic parameter order
  std::map<std::string, ad::CTensor> params;
  std::set<std::string> trainable;               // parameter groups receiving gradients

  ad::CTensor& at(const std::string& name) { return params.at(name); }
  const ad::CTensor& at(const std::string& name) const { return params.at(name); }
};

StfnoModel make_model(const StfnoConfig& cfg);
size_t param_count(const StfnoModel& m);

// Restricts gradients to the fine-tunable projection layer: the final
// spectral multiplier and its skip/bias, optionally the channel reduction.
void freeze_backbone(StfnoModel& m, bool include_reduction = false);
void unfreeze_all(StfnoModel& m);

// A model bound onto a tape: parameters become leaves (or constants when
// respect_freeze is set and the parameter is frozen).
struct BoundModel {
  ad::Tape* tape = nullptr;
  const StfnoModel* model = nullptr;
  std::map<std::string, int> ids;
  int id(const std::string& name) const { return ids.at(name); }
};
BoundModel bind(ad::Tape& tape, const StfnoModel& m, bool respect_freeze);

// Binds with externally created leaves for selected parameters (everything
// else becomes a constant); lets gradient checks own the leaf ids.
BoundModel bind_with(ad::Tape& tape, const StfnoModel& m,
                     const std::map<std::string, int>& provided);

// Lifting + backbone: physical input [1, ell, n, n] -> latent [d_v, d_t, n, n].
int latent_on_tape(BoundModel& b, const ad::CTensor& input, const GridPtr& g);

// Projection stage before temporal evaluation: latent (or a held-fixed latent
// constant) -> corrected spectrum [ch, L_p, n_out, n_out] in spatial modes
// and latent temporal frequencies.
int projection_spectrum_on_tape(BoundModel& b, int latent, const GridPtr& g_in,
                                int n_out);

// Evaluates the corrected spectrum at window-unit times (fractions of the
// output window) and adds the skip snapshot: returns the spectral output
// [ch, T, n_out, n_out] (spatial modes per time). The correction is gauged
// to vanish at gauge_time, anchoring the trajectory at the skip snapshot.
int eval_times_on_tape(BoundModel& b, int spectrum, const GridPtr& g_out,
                       const std::vector<double>& window_times,
                       const SpectralField& skip, double gauge_time = 0.0);

// Time derivative of the continuous-in-time output at the given window
// times, in physical seconds (window_seconds = n_t * delta_t). The constant
// skip snapshot differentiates away, so only the correction path remains.
int eval_deriv_on_tape(BoundModel& b, int spectrum, const GridPtr& g_out,
                       const std::vector<double>& window_times,
                       double window_seconds);

// Full forward on the tape; returns spectral output [ch, n_t_out, n, n].
int forward_on_tape(BoundModel& b, const ad::CTensor& input,
                    const SpectralField& u_last, const GridPtr& g_in,
                    int n_t_out, int n_out);

// Uniform output times (m+1)/n_t_out, m = 0..n_t_out-1.
std::vector<double> output_window_times(int n_t_out);

// Plain inference. Input planes are row-major [ell, n, n]; returns a
// trajectory with times t0 + (m+1)*delta_t_out.
SpectralTrajectory forward(const StfnoModel& m, const RVec& input, int ell,
                           int n, int n_t_out, int n_out, double t0,
                           double delta_t_out);

// Autoregressive roll-out baseline: repeatedly predict one step ahead and
// append it to the sliding input window.
SpectralTrajectory rollout_baseline(const StfnoModel& m, const RVec& input,
                                    int ell, int n, int k_steps, double t0,
                                    double delta_t);

}  // namespace specref
