#pragma once

#include "specref/datagen.hpp"
#include "specref/optimizer.hpp"
#include "specref/residual.hpp"
#include "specref/stfno.hpp"

namespace specref {

enum class LossKind { l2, h_neg1 };

struct TrainConfig {
  int epochs = 10;
  double lr = 1e-3;
  int batch = 4;
  LossKind loss = LossKind::l2;
  bool one_cycle = true;
  double weight_decay = 0.0;
  double alpha = 0.0;  // negative-norm regularization for the h_neg1 loss
  uint64_t shuffle_seed = 7;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean relative loss per epoch
  double slope_gap = 0.0;  // enstrophy-slope gap diagnostic, prediction vs data
};

// Minibatch Adam(W) on the relative trajectory loss over the training split
// (the first n_train samples of the dataset). Aborts on a non-finite loss,
// naming the batch.
TrainResult train(StfnoModel& m, const Dataset& data, int n_train,
                  const TrainConfig& cfg);

enum class FinetuneMode { parallel, guaranteed };

struct FinetuneConfig {
  int iters = 100;
  double lr = 1e-1;
  int gamma = 2;
  LossKind loss = LossKind::h_neg1;
  double alpha = 0.0;
  FinetuneMode mode = FinetuneMode::parallel;
  double tol = 1e-3;    // guaranteed mode: per-step target
  int iter_max = 100;   // guaranteed mode: optimizer cap per step
  bool include_reduction = false;
  double nu = 1e-3;
  double drag = 0.0;
  Scheme scheme = Scheme::imex_rk4;  // fine-step operator
  double delta_t = 0.05;             // coarse step entering dt^gamma
  const SpectralField* forcing = nullptr;
  // Ridge on the correction spectrum. Temporal modes whose derivative is
  // invisible at the collocation times carry zero loss gradient; the ridge
  // pins them at zero without biasing the constrained directions.
  double ridge = 1e-7;

  void validate() const {
    if (iters < 0) throw std::invalid_argument("FinetuneConfig: iters >= 0");
    if (gamma < 2) throw std::invalid_argument("FinetuneConfig: gamma >= 2");
    if (mode == FinetuneMode::guaranteed && !(tol > 0.0))
      throw std::invalid_argument("FinetuneConfig: tol must be positive");
  }
};

struct FinetuneResult {
  SpectralTrajectory traj;          // corrected output snapshots
  std::vector<double> eta_history;  // estimator per iteration (parallel mode)
  RVec final_eta;                   // per-step eta_m of the result
  std::vector<int> capped_steps;    // guaranteed mode: steps that hit iter_max
};

// Algorithm: freeze the backbone, extract the latent fields once and hold
// them fixed, then iterate { fine-step time derivative, eta^2 loss, Adam on
// the final spectral layer, re-project }. All math is in 64-bit.
FinetuneResult finetune_parallel(StfnoModel& m, const RVec& input, int ell,
                                 int n, int n_t_out, const FinetuneConfig& cfg);

// Sequential variant: per output step, optimize until eta_m <= tol (capped at
// iter_max); the skip snapshot chains through the previous corrected step.
FinetuneResult finetune_guaranteed(StfnoModel& m, const RVec& input, int ell,
                                   int n, int n_t_out, const FinetuneConfig& cfg);

// Builds the fine-tuning loss on the given tape with the trainable parameter
// leaves supplied in `provided` (ordered as in trainable_names). Used by the
// iteration loop and by gradient checks, so both see the identical graph.
std::vector<std::string> trainable_names(const StfnoModel& m);
// prior_snapshots[j] is the input snapshot j+1 steps before the window start
// (known data at the pre-window pad times); matching the continuous
// representation against them anchors the correction through the pad region.
int build_finetune_loss(ad::Tape& tape, const StfnoModel& m,
                        const std::vector<int>& provided_leaf_ids,
                        const ad::CTensor& latent, const SpectralField& u_last,
                        int n_t_out, const FinetuneConfig& cfg,
                        const GridPtr& g,
                        const std::vector<SpectralField>& prior_snapshots = {},
                        std::vector<double>* eta_per_step = nullptr);

// Latent fields of the frozen backbone for one input window.
ad::CTensor extract_latent(const StfnoModel& m, const RVec& input, int ell,
                           const GridPtr& g);

struct EvalMetrics {
  double rel_l2_final = 0.0;        // relative L2 error at the final step
  double res_neg_final_a0 = 0.0;    // ||R||_{-1,n} at final step, alpha = 0
  double res_neg_final_a1 = 0.0;    // same with alpha = 1
  double bochner_rel_l2 = 0.0;      // relative L2(T; L2) error over the window
  double slope_pred = 0.0, slope_ref = 0.0;  // enstrophy-spectrum diagnostics
};

// Table-style evaluation of a predicted trajectory against a reference.
// Residual time derivatives use centered differences of adjacent snapshots.
EvalMetrics evaluate(const SpectralTrajectory& pred,
                     const SpectralTrajectory& ref, const EstimatorConfig& cfg);

std::vector<SpectralField> centered_differences(const SpectralTrajectory& traj);

}  // namespace specref
