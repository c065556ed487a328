#pragma once

#include <map>
#include <string>

#include "specref/autodiff.hpp"

namespace specref {

// Adam/AdamW over named complex tensors; real and imaginary parts are
// independent coordinates. Optional one-cycle schedule: linear warmup over
// the first warmup fraction, cosine anneal to floor_frac * lr afterwards.
struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool one_cycle = false;
  double warmup_frac = 0.2;
  double floor_frac = 1e-3;
  int total_steps = 0;  // required when one_cycle is set
};

class Adam {
 public:
  explicit Adam(OptimizerConfig cfg) : cfg_(cfg) {}

  double current_lr() const;
  int step_count() const { return t_; }

  // Applies one update to every entry of `grads` found in `params`.
  void step(std::map<std::string, ad::CTensor>& params,
            const std::map<std::string, ad::CTensor>& grads);

 private:
  OptimizerConfig cfg_;
  int t_ = 0;
  std::map<std::string, ad::CTensor> m_, v_;
};

}  // namespace specref
