// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "udc/nn/autodiff.hpp"

namespace udc::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list; moments live in the
/// parameters themselves so checkpoints can carry them.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  void zero_grad();
  void step();
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  long t_ = 0;
};

/// Half-cosine decay from lr0 at step 0 to lr_min at step total.
double cosine_lr(long step, long total, double lr0, double lr_min);

}  // namespace udc::nn
