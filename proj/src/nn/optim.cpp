// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/nn/optim.hpp"

#include <cmath>
#include <numbers>

#include "udc/error.hpp"

namespace udc::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (Parameter* p : params_) {
    if (!p->trainable) throw ConfigError("Adam: non-trainable parameter in list");
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter* p : params_) {
    if (p->grad.size() != p->value.size()) p->zero_grad();
    if (p->m.size() != p->value.size()) {
      p->m = Tensor(p->value.n, p->value.c, p->value.h, p->value.w);
      p->v = Tensor(p->value.n, p->value.c, p->value.h, p->value.w);
    }
    for (size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad.data[i];
      p->m.data[i] = cfg_.beta1 * p->m.data[i] + (1.0 - cfg_.beta1) * g;
      p->v.data[i] = cfg_.beta2 * p->v.data[i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = p->m.data[i] / bc1;
      double vhat = p->v.data[i] / bc2;
      p->value.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double cosine_lr(long step, long total, double lr0, double lr_min) {
  if (total < 1) throw RangeError("cosine_lr: total must be >= 1");
  if (step < 0 || step > total) throw RangeError("cosine_lr: step outside [0, total]");
  double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

}  // namespace udc::nn
