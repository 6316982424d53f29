// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/losses.hpp"

#include "udc/error.hpp"

namespace udc {

using nn::Var;

Var lsgan_d_loss(const Var& d_real, const Var& d_fake) {
  if (!d_real->val.same_shape(d_fake->val))
    throw DimensionError("lsgan_d_loss: map shapes differ");
  Var real_term = affine(d_real, 1.0, -1.0);
  Var loss_real = mean_all(mul(real_term, real_term));
  Var loss_fake = mean_all(mul(d_fake, d_fake));
  return add(loss_real, loss_fake);
}

Var lsgan_g_loss(const Var& d_fake) {
  Var term = affine(d_fake, 1.0, -1.0);
  return mean_all(mul(term, term));
}

std::pair<Var, Var> adversarial_losses(const Var& d_real, const Var& d_fake) {
  return {lsgan_d_loss(d_real, d_fake), lsgan_g_loss(d_fake)};
}

Var supervised_loss(Restorer& restorer, const Var& generated, const Var& real_degraded) {
  if (!restorer.frozen())
    throw StateError("supervised_loss: restorer must be in frozen-norm mode");
  if (!generated->val.same_shape(real_degraded->val))
    throw DimensionError("supervised_loss: batch shapes differ");
  Var r_gen = restorer.forward(generated, nn::NormMode::frozen);
  Var r_real = restorer.forward(real_degraded, nn::NormMode::frozen);
  return mean_all(abs_val(sub(r_gen, r_real)));
}

Var total_generator_loss(const Var& loss_g_adv, const Var& loss_sup, double lambda) {
  if (lambda < 0.0) throw ConfigError("total_generator_loss: lambda must be >= 0");
  return add(loss_g_adv, affine(loss_sup, lambda, 0.0));
}

Var l1_loss(const Var& a, const Var& b) {
  if (!a->val.same_shape(b->val)) throw DimensionError("l1_loss: shapes differ");
  return mean_all(abs_val(sub(a, b)));
}

}  // namespace udc
