// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "udc/dwformer.hpp"
#include "udc/nn/autodiff.hpp"

namespace udc {

/// Least-squares realness losses over per-pixel probability maps.
/// loss_d = mean((d_real - 1)^2) + mean(d_fake^2), loss_g = mean((d_fake - 1)^2).
nn::Var lsgan_d_loss(const nn::Var& d_real, const nn::Var& d_fake);
nn::Var lsgan_g_loss(const nn::Var& d_fake);
std::pair<nn::Var, nn::Var> adversarial_losses(const nn::Var& d_real, const nn::Var& d_fake);

/// Mean absolute difference between the frozen restorer's outputs on the
/// generated and the reference degraded batch. StateError unless frozen.
nn::Var supervised_loss(Restorer& restorer, const nn::Var& generated,
                        const nn::Var& real_degraded);

/// adv + lambda * sup; lambda must be >= 0.
nn::Var total_generator_loss(const nn::Var& loss_g_adv, const nn::Var& loss_sup,
                             double lambda);

/// Mean absolute error; the restorer training objective.
nn::Var l1_loss(const nn::Var& a, const nn::Var& b);

}  // namespace udc
