// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>

#include "udc/nn/layers.hpp"
#include "udc/rng.hpp"

namespace udc {

struct DiscConfig {
  std::array<int, 3> widths{32, 64, 128};

  void validate() const;
};

/// Pixel-wise realness scorer. Takes a clean image and a degraded candidate,
/// concatenated in that channel order, and emits one probability per pixel.
class Discriminator {
 public:
  Discriminator(const DiscConfig& cfg, RngStream rng);

  /// Inputs (N,3,H,W) each, H and W divisible by 8; output (N,1,H,W) in (0,1).
  nn::Var forward(const nn::Var& clean, const nn::Var& degraded) const;
  nn::Tensor score(const nn::Tensor& clean, const nn::Tensor& degraded) const;

  const DiscConfig& config() const { return cfg_; }
  nn::ParamRegistry& params() { return reg_; }
  const nn::ParamRegistry& params() const { return reg_; }

 private:
  DiscConfig cfg_;
  nn::ParamRegistry reg_;
  nn::Conv2d in_, d1_, d2_, d3_, mid_;
  nn::Conv2d u2_, c2_, u1_, c1_, u0_, c0_, out_;
};

}  // namespace udc
