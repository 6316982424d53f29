// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/discriminator.hpp"

#include "udc/error.hpp"

namespace udc {

using nn::Conv2d;
using nn::Init;
using nn::Var;

void DiscConfig::validate() const {
  for (int w : widths) {
    if (w < 4 || w % 4 != 0) throw ConfigError("discriminator widths must be multiples of 4");
  }
}

Discriminator::Discriminator(const DiscConfig& cfg, RngStream rng) : cfg_(cfg) {
  cfg_.validate();
  const auto [w0, w1, w2] = cfg_.widths;
  in_ = Conv2d(reg_, "in", 6, w0, 3, 1, 1, Init::he_relu, rng.substream("in"));
  d1_ = Conv2d(reg_, "d1", w0, w1, 3, 2, 1, Init::he_relu, rng.substream("d1"));
  d2_ = Conv2d(reg_, "d2", w1, w2, 3, 2, 1, Init::he_relu, rng.substream("d2"));
  d3_ = Conv2d(reg_, "d3", w2, w2, 3, 2, 1, Init::he_relu, rng.substream("d3"));
  mid_ = Conv2d(reg_, "mid", w2, w2, 3, 1, 1, Init::he_relu, rng.substream("mid"));
  u2_ = Conv2d(reg_, "u2", w2, w2 * 4, 1, 1, 0, Init::he_relu, rng.substream("u2"));
  c2_ = Conv2d(reg_, "c2", w2, w2, 3, 1, 1, Init::he_relu, rng.substream("c2"));
  u1_ = Conv2d(reg_, "u1", w2, w1 * 4, 1, 1, 0, Init::he_relu, rng.substream("u1"));
  c1_ = Conv2d(reg_, "c1", w1, w1, 3, 1, 1, Init::he_relu, rng.substream("c1"));
  u0_ = Conv2d(reg_, "u0", w1, w0 * 4, 1, 1, 0, Init::he_relu, rng.substream("u0"));
  c0_ = Conv2d(reg_, "c0", w0, w0, 3, 1, 1, Init::he_relu, rng.substream("c0"));
  out_ = Conv2d(reg_, "out", w0, 1, 1, 1, 0, Init::he_relu, rng.substream("out"));
}

Var Discriminator::forward(const Var& clean, const Var& degraded) const {
  if (!clean->val.same_shape(degraded->val))
    throw DimensionError("discriminator inputs must share shape");
  if (clean->val.c != 3) throw DimensionError("discriminator inputs must have 3 channels");
  if (clean->val.h % 8 != 0 || clean->val.w % 8 != 0)
    throw DimensionError("discriminator needs height and width divisible by 8");

  Var x = concat_channels(clean, degraded);
  Var e0 = relu(in_(x));
  Var e1 = relu(d1_(e0));
  Var e2 = relu(d2_(e1));
  Var e3 = relu(d3_(e2));
  Var b = relu(mid_(e3));
  Var y2 = relu(c2_(add(pixel_shuffle(u2_(b), 2), e2)));
  Var y1 = relu(c1_(add(pixel_shuffle(u1_(y2), 2), e1)));
  Var y0 = relu(c0_(add(pixel_shuffle(u0_(y1), 2), e0)));
  return sigmoid(out_(y0));
}

nn::Tensor Discriminator::score(const nn::Tensor& clean, const nn::Tensor& degraded) const {
  nn::NoGradGuard guard;
  return forward(nn::input(clean), nn::input(degraded))->val;
}

}  // namespace udc
