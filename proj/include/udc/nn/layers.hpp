// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "udc/nn/autodiff.hpp"
#include "udc/rng.hpp"

namespace udc::nn {

/// Owns every parameter of a model. Names are unique, hierarchical,
/// dot-separated. Non-trainable entries hold normalization buffers.
class ParamRegistry {
 public:
  Parameter* create(const std::string& name, Tensor value, bool trainable = true);
  Parameter* find(const std::string& name) const;  // nullptr when missing
  std::vector<Parameter*> all() const;
  std::vector<Parameter*> trainable() const;
  size_t scalar_count() const;  // total trainable scalars

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
};

enum class Init { he_relu, zeros };

/// Square dense convolution with bias.
struct Conv2d {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch, int k,
         int stride, int pad, Init init, RngStream rng);

  Var operator()(const Var& x) const { return conv2d(x, leaf(w), leaf(b), stride, pad); }
  Tensor apply(const Tensor& x) const;  // grad-free convenience
  long long macs(int in_h, int in_w) const;
  int out_h(int in_h) const { return (in_h + 2 * pad - w->value.h) / stride + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pad - w->value.w) / stride + 1; }
};

/// Per-channel square convolution with bias, stride 1.
struct DepthwiseConv2d {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  int pad = 0;

  DepthwiseConv2d() = default;
  DepthwiseConv2d(ParamRegistry& reg, const std::string& name, int ch, int k, int pad,
                  Init init, RngStream rng);

  Var operator()(const Var& x) const { return depthwise_conv2d(x, leaf(w), leaf(b), pad); }
  long long macs(int in_h, int in_w) const;
};

/// Channel-wise batch normalization with running buffers.
struct BatchNorm2d {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  BnBuffers buffers;
  double momentum = 0.1, eps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(ParamRegistry& reg, const std::string& name, int ch, double momentum,
              double eps);

  Var operator()(const Var& x, NormMode mode) {
    return batch_norm(x, leaf(gamma), leaf(beta), buffers, mode, momentum, eps);
  }
};

/// Per-position channel normalization with per-channel affine.
struct LayerNormCh {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  double eps = 1e-5;

  LayerNormCh() = default;
  LayerNormCh(ParamRegistry& reg, const std::string& name, int ch, double eps);

  Var operator()(const Var& x) const { return layer_norm_ch(x, leaf(gamma), leaf(beta), eps); }
};

/// Grad-free forward evaluation of an expression builder.
Tensor eval_tensor(const std::function<Var()>& build);

}  // namespace udc::nn
