// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/nn/layers.hpp"

#include <cmath>

#include "udc/error.hpp"

namespace udc::nn {

Parameter* ParamRegistry::create(const std::string& name, Tensor value, bool trainable) {
  if (find(name)) throw StateError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(value);
  p->trainable = trainable;
  items_.push_back(std::move(p));
  return items_.back().get();
}

Parameter* ParamRegistry::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::vector<Parameter*> ParamRegistry::all() const {
  std::vector<Parameter*> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParamRegistry::trainable() const {
  std::vector<Parameter*> out;
  for (const auto& p : items_) {
    if (p->trainable) out.push_back(p.get());
  }
  return out;
}

size_t ParamRegistry::scalar_count() const {
  size_t n = 0;
  for (const auto& p : items_) {
    if (p->trainable) n += p->value.size();
  }
  return n;
}

namespace {

Tensor init_weight(int out_ch, int in_ch_per_group, int k, Init init, RngStream& rng) {
  Tensor w(out_ch, in_ch_per_group, k, k);
  if (init == Init::he_relu) {
    double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch_per_group) * k * k));
    for (double& v : w.data) v = stddev * rng.normal();
  }
  return w;
}

}  // namespace

Conv2d::Conv2d(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch, int k,
               int stride_, int pad_, Init init, RngStream rng)
    : stride(stride_), pad(pad_) {
  w = reg.create(name + ".w", init_weight(out_ch, in_ch, k, init, rng));
  b = reg.create(name + ".b", Tensor(1, out_ch, 1, 1));
}

Tensor Conv2d::apply(const Tensor& x) const {
  NoGradGuard guard;
  return conv2d(input(x), leaf(w), leaf(b), stride, pad)->val;
}

long long Conv2d::macs(int in_h, int in_w) const {
  long long oh = out_h(in_h), ow = out_w(in_w);
  return oh * ow * static_cast<long long>(w->value.n) * w->value.c * w->value.h *
         w->value.w;
}

DepthwiseConv2d::DepthwiseConv2d(ParamRegistry& reg, const std::string& name, int ch,
                                 int k, int pad_, Init init, RngStream rng)
    : pad(pad_) {
  w = reg.create(name + ".w", init_weight(ch, 1, k, init, rng));
  b = reg.create(name + ".b", Tensor(1, ch, 1, 1));
}

long long DepthwiseConv2d::macs(int in_h, int in_w) const {
  long long oh = in_h + 2 * pad - w->value.h + 1;
  long long ow = in_w + 2 * pad - w->value.w + 1;
  return oh * ow * static_cast<long long>(w->value.n) * w->value.h * w->value.w;
}

BatchNorm2d::BatchNorm2d(ParamRegistry& reg, const std::string& name, int ch,
                         double momentum_, double eps_)
    : momentum(momentum_), eps(eps_) {
  gamma = reg.create(name + ".gamma", Tensor::full(1, ch, 1, 1, 1.0));
  beta = reg.create(name + ".beta", Tensor(1, ch, 1, 1));
  buffers.running_mean = reg.create(name + ".running_mean", Tensor(1, ch, 1, 1), false);
  buffers.running_var =
      reg.create(name + ".running_var", Tensor::full(1, ch, 1, 1, 1.0), false);
}

LayerNormCh::LayerNormCh(ParamRegistry& reg, const std::string& name, int ch, double eps_)
    : eps(eps_) {
  gamma = reg.create(name + ".gamma", Tensor::full(1, ch, 1, 1, 1.0));
  beta = reg.create(name + ".beta", Tensor(1, ch, 1, 1));
}

Tensor eval_tensor(const std::function<Var()>& build) {
  NoGradGuard guard;
  return build()->val;
}

}  // namespace udc::nn
