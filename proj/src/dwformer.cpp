// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/dwformer.hpp"

#include "udc/error.hpp"

namespace udc {

using nn::Conv2d;
using nn::DepthwiseConv2d;
using nn::Init;
using nn::NormMode;
using nn::Var;

void RestorerConfig::validate() const {
  for (int w : widths) {
    if (w < attn_reduction || w % attn_reduction != 0)
      throw ConfigError("stage widths must be positive multiples of the attention reduction");
  }
  for (int b : blocks) {
    if (b < 1) throw ConfigError("every stage needs at least one block");
  }
  if (widths[1] != widths[3] || widths[0] != widths[4])
    throw ConfigError("decoder widths must mirror encoder widths for additive skips");
  if (mlp_expansion < 1) throw ConfigError("mlp expansion must be >= 1");
}

AcaLayer::AcaLayer(nn::ParamRegistry& reg, const std::string& name, int ch, int reduction,
                   RngStream rng) {
  pos = Conv2d(reg, name + ".pos", ch, 1, 1, 1, 0, Init::he_relu, rng.substream("pos"));
  e1 = Conv2d(reg, name + ".e1", ch, ch / reduction, 1, 1, 0, Init::he_relu,
              rng.substream("e1"));
  e2 = Conv2d(reg, name + ".e2", ch / reduction, ch, 1, 1, 0, Init::he_relu,
              rng.substream("e2"));
}

Var AcaLayer::descriptor(const Var& f) const {
  return weighted_pool(softmax_spatial(pos(f)), f);
}

Var AcaLayer::operator()(const Var& f) const {
  Var gate = sigmoid(e2(relu(e1(descriptor(f)))));
  return mul_channel(f, gate);
}

SeLayer::SeLayer(nn::ParamRegistry& reg, const std::string& name, int ch, int reduction,
                 RngStream rng) {
  fc1 = Conv2d(reg, name + ".fc1", ch, ch / reduction, 1, 1, 0, Init::he_relu,
               rng.substream("fc1"));
  fc2 = Conv2d(reg, name + ".fc2", ch / reduction, ch, 1, 1, 0, Init::he_relu,
               rng.substream("fc2"));
}

Var SeLayer::operator()(const Var& f) const {
  Var gate = sigmoid(fc2(relu(fc1(global_avg_pool(f)))));
  return mul_channel(f, gate);
}

NormLayer::NormLayer(nn::ParamRegistry& reg, const std::string& name, int ch,
                     NormKind kind_, double momentum, double eps)
    : kind(kind_) {
  if (kind == NormKind::batch) {
    bn = nn::BatchNorm2d(reg, name, ch, momentum, eps);
  } else {
    ln = nn::LayerNormCh(reg, name, ch, eps);
  }
}

Var NormLayer::operator()(const Var& x, NormMode mode) {
  return kind == NormKind::batch ? bn(x, mode) : ln(x);
}

DwbLayer::DwbLayer(nn::ParamRegistry& reg, const std::string& name, int ch_,
                   const RestorerConfig& cfg, RngStream rng)
    : ch(ch_), attn_kind(cfg.attn) {
  norm1 = NormLayer(reg, name + ".norm1", ch, cfg.norm, cfg.bn_momentum, cfg.bn_eps);
  p1 = Conv2d(reg, name + ".p1", ch, ch, 1, 1, 0, Init::he_relu, rng.substream("p1"));
  dw = DepthwiseConv2d(reg, name + ".dw", ch, 3, 1, Init::he_relu, rng.substream("dw"));
  if (attn_kind == AttnKind::aca) {
    aca = AcaLayer(reg, name + ".attn", ch, cfg.attn_reduction, rng.substream("attn"));
  } else if (attn_kind == AttnKind::se) {
    se = SeLayer(reg, name + ".attn", ch, cfg.attn_reduction, rng.substream("attn"));
  }
  p2 = Conv2d(reg, name + ".p2", ch, ch, 1, 1, 0, Init::he_relu, rng.substream("p2"));
  norm2 = NormLayer(reg, name + ".norm2", ch, cfg.norm, cfg.bn_momentum, cfg.bn_eps);
  int hidden = ch * cfg.mlp_expansion;
  m1 = Conv2d(reg, name + ".m1", ch, hidden, 1, 1, 0, Init::he_relu, rng.substream("m1"));
  m2 = Conv2d(reg, name + ".m2", hidden, ch, 1, 1, 0, Init::he_relu, rng.substream("m2"));
}

Var DwbLayer::attention(const Var& f) const {
  switch (attn_kind) {
    case AttnKind::aca: return aca(f);
    case AttnKind::se: return se(f);
    case AttnKind::none: return f;
  }
  throw ConfigError("unknown attention kind");
}

Var DwbLayer::operator()(const Var& z, NormMode mode) {
  Var zh = add(p2(attention(relu(dw(p1(norm1(z, mode)))))), z);
  return add(m2(relu(m1(norm2(zh, mode)))), zh);
}

long long DwbLayer::macs(int h, int w) const {
  long long total = p1.macs(h, w) + dw.macs(h, w) + p2.macs(h, w) + m1.macs(h, w) +
                    m2.macs(h, w);
  if (attn_kind == AttnKind::aca) {
    total += aca.pos.macs(h, w) + aca.e1.macs(1, 1) + aca.e2.macs(1, 1);
  } else if (attn_kind == AttnKind::se) {
    total += se.fc1.macs(1, 1) + se.fc2.macs(1, 1);
  }
  return total;
}

Restorer::Restorer(const RestorerConfig& cfg, RngStream rng) : cfg_(cfg) {
  cfg_.validate();
  const auto& wd = cfg_.widths;
  stem_ = Conv2d(reg_, "stem", 3, wd[0], 3, 1, 1, Init::he_relu, rng.substream("stem"));
  down1_ = Conv2d(reg_, "down1", wd[0], wd[1], 3, 2, 1, Init::he_relu,
                  rng.substream("down1"));
  down2_ = Conv2d(reg_, "down2", wd[1], wd[2], 3, 2, 1, Init::he_relu,
                  rng.substream("down2"));
  up1_ = Conv2d(reg_, "up1", wd[2], wd[3] * 4, 1, 1, 0, Init::he_relu,
                rng.substream("up1"));
  up2_ = Conv2d(reg_, "up2", wd[3], wd[4] * 4, 1, 1, 0, Init::he_relu,
                rng.substream("up2"));
  head_ = Conv2d(reg_, "head", wd[4], 3, 3, 1, 1, Init::zeros, rng.substream("head"));
  for (int s = 0; s < 5; ++s) {
    RngStream srng = rng.substream("stage", static_cast<uint64_t>(s));
    stages_[s].reserve(cfg_.blocks[s]);
    for (int b = 0; b < cfg_.blocks[s]; ++b) {
      std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      stages_[s].emplace_back(reg_, name, wd[s], cfg_,
                              srng.substream("block", static_cast<uint64_t>(b)));
    }
  }
}

Var Restorer::trunk(const Var& y, NormMode mode) {
  if (y->val.c != 3) throw DimensionError("restorer input must have 3 channels");
  if (y->val.h % 4 != 0 || y->val.w % 4 != 0)
    throw DimensionError("restorer needs height and width divisible by 4");
  NormMode m = frozen_ ? NormMode::frozen : mode;

  Var f = stem_(y);
  for (auto& blk : stages_[0]) f = blk(f, m);
  Var s1 = f;
  f = down1_(f);
  for (auto& blk : stages_[1]) f = blk(f, m);
  Var s2 = f;
  f = down2_(f);
  for (auto& blk : stages_[2]) f = blk(f, m);
  f = add(pixel_shuffle(up1_(f), 2), s2);
  for (auto& blk : stages_[3]) f = blk(f, m);
  f = add(pixel_shuffle(up2_(f), 2), s1);
  for (auto& blk : stages_[4]) f = blk(f, m);
  return head_(f);
}

Var Restorer::forward(const Var& y, NormMode mode) { return add(y, trunk(y, mode)); }

Var Restorer::forward_residual(const Var& y, NormMode mode) { return trunk(y, mode); }

nn::Tensor Restorer::restore(const nn::Tensor& y, NormMode mode) {
  nn::NoGradGuard guard;
  return forward(nn::input(y), mode)->val;
}

void Restorer::freeze_bn() {
  if (!stats_ready()) throw StateError("freeze_bn: no batch statistics accumulated yet");
  frozen_ = true;
}

bool Restorer::stats_ready() const {
  for (const auto& stage : stages_) {
    for (const auto& blk : stage) {
      if (!blk.stats_ready()) return false;
    }
  }
  return true;
}

void Restorer::mark_stats_ready() {
  for (auto& stage : stages_) {
    for (auto& blk : stage) {
      if (blk.norm1.kind == NormKind::batch) blk.norm1.bn.buffers.ready = true;
      if (blk.norm2.kind == NormKind::batch) blk.norm2.bn.buffers.ready = true;
    }
  }
}

long long Restorer::count_macs(int h, int w) const {
  if (h % 4 != 0 || w % 4 != 0)
    throw DimensionError("count_macs needs height and width divisible by 4");
  long long total = stem_.macs(h, w);
  int h2 = h / 2, w2 = w / 2, h4 = h / 4, w4 = w / 4;
  for (const auto& blk : stages_[0]) total += blk.macs(h, w);
  total += down1_.macs(h, w);
  for (const auto& blk : stages_[1]) total += blk.macs(h2, w2);
  total += down2_.macs(h2, w2);
  for (const auto& blk : stages_[2]) total += blk.macs(h4, w4);
  total += up1_.macs(h4, w4);
  for (const auto& blk : stages_[3]) total += blk.macs(h2, w2);
  total += up2_.macs(h2, w2);
  for (const auto& blk : stages_[4]) total += blk.macs(h, w);
  total += head_.macs(h, w);
  return total;
}

}  // namespace udc
