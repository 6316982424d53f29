// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "udc/nn/layers.hpp"
#include "udc/rng.hpp"

namespace udc {

enum class AttnKind { aca, se, none };
enum class NormKind { batch, layer };

struct RestorerConfig {
  std::array<int, 5> widths{32, 64, 112, 64, 32};
  std::array<int, 5> blocks{8, 8, 8, 6, 6};
  int mlp_expansion = 2;
  int attn_reduction = 4;
  AttnKind attn = AttnKind::aca;
  NormKind norm = NormKind::batch;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  void validate() const;
};

/// Channel attention driven by a softmax-pooled global descriptor: a 1-channel
/// position projection is softmaxed over all locations, features are pooled
/// with those weights, and a bottleneck excitation gates each channel.
struct AcaLayer {
  nn::Conv2d pos, e1, e2;

  AcaLayer() = default;
  AcaLayer(nn::ParamRegistry& reg, const std::string& name, int ch, int reduction,
           RngStream rng);

  nn::Var descriptor(const nn::Var& f) const;  // (N,C,1,1)
  nn::Var operator()(const nn::Var& f) const;
};

/// Mean-pooled squeeze-and-excitation gate, the drop-in attention alternative.
struct SeLayer {
  nn::Conv2d fc1, fc2;

  SeLayer() = default;
  SeLayer(nn::ParamRegistry& reg, const std::string& name, int ch, int reduction,
          RngStream rng);

  nn::Var operator()(const nn::Var& f) const;
};

/// Either batch normalization with running buffers or per-position channel
/// normalization, selected per model.
struct NormLayer {
  NormKind kind = NormKind::batch;
  nn::BatchNorm2d bn;
  nn::LayerNormCh ln;

  NormLayer() = default;
  NormLayer(nn::ParamRegistry& reg, const std::string& name, int ch, NormKind kind,
            double momentum, double eps);

  nn::Var operator()(const nn::Var& x, nn::NormMode mode);
  bool stats_ready() const { return kind != NormKind::batch || bn.buffers.ready; }
};

/// Two-branch block: normalized pixel-wise/depth-wise/attention transform with
/// a skip, then a normalized two-layer pixel-wise MLP with a skip.
struct DwbLayer {
  int ch = 0;
  AttnKind attn_kind = AttnKind::aca;
  NormLayer norm1, norm2;
  nn::Conv2d p1, p2;
  nn::DepthwiseConv2d dw;
  AcaLayer aca;
  SeLayer se;
  nn::Conv2d m1, m2;

  DwbLayer() = default;
  DwbLayer(nn::ParamRegistry& reg, const std::string& name, int ch,
           const RestorerConfig& cfg, RngStream rng);

  nn::Var attention(const nn::Var& f) const;
  nn::Var operator()(const nn::Var& z, nn::NormMode mode);
  bool stats_ready() const { return norm1.stats_ready() && norm2.stats_ready(); }

  long long macs(int h, int w) const;
};

/// U-shaped residual restorer: stem, two downsampled encoder stages, a
/// bottleneck stage, two upsampled decoder stages with additive skips, and a
/// zero-initialized head added back onto the input.
class Restorer {
 public:
  Restorer(const RestorerConfig& cfg, RngStream rng);

  /// y (N,3,H,W), H and W divisible by 4. After freeze_bn() the mode argument
  /// is overridden to frozen.
  nn::Var forward(const nn::Var& y, nn::NormMode mode);
  /// Residual actually added to y in the same pass (head output).
  nn::Var forward_residual(const nn::Var& y, nn::NormMode mode);

  nn::Tensor restore(const nn::Tensor& y, nn::NormMode mode);

  /// Locks every norm layer to its accumulated statistics. Idempotent;
  /// StateError if batch statistics were never recorded.
  void freeze_bn();
  bool frozen() const { return frozen_; }
  bool stats_ready() const;
  /// Marks loaded running statistics as usable (checkpoint restore).
  void mark_stats_ready();

  size_t count_params() const { return reg_.scalar_count(); }
  long long count_macs(int h, int w) const;

  const RestorerConfig& config() const { return cfg_; }
  nn::ParamRegistry& params() { return reg_; }
  const nn::ParamRegistry& params() const { return reg_; }
  std::vector<DwbLayer>& stage(int i) { return stages_[i]; }
  nn::Conv2d& head() { return head_; }

 private:
  nn::Var trunk(const nn::Var& y, nn::NormMode mode);  // head output

  RestorerConfig cfg_;
  nn::ParamRegistry reg_;
  nn::Conv2d stem_, down1_, down2_, up1_, up2_, head_;
  std::array<std::vector<DwbLayer>, 5> stages_;
  bool frozen_ = false;
};

}  // namespace udc
