// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "udc/nn/layers.hpp"
#include "udc/rng.hpp"
#include "udc/sgm.hpp"

namespace udc {

/// Degradation generator architecture knobs. Branch toggles zero out the
/// matching noise contribution while leaving every parameter in place. The
/// *_fixed switches replace a learned stage with the closed-form counterpart
/// from `sgm` (no parameters registered for that stage).
struct GenConfig {
  int bright_width = 16;  // feature width of the gate extractor
  int bright_up = 4;      // channel-up ratio of the gate bottleneck
  int blur_width = 32;
  int noise_width = 32;   // d, the noise feature dimension
  bool use_ni = true;
  bool use_nd = true;
  bool use_nq = true;
  bool bright_fixed = false;
  bool blur_fixed = false;
  bool noise_fixed = false;
  SgmConfig sgm;  // consulted only by fixed stages

  void validate() const;
  bool any_fixed() const { return bright_fixed || blur_fixed || noise_fixed; }
};

/// Stochastic inputs of one generator forward: two standard-normal fields and
/// one symmetric-uniform field, each (N, d, H, W). The learned noise stage
/// consumes exactly the substreams "ns1", "ns2", "u"; a closed-form noise
/// stage instead consumes "z", a (N, 3, H, W) standard-normal field.
struct GenSample {
  nn::Tensor ns1, ns2, u;
  nn::Tensor z;

  static GenSample draw(int n, int d, int h, int w, RngStream& rng,
                        bool with_color_noise = false);
  static GenSample zero(int n, int d, int h, int w);
};

/// Per-channel gate: x scaled by sigmoid(bottleneck(pooled features)).
struct BrightnessModule {
  nn::Conv2d fe1, fe2;  // 3x3 feature extractor
  nn::Conv2d up, down;  // pixel-wise bottleneck, down projects to 3

  BrightnessModule() = default;
  BrightnessModule(nn::ParamRegistry& reg, const std::string& name, const GenConfig& cfg,
                   RngStream rng);

  nn::Var gate(const nn::Var& x) const;  // (N,3,1,1), entries in (0,1)
  nn::Var operator()(const nn::Var& x) const;
  nn::Tensor gate_values(const nn::Tensor& x) const;
};

struct ResBlock {
  nn::Conv2d c1, c2;

  ResBlock() = default;
  ResBlock(nn::ParamRegistry& reg, const std::string& name, int ch, RngStream rng);
  nn::Var operator()(const nn::Var& x) const;
};

/// Two-scale encoder-decoder whose output is added back to the input. The
/// final projection starts at zero, so a fresh module is the identity.
struct BlurModule {
  nn::Conv2d down1, down2;
  ResBlock r1a, r1b, r2a, r2b;
  nn::Conv2d up1, up2;  // each followed by pixel_shuffle(2)
  nn::Conv2d out;       // zero-init

  BlurModule() = default;
  BlurModule(nn::ParamRegistry& reg, const std::string& name, const GenConfig& cfg,
             RngStream rng);

  nn::Var residual(const nn::Var& x) const;
  nn::Var operator()(const nn::Var& x) const;
};

/// Pixel-wise, 3x3, pixel-wise bottleneck with a skip connection.
struct ResidualTransform {
  nn::Conv2d p1, c3, p2;

  ResidualTransform() = default;
  ResidualTransform(nn::ParamRegistry& reg, const std::string& name, int ch,
                    RngStream rng);
  nn::Var operator()(const nn::Var& x) const;
  nn::Tensor apply(const nn::Tensor& x) const;
};

/// Signal-dependent noise synthesis: an unconditioned component, a
/// reparameterized component with encoded mean/scale, and a quantization-style
/// component with encoded half-width, projected to color and added.
struct NoiseModule {
  int d = 32;
  ResidualTransform r1, r2, r3;
  nn::Conv2d enc_ms1, enc_ms2;  // x_blur -> (mu, pre-sigma), 2d channels
  nn::Conv2d enc_q1, enc_q2;    // x_noisy -> pre-q, d channels
  nn::Conv2d proj_m;            // d -> 3, zero-init
  nn::Conv2d proj_q;            // d -> 3, zero-init

  NoiseModule() = default;
  NoiseModule(nn::ParamRegistry& reg, const std::string& name, const GenConfig& cfg,
              RngStream rng);

  nn::Var operator()(const nn::Var& x_blur, const GenSample& s, const GenConfig& cfg) const;

  // Grad-free pieces for probes and recomposition checks.
  void encode_ms(const nn::Tensor& x_blur, nn::Tensor* mu, nn::Tensor* sigma) const;
  nn::Tensor encode_q(const nn::Tensor& x_noisy) const;
  nn::Tensor apply_r1(const nn::Tensor& x) const { return r1.apply(x); }
  nn::Tensor apply_r2(const nn::Tensor& x) const { return r2.apply(x); }
  nn::Tensor apply_r3(const nn::Tensor& x) const { return r3.apply(x); }
  nn::Tensor apply_proj_m(const nn::Tensor& x) const { return proj_m.apply(x); }
  nn::Tensor apply_proj_q(const nn::Tensor& x) const { return proj_q.apply(x); }
};

/// Intermediate captures of one deterministic-given-sample forward.
struct GenTrace {
  nn::Tensor gate;             // (N,3,1,1)
  nn::Tensor x_dark, x_blur;
  nn::Tensor n_i, n_d, mix;    // mix already projected to color space
  nn::Tensor x_noisy, q, n_q, quant;
  nn::Tensor x_final;
};

/// Cascade brightness -> blur -> noise. Heights and widths must be divisible
/// by 4. Values are left unclamped; clamping happens at serialization only.
/// Any stage can be swapped for its closed-form counterpart via the config,
/// in which case nothing is registered for it and the fixed math runs instead.
class Generator {
 public:
  Generator(const GenConfig& cfg, RngStream rng);

  nn::Var forward(const nn::Var& x, const GenSample& s) const;

  nn::Tensor generate(const nn::Tensor& x, RngStream& rng) const;
  nn::Tensor generate(const nn::Tensor& x, const GenSample& s) const;
  GenTrace trace(const nn::Tensor& x, const GenSample& s) const;

  GenSample draw_sample(int n, int h, int w, RngStream& rng) const {
    return GenSample::draw(n, cfg_.noise_width, h, w, rng, cfg_.noise_fixed);
  }

  const GenConfig& config() const { return cfg_; }
  GenConfig& config() { return cfg_; }
  nn::ParamRegistry& params() { return reg_; }
  const nn::ParamRegistry& params() const { return reg_; }

  BrightnessModule& brightness() { return brightness_; }
  const BrightnessModule& brightness() const { return brightness_; }
  BlurModule& blur() { return blur_; }
  const BlurModule& blur() const { return blur_; }
  NoiseModule& noise() { return noise_; }
  const NoiseModule& noise() const { return noise_; }

 private:
  nn::Var stage_brightness(const nn::Var& x) const;
  nn::Var stage_blur(const nn::Var& x) const;
  nn::Var stage_noise(const nn::Var& x, const GenSample& s) const;

  GenConfig cfg_;
  nn::ParamRegistry reg_;
  BrightnessModule brightness_;
  BlurModule blur_;
  NoiseModule noise_;
  nn::Tensor blur_kernel_;  // (3,1,K,K) psf for the fixed blur path
};

}  // namespace udc
