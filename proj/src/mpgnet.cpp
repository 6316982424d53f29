// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/mpgnet.hpp"

#include <utility>

#include "udc/error.hpp"

namespace udc {

using nn::Conv2d;
using nn::Init;
using nn::Tensor;
using nn::Var;

void GenConfig::validate() const {
  if (bright_width < 1 || bright_up < 1 || blur_width < 1 || noise_width < 1)
    throw ConfigError("generator widths must be >= 1");
  if (any_fixed()) sgm.validate();
}

GenSample GenSample::draw(int n, int d, int h, int w, RngStream& rng,
                          bool with_color_noise) {
  GenSample s;
  if (with_color_noise) {
    RngStream rz = rng.substream("z");
    s.z = Tensor::randn(n, 3, h, w, rz);
    return s;
  }
  RngStream r1 = rng.substream("ns1");
  RngStream r2 = rng.substream("ns2");
  RngStream r3 = rng.substream("u");
  s.ns1 = Tensor::randn(n, d, h, w, r1);
  s.ns2 = Tensor::randn(n, d, h, w, r2);
  s.u = Tensor::uniform_sym(n, d, h, w, r3);
  return s;
}

GenSample GenSample::zero(int n, int d, int h, int w) {
  GenSample s;
  s.ns1 = Tensor(n, d, h, w);
  s.ns2 = Tensor(n, d, h, w);
  s.u = Tensor(n, d, h, w);
  return s;
}

BrightnessModule::BrightnessModule(nn::ParamRegistry& reg, const std::string& name,
                                   const GenConfig& cfg, RngStream rng) {
  int wdt = cfg.bright_width;
  fe1 = Conv2d(reg, name + ".fe1", 3, wdt, 3, 1, 1, Init::he_relu, rng.substream("fe1"));
  fe2 = Conv2d(reg, name + ".fe2", wdt, wdt, 3, 1, 1, Init::he_relu, rng.substream("fe2"));
  up = Conv2d(reg, name + ".up", wdt, wdt * cfg.bright_up, 1, 1, 0, Init::he_relu,
              rng.substream("up"));
  down = Conv2d(reg, name + ".down", wdt * cfg.bright_up, 3, 1, 1, 0, Init::he_relu,
                rng.substream("down"));
}

Var BrightnessModule::gate(const Var& x) const {
  Var f = relu(fe2(relu(fe1(x))));
  Var pooled = global_avg_pool(f);
  return sigmoid(down(relu(up(pooled))));
}

Var BrightnessModule::operator()(const Var& x) const { return mul_channel(x, gate(x)); }

Tensor BrightnessModule::gate_values(const Tensor& x) const {
  nn::NoGradGuard guard;
  return gate(nn::input(x))->val;
}

ResBlock::ResBlock(nn::ParamRegistry& reg, const std::string& name, int ch, RngStream rng) {
  c1 = Conv2d(reg, name + ".c1", ch, ch, 3, 1, 1, Init::he_relu, rng.substream("c1"));
  c2 = Conv2d(reg, name + ".c2", ch, ch, 3, 1, 1, Init::he_relu, rng.substream("c2"));
}

Var ResBlock::operator()(const Var& x) const { return add(x, c2(relu(c1(x)))); }

BlurModule::BlurModule(nn::ParamRegistry& reg, const std::string& name,
                       const GenConfig& cfg, RngStream rng) {
  int wdt = cfg.blur_width;
  down1 = Conv2d(reg, name + ".down1", 3, wdt, 3, 2, 1, Init::he_relu, rng.substream("down1"));
  r1a = ResBlock(reg, name + ".r1a", wdt, rng.substream("r1a"));
  r1b = ResBlock(reg, name + ".r1b", wdt, rng.substream("r1b"));
  down2 = Conv2d(reg, name + ".down2", wdt, wdt, 3, 2, 1, Init::he_relu,
                 rng.substream("down2"));
  r2a = ResBlock(reg, name + ".r2a", wdt, rng.substream("r2a"));
  r2b = ResBlock(reg, name + ".r2b", wdt, rng.substream("r2b"));
  up1 = Conv2d(reg, name + ".up1", wdt, wdt * 4, 3, 1, 1, Init::he_relu,
               rng.substream("up1"));
  up2 = Conv2d(reg, name + ".up2", wdt, wdt * 4, 3, 1, 1, Init::he_relu,
               rng.substream("up2"));
  out = Conv2d(reg, name + ".out", wdt, 3, 3, 1, 1, Init::zeros, rng.substream("out"));
}

Var BlurModule::residual(const Var& x) const {
  if (x->val.h % 4 != 0 || x->val.w % 4 != 0)
    throw DimensionError("blur stage needs height and width divisible by 4");
  Var e1 = relu(down1(x));
  e1 = r1b(r1a(e1));
  Var e2 = relu(down2(e1));
  e2 = r2b(r2a(e2));
  Var d1 = relu(pixel_shuffle(up1(e2), 2));
  Var d0 = relu(pixel_shuffle(up2(d1), 2));
  return out(d0);
}

Var BlurModule::operator()(const Var& x) const { return add(residual(x), x); }

ResidualTransform::ResidualTransform(nn::ParamRegistry& reg, const std::string& name,
                                     int ch, RngStream rng) {
  p1 = Conv2d(reg, name + ".p1", ch, ch, 1, 1, 0, Init::he_relu, rng.substream("p1"));
  c3 = Conv2d(reg, name + ".c3", ch, ch, 3, 1, 1, Init::he_relu, rng.substream("c3"));
  p2 = Conv2d(reg, name + ".p2", ch, ch, 1, 1, 0, Init::he_relu, rng.substream("p2"));
}

Var ResidualTransform::operator()(const Var& x) const {
  return add(x, p2(relu(c3(relu(p1(x))))));
}

Tensor ResidualTransform::apply(const Tensor& x) const {
  nn::NoGradGuard guard;
  return (*this)(nn::input(x))->val;
}

NoiseModule::NoiseModule(nn::ParamRegistry& reg, const std::string& name,
                         const GenConfig& cfg, RngStream rng)
    : d(cfg.noise_width) {
  r1 = ResidualTransform(reg, name + ".r1", d, rng.substream("r1"));
  r2 = ResidualTransform(reg, name + ".r2", d, rng.substream("r2"));
  r3 = ResidualTransform(reg, name + ".r3", d, rng.substream("r3"));
  enc_ms1 = Conv2d(reg, name + ".enc_ms1", 3, d, 3, 1, 1, Init::he_relu,
                   rng.substream("enc_ms1"));
  enc_ms2 = Conv2d(reg, name + ".enc_ms2", d, 2 * d, 1, 1, 0, Init::he_relu,
                   rng.substream("enc_ms2"));
  enc_q1 = Conv2d(reg, name + ".enc_q1", 3, d, 3, 1, 1, Init::he_relu,
                  rng.substream("enc_q1"));
  enc_q2 = Conv2d(reg, name + ".enc_q2", d, d, 1, 1, 0, Init::he_relu,
                  rng.substream("enc_q2"));
  proj_m = Conv2d(reg, name + ".proj_m", d, 3, 1, 1, 0, Init::zeros,
                  rng.substream("proj_m"));
  proj_q = Conv2d(reg, name + ".proj_q", d, 3, 1, 1, 0, Init::zeros,
                  rng.substream("proj_q"));
}

Var NoiseModule::operator()(const Var& x_blur, const GenSample& s,
                            const GenConfig& cfg) const {
  const Tensor& xb = x_blur->val;
  if (s.ns1.n != xb.n || s.ns1.c != d || s.ns1.h != xb.h || s.ns1.w != xb.w)
    throw DimensionError("noise sample shape does not match input");

  Var n_i = cfg.use_ni ? r1(nn::input(s.ns1))
                       : nn::constant(Tensor(xb.n, d, xb.h, xb.w));
  Var n_d;
  if (cfg.use_nd) {
    Var ms = enc_ms2(relu(enc_ms1(x_blur)));
    Var mu = slice_channels(ms, 0, d);
    Var sigma = softplus(slice_channels(ms, d, 2 * d));
    n_d = r2(add(mul(nn::input(s.ns2), sigma), mu));
  } else {
    n_d = nn::constant(Tensor(xb.n, d, xb.h, xb.w));
  }
  Var x_noisy = add(x_blur, proj_m(add(n_i, n_d)));
  if (!cfg.use_nq) return x_noisy;
  Var q = softplus(enc_q2(relu(enc_q1(x_noisy))));
  Var n_q = r3(mul(nn::input(s.u), q));
  return add(x_noisy, proj_q(n_q));
}

void NoiseModule::encode_ms(const Tensor& x_blur, Tensor* mu, Tensor* sigma) const {
  nn::NoGradGuard guard;
  Var ms = enc_ms2(relu(enc_ms1(nn::input(x_blur))));
  if (mu) *mu = slice_channels(ms, 0, d)->val;
  if (sigma) *sigma = softplus(slice_channels(ms, d, 2 * d))->val;
}

Tensor NoiseModule::encode_q(const Tensor& x_noisy) const {
  nn::NoGradGuard guard;
  return softplus(enc_q2(relu(enc_q1(nn::input(x_noisy)))))->val;
}

Generator::Generator(const GenConfig& cfg, RngStream rng) : cfg_(cfg) {
  cfg_.validate();
  if (!cfg_.bright_fixed)
    brightness_ = BrightnessModule(reg_, "brightness", cfg_, rng.substream("brightness"));
  if (!cfg_.blur_fixed) {
    blur_ = BlurModule(reg_, "blur", cfg_, rng.substream("blur"));
  } else {
    // depthwise_conv2d shares the sliding-window convention of the oracle
    // blur, so the kernel is stored as-is.
    int k = cfg_.sgm.psf_size;
    blur_kernel_ = Tensor(3, 1, k, k);
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < k * k; ++i)
        blur_kernel_.data[static_cast<size_t>(c) * k * k + i] = cfg_.sgm.psf[i];
  }
  if (!cfg_.noise_fixed)
    noise_ = NoiseModule(reg_, "noise", cfg_, rng.substream("noise"));
}

Var Generator::stage_brightness(const Var& x) const {
  if (!cfg_.bright_fixed) return brightness_(x);
  Tensor g(x->val.n, 3, 1, 1);
  for (int in = 0; in < x->val.n; ++in)
    for (int c = 0; c < 3; ++c) g.at(in, c, 0, 0) = cfg_.sgm.gamma[c];
  return mul_channel(x, nn::constant(std::move(g)));
}

Var Generator::stage_blur(const Var& x) const {
  if (!cfg_.blur_fixed) return blur_(x);
  int r = cfg_.sgm.psf_size / 2;
  if (r == 0) return x;
  return depthwise_conv2d(reflect_pad(x, r), nn::constant(blur_kernel_),
                          nn::constant(Tensor(1, 3, 1, 1)), 0);
}

Var Generator::stage_noise(const Var& x, const GenSample& s) const {
  if (!cfg_.noise_fixed) return noise_(x, s, cfg_);
  const Tensor& xv = x->val;
  if (s.z.n != xv.n || s.z.c != 3 || s.z.h != xv.h || s.z.w != xv.w)
    throw DimensionError("fixed noise stage needs a (N,3,H,W) normal field z");
  Var sd = sqrt_val(affine(relu(x), cfg_.sgm.sigma_shot,
                           cfg_.sgm.sigma_read * cfg_.sgm.sigma_read));
  Var noisy = add(x, mul(sd, nn::constant(s.z)));
  if (cfg_.sgm.bit_depth == 0) return noisy;
  return quantize_st(noisy, cfg_.sgm.bit_depth);
}

Var Generator::forward(const Var& x, const GenSample& s) const {
  return stage_noise(stage_blur(stage_brightness(x)), s);
}

Tensor Generator::generate(const nn::Tensor& x, RngStream& rng) const {
  GenSample s = draw_sample(x.n, x.h, x.w, rng);
  return generate(x, s);
}

Tensor Generator::generate(const nn::Tensor& x, const GenSample& s) const {
  nn::NoGradGuard guard;
  return forward(nn::input(x), s)->val;
}

GenTrace Generator::trace(const nn::Tensor& x, const GenSample& s) const {
  nn::NoGradGuard guard;
  GenTrace t;
  Var xin = nn::input(x);
  Var x_dark;
  if (cfg_.bright_fixed) {
    x_dark = stage_brightness(xin);
    t.gate = Tensor(x.n, 3, 1, 1);
    for (int in = 0; in < x.n; ++in)
      for (int c = 0; c < 3; ++c) t.gate.at(in, c, 0, 0) = cfg_.sgm.gamma[c];
  } else {
    Var gate = brightness_.gate(xin);
    t.gate = gate->val;
    x_dark = mul_channel(xin, gate);
  }
  t.x_dark = x_dark->val;
  Var x_blur = stage_blur(x_dark);
  t.x_blur = x_blur->val;

  if (cfg_.noise_fixed) {
    t.n_i = Tensor(x.n, cfg_.noise_width, x.h, x.w);
    t.n_d = t.n_i;
    t.n_q = t.n_i;
    t.q = t.n_i;
    Var noisy = stage_noise(x_blur, s);
    // For the fixed stage mix holds the pre-quantization displacement and
    // quant holds the rounding displacement.
    t.x_final = noisy->val;
    Tensor sd = sqrt_val(affine(relu(x_blur), cfg_.sgm.sigma_shot,
                                cfg_.sgm.sigma_read * cfg_.sgm.sigma_read))
                    ->val;
    t.mix = Tensor(x.n, 3, x.h, x.w);
    for (size_t i = 0; i < t.mix.data.size(); ++i)
      t.mix.data[i] = sd.data[i] * s.z.data[i];
    t.x_noisy = t.x_blur;
    for (size_t i = 0; i < t.x_noisy.data.size(); ++i) t.x_noisy.data[i] += t.mix.data[i];
    t.quant = t.x_final;
    for (size_t i = 0; i < t.quant.data.size(); ++i) t.quant.data[i] -= t.x_noisy.data[i];
    return t;
  }

  Var n_i = cfg_.use_ni ? noise_.r1(nn::input(s.ns1))
                        : nn::constant(Tensor(x.n, cfg_.noise_width, x.h, x.w));
  t.n_i = n_i->val;
  Var n_d;
  if (cfg_.use_nd) {
    Tensor mu, sigma;
    noise_.encode_ms(t.x_blur, &mu, &sigma);
    Var pre = add(mul(nn::input(s.ns2), nn::constant(sigma)), nn::constant(mu));
    n_d = noise_.r2(pre);
  } else {
    n_d = nn::constant(Tensor(x.n, cfg_.noise_width, x.h, x.w));
  }
  t.n_d = n_d->val;
  Var mix = noise_.proj_m(add(n_i, n_d));
  t.mix = mix->val;
  Var x_noisy = add(x_blur, mix);
  t.x_noisy = x_noisy->val;
  if (cfg_.use_nq) {
    t.q = noise_.encode_q(t.x_noisy);
    Var n_q = noise_.r3(mul(nn::input(s.u), nn::constant(t.q)));
    t.n_q = n_q->val;
    Var quant = noise_.proj_q(n_q);
    t.quant = quant->val;
    t.x_final = add(x_noisy, quant)->val;
  } else {
    t.q = Tensor(x.n, cfg_.noise_width, x.h, x.w);
    t.n_q = Tensor(x.n, cfg_.noise_width, x.h, x.w);
    t.quant = Tensor(x.n, 3, x.h, x.w);
    t.x_final = t.x_noisy;
  }
  return t;
}

}  // namespace udc
