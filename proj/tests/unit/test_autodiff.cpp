// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>

#include "udc/error.hpp"
#include "udc/nn/autodiff.hpp"
#include "udc/nn/tensor.hpp"
#include "udc/rng.hpp"

using udc::RngStream;
using udc::nn::Tensor;
using udc::nn::Var;
namespace nn = udc::nn;

namespace {

Tensor make_tensor(int n, int c, int h, int w, std::initializer_list<double> vals) {
  Tensor t(n, c, h, w);
  size_t i = 0;
  for (double v : vals) t.data[i++] = v;
  REQUIRE(i == t.size());
  return t;
}

// Central-difference check along one random direction of an input leaf.
double input_dir_err(const std::function<Var(const Var&)>& f, const Tensor& x0,
                     RngStream& rng, double h = 1e-5) {
  Var x = nn::input(x0, true);
  Var loss = f(x);
  nn::backward(loss);

  Tensor d = Tensor::randn(x0.n, x0.c, x0.h, x0.w, rng);
  double an = 0.0;
  for (size_t i = 0; i < d.size(); ++i) an += x->grad.data[i] * d.data[i];

  Tensor xp = x0, xm = x0;
  for (size_t i = 0; i < d.size(); ++i) {
    xp.data[i] += h * d.data[i];
    xm.data[i] -= h * d.data[i];
  }
  nn::NoGradGuard guard;
  double lp = f(nn::input(xp))->val.data[0];
  double lm = f(nn::input(xm))->val.data[0];
  double fd = (lp - lm) / (2.0 * h);
  return std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-10});
}

// Pushes every entry away from zero so kinked ops stay locally smooth.
Tensor away_from_zero(Tensor t, double margin = 0.1) {
  for (double& v : t.data)
    if (std::abs(v) < margin) v += (v >= 0 ? margin : -margin);
  return t;
}

}  // namespace

TEST_CASE("elementwise arithmetic forward values") {
  Tensor a = make_tensor(1, 1, 2, 2, {1, 2, 3, 4});
  Tensor b = make_tensor(1, 1, 2, 2, {5, 6, 7, 8});
  Var va = nn::constant(a), vb = nn::constant(b);

  Tensor s = nn::add(va, vb)->val;
  CHECK(s.data == std::vector<double>{6, 8, 10, 12});
  Tensor d = nn::sub(va, vb)->val;
  CHECK(d.data == std::vector<double>{-4, -4, -4, -4});
  Tensor m = nn::mul(va, vb)->val;
  CHECK(m.data == std::vector<double>{5, 12, 21, 32});
  Tensor aff = nn::affine(va, 2.0, -1.0)->val;
  CHECK(aff.data == std::vector<double>{1, 3, 5, 7});

  Var mismatch = nn::constant(Tensor(1, 1, 2, 3));
  CHECK_THROWS_AS(nn::add(va, mismatch), udc::DimensionError);
}

TEST_CASE("unary op forward values") {
  Tensor x = make_tensor(1, 1, 1, 4, {-2.0, 0.0, 0.5, 4.0});
  Var vx = nn::constant(x);

  CHECK(nn::relu(vx)->val.data == std::vector<double>{0, 0, 0.5, 4.0});
  CHECK(nn::abs_val(vx)->val.data == std::vector<double>{2, 0, 0.5, 4.0});

  Tensor sig = nn::sigmoid(vx)->val;
  CHECK(sig.data[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sig.data[3] == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))).epsilon(1e-12));

  Tensor sp = nn::softplus(vx)->val;
  CHECK(sp.data[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor pos = make_tensor(1, 1, 1, 2, {4.0, 9.0});
  CHECK(nn::sqrt_val(nn::constant(pos))->val.data == std::vector<double>{2, 3});

  Tensor mean = nn::mean_all(vx)->val;
  CHECK(mean.n == 1);
  CHECK(mean.size() == 1);
  CHECK(mean.data[0] == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("backward accumulates into parameter gradients") {
  nn::Parameter p;
  p.name = "p";
  p.value = make_tensor(1, 1, 2, 2, {1, 2, 3, 4});
  p.trainable = true;

  Tensor w = make_tensor(1, 1, 2, 2, {4, 3, 2, 1});
  auto build = [&]() { return nn::mean_all(nn::mul(nn::leaf(&p), nn::constant(w))); };

  p.zero_grad();
  nn::backward(build());
  for (int i = 0; i < 4; ++i)
    CHECK(p.grad.data[i] == doctest::Approx(w.data[i] / 4.0).epsilon(1e-12));

  // A second backward without zero_grad accumulates.
  nn::backward(build());
  for (int i = 0; i < 4; ++i)
    CHECK(p.grad.data[i] == doctest::Approx(2.0 * w.data[i] / 4.0).epsilon(1e-12));

  p.zero_grad();
  for (double g : p.grad.data) CHECK(g == 0.0);

  // The same leaf node feeding both factors doubles the local gradient.
  Var x = nn::leaf(&p);
  nn::backward(nn::mean_all(nn::mul(x, x)));
  for (int i = 0; i < 4; ++i)
    CHECK(p.grad.data[i] == doctest::Approx(2.0 * p.value.data[i] / 4.0).epsilon(1e-12));
}

TEST_CASE("detach and NoGradGuard stop gradient flow") {
  nn::Parameter p;
  p.name = "p";
  p.value = make_tensor(1, 1, 1, 2, {2, 3});

  Var x = nn::leaf(&p);
  p.zero_grad();
  nn::backward(nn::mean_all(nn::mul(nn::detach(x), x)));
  // Only the non-detached factor contributes: d/dx mean(c * x) = c / n.
  CHECK(p.grad.data[0] == doctest::Approx(2.0 / 2.0).epsilon(1e-12));
  CHECK(p.grad.data[1] == doctest::Approx(3.0 / 2.0).epsilon(1e-12));

  {
    nn::NoGradGuard guard;
    CHECK_FALSE(nn::grad_enabled());
    p.zero_grad();
    Var frozen = nn::leaf(&p);
    CHECK_FALSE(frozen->needs_grad);
    nn::backward(nn::mean_all(frozen));
    for (double g : p.grad.data) CHECK(g == 0.0);
  }
  CHECK(nn::grad_enabled());

  Var root = nn::constant(Tensor(1, 1, 2, 2));
  CHECK_THROWS_AS(nn::backward(root), udc::DimensionError);
}

TEST_CASE("finite differences confirm elementwise gradients") {
  RngStream rng(21);
  Tensor w = Tensor::randn(2, 3, 4, 4, rng);
  Var vw = nn::constant(w);

  auto weighted = [&](const std::function<Var(const Var&)>& op) {
    return [&, op](const Var& x) { return nn::mean_all(nn::mul(op(x), vw)); };
  };

  Tensor x0 = away_from_zero(Tensor::randn(2, 3, 4, 4, rng));
  CHECK(input_dir_err(weighted([](const Var& x) { return nn::relu(x); }), x0, rng) < 1e-6);
  CHECK(input_dir_err(weighted([](const Var& x) { return nn::abs_val(x); }), x0, rng) < 1e-6);
  CHECK(input_dir_err(weighted([](const Var& x) { return nn::sigmoid(x); }), x0, rng) < 1e-6);
  CHECK(input_dir_err(weighted([](const Var& x) { return nn::softplus(x); }), x0, rng) < 1e-6);
  CHECK(input_dir_err(weighted([](const Var& x) { return nn::affine(x, -1.7, 0.3); }), x0,
                      rng) < 1e-6);
  CHECK(input_dir_err(weighted([&](const Var& x) { return nn::mul(x, nn::add(x, vw)); }), x0,
                      rng) < 1e-6);

  Tensor positive(2, 3, 4, 4);
  for (double& v : positive.data) v = 0.5 + rng.uniform01();
  CHECK(input_dir_err(weighted([](const Var& x) { return nn::sqrt_val(x); }), positive, rng) <
        1e-6);
}

TEST_CASE("reflect_pad mirrors without repeating the edge") {
  Tensor x = make_tensor(1, 1, 3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor p = nn::reflect_pad(nn::constant(x), 1)->val;
  REQUIRE(p.h == 5);
  REQUIRE(p.w == 5);
  // Row -1 mirrors to row 1, column -1 to column 1.
  CHECK(p.at(0, 0, 0, 0) == 5.0);
  CHECK(p.at(0, 0, 0, 1) == 4.0);
  CHECK(p.at(0, 0, 1, 0) == 2.0);
  CHECK(p.at(0, 0, 1, 1) == 1.0);
  CHECK(p.at(0, 0, 2, 2) == 5.0);
  CHECK(p.at(0, 0, 4, 4) == 5.0);
  CHECK(p.at(0, 0, 4, 2) == 5.0);

  CHECK_THROWS_AS(nn::reflect_pad(nn::constant(x), -1), udc::RangeError);
  CHECK_THROWS_AS(nn::reflect_pad(nn::constant(x), 3), udc::DimensionError);

  RngStream rng(22);
  Tensor x0 = Tensor::randn(2, 3, 5, 5, rng);
  Tensor w = Tensor::randn(2, 3, 9, 9, rng);
  auto f = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::reflect_pad(v, 2), nn::constant(w)));
  };
  CHECK(input_dir_err(f, x0, rng) < 1e-6);
}

TEST_CASE("quantize_st rounds forward and passes gradient through") {
  Tensor x = make_tensor(1, 1, 1, 4, {0.5, 0.2, -0.3, 1.7});
  Var vx = nn::input(x, true);
  Var q = nn::quantize_st(vx, 8);
  CHECK(q->val.data[0] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(q->val.data[1] == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
  CHECK(q->val.data[2] == 0.0);
  CHECK(q->val.data[3] == 1.0);

  nn::backward(nn::mean_all(q));
  for (double g : vx->grad.data) CHECK(g == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(nn::quantize_st(vx, 0), udc::RangeError);
}

TEST_CASE("channel scaling and pooling ops") {
  Tensor x = make_tensor(1, 2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor s = make_tensor(1, 2, 1, 1, {2, 3});
  Tensor scaled = nn::mul_channel(nn::constant(x), nn::constant(s))->val;
  CHECK(scaled.data == std::vector<double>{2, 4, 6, 8, 15, 18, 21, 24});

  Tensor pooled = nn::global_avg_pool(nn::constant(x))->val;
  REQUIRE(pooled.c == 2);
  CHECK(pooled.data[0] == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(pooled.data[1] == doctest::Approx(6.5).epsilon(1e-12));

  CHECK_THROWS_AS(nn::mul_channel(nn::constant(x), nn::constant(Tensor(1, 2, 1, 2))),
                  udc::DimensionError);

  RngStream rng(23);
  Tensor x0 = Tensor::randn(2, 3, 3, 3, rng);
  Tensor s0 = Tensor::randn(2, 3, 1, 1, rng);
  Tensor w = Tensor::randn(2, 3, 3, 3, rng);
  auto fx = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::mul_channel(v, nn::constant(s0)), nn::constant(w)));
  };
  CHECK(input_dir_err(fx, x0, rng) < 1e-6);
  auto fs = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::mul_channel(nn::constant(x0), v), nn::constant(w)));
  };
  CHECK(input_dir_err(fs, s0, rng) < 1e-6);
}

TEST_CASE("spatial softmax and weighted pooling") {
  Tensor logits = make_tensor(1, 1, 2, 2,
                              {0.0, std::log(2.0), std::log(3.0), std::log(4.0)});
  Tensor sm = nn::softmax_spatial(nn::constant(logits))->val;
  CHECK(sm.data[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(sm.data[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(sm.data[2] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(sm.data[3] == doctest::Approx(0.4).epsilon(1e-12));

  Tensor f = make_tensor(1, 2, 2, 2, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor pooled = nn::weighted_pool(nn::constant(sm), nn::constant(f))->val;
  REQUIRE(pooled.c == 2);
  CHECK(pooled.data[0] == doctest::Approx(0.1 + 0.4 + 0.9 + 1.6).epsilon(1e-12));
  CHECK(pooled.data[1] == doctest::Approx(1.0 + 4.0 + 9.0 + 16.0).epsilon(1e-12));

  CHECK_THROWS_AS(nn::softmax_spatial(nn::constant(f)), udc::DimensionError);

  RngStream rng(24);
  Tensor l0 = Tensor::randn(2, 1, 3, 3, rng);
  Tensor f0 = Tensor::randn(2, 4, 3, 3, rng);
  Tensor w = Tensor::randn(2, 4, 1, 1, rng);
  auto fl = [&](const Var& v) {
    return nn::mean_all(
        nn::mul(nn::weighted_pool(nn::softmax_spatial(v), nn::constant(f0)), nn::constant(w)));
  };
  CHECK(input_dir_err(fl, l0, rng) < 1e-6);
  auto ff = [&](const Var& v) {
    return nn::mean_all(nn::mul(
        nn::weighted_pool(nn::softmax_spatial(nn::constant(l0)), v), nn::constant(w)));
  };
  CHECK(input_dir_err(ff, f0, rng) < 1e-6);
}

TEST_CASE("concat and slice are inverse") {
  Tensor a = make_tensor(1, 1, 1, 2, {1, 2});
  Tensor b = make_tensor(1, 2, 1, 2, {3, 4, 5, 6});
  Var cat = nn::concat_channels(nn::constant(a), nn::constant(b));
  REQUIRE(cat->val.c == 3);
  CHECK(cat->val.data == std::vector<double>{1, 2, 3, 4, 5, 6});

  CHECK(nn::slice_channels(cat, 0, 1)->val.data == a.data);
  CHECK(nn::slice_channels(cat, 1, 3)->val.data == b.data);
  CHECK_THROWS_AS(nn::slice_channels(cat, 2, 2), udc::RangeError);

  RngStream rng(25);
  Tensor x0 = Tensor::randn(2, 4, 3, 3, rng);
  Tensor w = Tensor::randn(2, 2, 3, 3, rng);
  auto f = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::slice_channels(v, 1, 3), nn::constant(w)));
  };
  CHECK(input_dir_err(f, x0, rng) < 1e-6);
}

namespace {

// Independent dense convolution used as a reference oracle.
Tensor ref_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  int oh = (x.h + 2 * pad - w.h) / stride + 1;
  int ow = (x.w + 2 * pad - w.w) / stride + 1;
  Tensor out(x.n, w.n, oh, ow);
  for (int in = 0; in < x.n; ++in)
    for (int oc = 0; oc < w.n; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b.data[oc];
          for (int ic = 0; ic < x.c; ++ic)
            for (int ky = 0; ky < w.h; ++ky)
              for (int kx = 0; kx < w.w; ++kx) {
                int sy = oy * stride - pad + ky;
                int sx = ox * stride - pad + kx;
                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                acc += w.at(oc, ic, ky, kx) * x.at(in, ic, sy, sx);
              }
          out.at(in, oc, oy, ox) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches a reference implementation") {
  RngStream rng(26);
  Tensor x = Tensor::randn(2, 3, 6, 6, rng);
  Tensor w = Tensor::randn(4, 3, 3, 3, rng);
  Tensor b = Tensor::randn(1, 4, 1, 1, rng);

  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}}) {
    Tensor got = nn::conv2d(nn::constant(x), nn::constant(w), nn::constant(b), stride, pad)->val;
    Tensor want = ref_conv2d(x, w, b, stride, pad);
    REQUIRE(got.same_shape(want));
    CHECK(udc::nn::max_abs_diff(got, want) < 1e-12);
  }

  CHECK_THROWS_AS(
      nn::conv2d(nn::constant(x), nn::constant(Tensor(4, 2, 3, 3)), nn::constant(b), 1, 1),
      udc::DimensionError);

  auto fx = [&](const Var& v) {
    return nn::mean_all(nn::abs_val(nn::conv2d(v, nn::constant(w), nn::constant(b), 2, 1)));
  };
  CHECK(input_dir_err(fx, x, rng) < 1e-5);
  auto fw = [&](const Var& v) {
    return nn::mean_all(nn::abs_val(nn::conv2d(nn::constant(x), v, nn::constant(b), 2, 1)));
  };
  CHECK(input_dir_err(fw, w, rng) < 1e-5);
  auto fb = [&](const Var& v) {
    return nn::mean_all(nn::abs_val(nn::conv2d(nn::constant(x), nn::constant(w), v, 2, 1)));
  };
  CHECK(input_dir_err(fb, b, rng) < 1e-5);
}

TEST_CASE("depthwise_conv2d matches a per-channel reference") {
  RngStream rng(27);
  Tensor x = Tensor::randn(2, 3, 5, 5, rng);
  Tensor w = Tensor::randn(3, 1, 3, 3, rng);
  Tensor b = Tensor::randn(1, 3, 1, 1, rng);

  Tensor got = nn::depthwise_conv2d(nn::constant(x), nn::constant(w), nn::constant(b), 1)->val;
  Tensor want(x.n, x.c, x.h, x.w);
  for (int in = 0; in < x.n; ++in)
    for (int c = 0; c < 3; ++c)
      for (int oy = 0; oy < x.h; ++oy)
        for (int ox = 0; ox < x.w; ++ox) {
          double acc = b.data[c];
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              int sy = oy - 1 + ky, sx = ox - 1 + kx;
              if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
              acc += w.at(c, 0, ky, kx) * x.at(in, c, sy, sx);
            }
          want.at(in, c, oy, ox) = acc;
        }
  CHECK(udc::nn::max_abs_diff(got, want) < 1e-12);

  auto fx = [&](const Var& v) {
    return nn::mean_all(nn::abs_val(nn::depthwise_conv2d(v, nn::constant(w), nn::constant(b), 1)));
  };
  CHECK(input_dir_err(fx, x, rng) < 1e-5);
  auto fw = [&](const Var& v) {
    return nn::mean_all(nn::abs_val(nn::depthwise_conv2d(nn::constant(x), v, nn::constant(b), 1)));
  };
  CHECK(input_dir_err(fw, w, rng) < 1e-5);
}

TEST_CASE("pixel_shuffle rearranges channels into space") {
  Tensor x(1, 4, 2, 2);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 2; ++y)
      for (int xx = 0; xx < 2; ++xx) x.at(0, c, y, xx) = 100 * c + 10 * y + xx;
  Tensor out = nn::pixel_shuffle(nn::constant(x), 2)->val;
  REQUIRE(out.c == 1);
  REQUIRE(out.h == 4);
  REQUIRE(out.w == 4);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) {
      int c = (y % 2) * 2 + (xx % 2);
      CHECK(out.at(0, 0, y, xx) == 100 * c + 10 * (y / 2) + (xx / 2));
    }

  RngStream rng(28);
  Tensor x0 = Tensor::randn(2, 8, 3, 3, rng);
  Tensor w = Tensor::randn(2, 2, 6, 6, rng);
  auto f = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::pixel_shuffle(v, 2), nn::constant(w)));
  };
  CHECK(input_dir_err(f, x0, rng) < 1e-6);
}

TEST_CASE("batch_norm minibatch statistics and running buffers") {
  nn::Parameter rm, rv;
  rm.name = "rm";
  rm.value = Tensor(1, 1, 1, 1);
  rm.trainable = false;
  rv.name = "rv";
  rv.value = Tensor::full(1, 1, 1, 1, 1.0);
  rv.trainable = false;
  nn::BnBuffers buf;
  buf.running_mean = &rm;
  buf.running_var = &rv;

  Tensor x = make_tensor(2, 1, 1, 2, {1, 2, 3, 4});
  Var gamma = nn::constant(Tensor::full(1, 1, 1, 1, 1.0));
  Var beta = nn::constant(Tensor(1, 1, 1, 1));

  CHECK_THROWS_AS(nn::batch_norm(nn::constant(x), gamma, beta, buf, nn::NormMode::frozen,
                                 0.1, 1e-5),
                  udc::StateError);

  Tensor out = nn::batch_norm(nn::constant(x), gamma, beta, buf, nn::NormMode::minibatch,
                              0.1, 1e-5)->val;
  const double mean = 2.5, var = 1.25;
  for (int i = 0; i < 4; ++i)
    CHECK(out.data[i] ==
          doctest::Approx((x.data[i] - mean) / std::sqrt(var + 1e-5)).epsilon(1e-10));
  CHECK(rm.value.data[0] == doctest::Approx(0.9 * 0.0 + 0.1 * mean).epsilon(1e-12));
  CHECK(rv.value.data[0] == doctest::Approx(0.9 * 1.0 + 0.1 * var).epsilon(1e-12));
  CHECK(buf.ready);

  // Frozen mode normalizes with the running buffers, per sample.
  Tensor frozen = nn::batch_norm(nn::constant(x), gamma, beta, buf, nn::NormMode::frozen,
                                 0.1, 1e-5)->val;
  double fm = rm.value.data[0], fv = rv.value.data[0];
  for (int i = 0; i < 4; ++i)
    CHECK(frozen.data[i] ==
          doctest::Approx((x.data[i] - fm) / std::sqrt(fv + 1e-5)).epsilon(1e-10));

  RngStream rng(29);
  Tensor x0 = Tensor::randn(3, 2, 4, 4, rng);
  Tensor w = Tensor::randn(3, 2, 4, 4, rng);
  Tensor g0 = Tensor::full(1, 2, 1, 1, 1.3);
  Tensor b0 = Tensor::full(1, 2, 1, 1, -0.2);
  nn::Parameter rm2, rv2;
  rm2.value = Tensor(1, 2, 1, 1);
  rm2.trainable = false;
  rv2.value = Tensor::full(1, 2, 1, 1, 1.0);
  rv2.trainable = false;
  nn::BnBuffers buf2{&rm2, &rv2, false};
  auto fx = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::batch_norm(v, nn::constant(g0), nn::constant(b0), buf2,
                                               nn::NormMode::minibatch, 0.1, 1e-5),
                                nn::constant(w)));
  };
  CHECK(input_dir_err(fx, x0, rng) < 1e-5);
  auto fg = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::batch_norm(nn::constant(x0), v, nn::constant(b0), buf2,
                                               nn::NormMode::minibatch, 0.1, 1e-5),
                                nn::constant(w)));
  };
  CHECK(input_dir_err(fg, g0, rng) < 1e-5);
}

TEST_CASE("layer_norm_ch normalizes across channels per position") {
  Tensor x = make_tensor(1, 3, 1, 1, {1, 2, 3});
  Var gamma = nn::constant(Tensor::full(1, 3, 1, 1, 1.0));
  Var beta = nn::constant(Tensor(1, 3, 1, 1));
  Tensor out = nn::layer_norm_ch(nn::constant(x), gamma, beta, 1e-5)->val;
  const double mean = 2.0, var = 2.0 / 3.0;
  for (int i = 0; i < 3; ++i)
    CHECK(out.data[i] ==
          doctest::Approx((x.data[i] - mean) / std::sqrt(var + 1e-5)).epsilon(1e-10));

  RngStream rng(30);
  Tensor x0 = Tensor::randn(2, 4, 3, 3, rng);
  Tensor w = Tensor::randn(2, 4, 3, 3, rng);
  Tensor g0 = Tensor::full(1, 4, 1, 1, 0.8);
  Tensor b0 = Tensor::full(1, 4, 1, 1, 0.1);
  auto fx = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::layer_norm_ch(v, nn::constant(g0), nn::constant(b0), 1e-5),
                                nn::constant(w)));
  };
  CHECK(input_dir_err(fx, x0, rng) < 1e-5);
  auto fg = [&](const Var& v) {
    return nn::mean_all(nn::mul(nn::layer_norm_ch(nn::constant(x0), v, nn::constant(b0), 1e-5),
                                nn::constant(w)));
  };
  CHECK(input_dir_err(fg, g0, rng) < 1e-5);
}
