// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/nn/tensor.hpp"

#include <cmath>

#include "udc/error.hpp"

namespace udc::nn {

Tensor Tensor::full(int n, int c, int h, int w, double v) {
  Tensor t(n, c, h, w);
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

Tensor Tensor::randn(int n, int c, int h, int w, RngStream& rng) {
  Tensor t(n, c, h, w);
  for (double& x : t.data) x = rng.normal();
  return t;
}

Tensor Tensor::uniform_sym(int n, int c, int h, int w, RngStream& rng) {
  Tensor t(n, c, h, w);
  for (double& x : t.data) x = rng.uniform_sym();
  return t;
}

bool all_finite(const Tensor& t) {
  for (double v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("tensor shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

uint64_t checksum(const Tensor& t) {
  return fnv1a64(t.data.data(), t.data.size() * sizeof(double));
}

Tensor tensor_from_image(const Image& img) {
  Tensor t(1, 3, img.height, img.width);
  std::copy(img.data.begin(), img.data.end(), t.data.begin());
  return t;
}

Image image_from_tensor(const Tensor& t, int index, int source_bit_depth) {
  if (t.c != 3) throw DimensionError("expected a 3-channel tensor");
  if (index < 0 || index >= t.n) throw RangeError("sample index out of range");
  Image img;
  img.height = t.h;
  img.width = t.w;
  img.source_bit_depth = source_bit_depth;
  const double* s = t.sample(index);
  img.data.assign(s, s + static_cast<size_t>(3) * t.h * t.w);
  return img;
}

}  // namespace udc::nn
