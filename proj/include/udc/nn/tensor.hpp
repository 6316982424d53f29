// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <vector>

#include "udc/image.hpp"
#include "udc/rng.hpp"

namespace udc::nn {

/// 64-byte aligning allocator for numeric buffers. Vectorized kernels pick
/// code paths from runtime pointer alignment, so reproducible low bits
/// require every buffer to land on the same boundary regardless of heap
/// state.
template <class T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::size_t alignment = 64;

  AlignedAlloc() = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U>&) noexcept {}

  T* allocate(std::size_t count) {
    return static_cast<T*>(
        ::operator new(count * sizeof(T), std::align_val_t(alignment)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(alignment));
  }
  template <class U>
  bool operator==(const AlignedAlloc<U>&) const noexcept { return true; }
  template <class U>
  bool operator!=(const AlignedAlloc<U>&) const noexcept { return false; }
};

using AlignedVec = std::vector<double, AlignedAlloc<double>>;

/// Dense NCHW tensor of doubles. Flat index (((n*C + c)*H + h)*W + w).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  AlignedVec data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  double& at(int in, int ic, int iy, int ix) {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  double at(int in, int ic, int iy, int ix) const {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  /// Pointer to the start of sample in (shape c*h*w).
  double* sample(int in) { return data.data() + static_cast<size_t>(in) * c * h * w; }
  const double* sample(int in) const {
    return data.data() + static_cast<size_t>(in) * c * h * w;
  }

  static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }
  static Tensor full(int n, int c, int h, int w, double v);
  static Tensor randn(int n, int c, int h, int w, RngStream& rng);
  static Tensor uniform_sym(int n, int c, int h, int w, RngStream& rng);  // U(-1, 1)
};

bool all_finite(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Order-sensitive digest of the raw double bytes, for determinism checks.
uint64_t checksum(const Tensor& t);

/// (1,3,H,W) tensor from a 3-channel image; values copied as-is.
Tensor tensor_from_image(const Image& img);

/// Writes sample `index` of a (N,3,H,W) tensor back into an image.
Image image_from_tensor(const Tensor& t, int index = 0, int source_bit_depth = 8);

}  // namespace udc::nn
