// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/metrics.hpp"

#include <cmath>
#include <vector>

#include "udc/error.hpp"

namespace udc {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_taps() {
  std::vector<double> t(kWindow);
  const int r = kWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kWindow; i++) {
    const double d = i - r;
    t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += t[i];
  }
  for (auto& v : t) v /= sum;
  return t;
}

// Separable Gaussian filter, valid positions only: (H-10) x (W-10).
void filter_valid(const double* src, int h, int w, const std::vector<double>& taps,
                  std::vector<double>& tmp, std::vector<double>& dst) {
  const int vw = w - kWindow + 1;
  const int vh = h - kWindow + 1;
  tmp.assign(static_cast<size_t>(h) * vw, 0.0);
  for (int y = 0; y < h; y++) {
    const double* row = src + static_cast<size_t>(y) * w;
    for (int x = 0; x < vw; x++) {
      double s = 0.0;
      for (int k = 0; k < kWindow; k++) s += taps[k] * row[x + k];
      tmp[static_cast<size_t>(y) * vw + x] = s;
    }
  }
  dst.assign(static_cast<size_t>(vh) * vw, 0.0);
  for (int y = 0; y < vh; y++)
    for (int x = 0; x < vw; x++) {
      double s = 0.0;
      for (int k = 0; k < kWindow; k++) s += taps[k] * tmp[static_cast<size_t>(y + k) * vw + x];
      dst[static_cast<size_t>(y) * vw + x] = s;
    }
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("psnr: image dimensions differ");
  double se = 0.0;
  for (size_t i = 0; i < a.data.size(); i++) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data.size());
  if (mse < 1e-12) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("ssim: image dimensions differ");
  if (a.height < kWindow || a.width < kWindow)
    throw DimensionError("ssim: image smaller than the 11x11 window");

  const auto taps = gaussian_taps();
  const int h = a.height, w = a.width;
  const size_t n = a.pixel_count();
  const double c1 = kK1 * kK1;  // (K1*L)^2 with L = 1
  const double c2 = kK2 * kK2;

  std::vector<double> xx(n), yy(n), xy(n);
  std::vector<double> tmp, mx, my, mxx, myy, mxy;

  double total = 0.0;
  for (int c = 0; c < 3; c++) {
    const double* x = a.channel(c);
    const double* y = b.channel(c);
    for (size_t i = 0; i < n; i++) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    filter_valid(x, h, w, taps, tmp, mx);
    filter_valid(y, h, w, taps, tmp, my);
    filter_valid(xx.data(), h, w, taps, tmp, mxx);
    filter_valid(yy.data(), h, w, taps, tmp, myy);
    filter_valid(xy.data(), h, w, taps, tmp, mxy);

    double acc = 0.0;
    for (size_t i = 0; i < mx.size(); i++) {
      const double mu_x = mx[i], mu_y = my[i];
      const double var_x = mxx[i] - mu_x * mu_x;
      const double var_y = myy[i] - mu_y * mu_y;
      const double cov = mxy[i] - mu_x * mu_y;
      acc += ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) /
             ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

}  // namespace udc
