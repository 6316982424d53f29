// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

namespace udc {

/// RGB raster held as planar double data, channel-major: data[(c*H + y)*W + x].
/// Values are nominally in [0,1] but intermediate processing may leave them
/// outside that range; they are clamped and quantized only at serialization.
struct Image {
  int height = 0;
  int width = 0;
  int source_bit_depth = 8;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0, int bit_depth = 8)
      : height(h), width(w), source_bit_depth(bit_depth),
        data(static_cast<size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double* channel(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
  const double* channel(int c) const {
    return data.data() + static_cast<size_t>(c) * height * width;
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

/// Reads an 8- or 16-bit RGB PNG and scales samples to [0,1] by 1/(2^bits-1).
Image load_image(const std::string& path);

/// Clamps to [0,1], quantizes to the image's source bit depth (8 or 16) and
/// writes a PNG of that depth.
void save_image(const Image& img, const std::string& path);

/// A clean/degraded crop pair taken at the same offset.
struct PatchPair {
  Image clean;
  Image degraded;
  int row = 0;
  int col = 0;
};

}  // namespace udc
