// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/patches.hpp"

#include "udc/error.hpp"

namespace udc {

namespace {

Image crop(const Image& img, int row, int col, int size) {
  Image out(size, size, 0.0, img.source_bit_depth);
  for (int c = 0; c < 3; c++)
    for (int y = 0; y < size; y++)
      for (int x = 0; x < size; x++) out.at(y, x, c) = img.at(row + y, col + x, c);
  return out;
}

}  // namespace

std::vector<PatchPair> crop_patches(const Image& clean, const Image& degraded, int size,
                                    int count, RngStream& rng) {
  if (!clean.same_shape(degraded))
    throw DimensionError("crop_patches: clean/degraded dimensions differ");
  if (size < 1 || size > clean.height || size > clean.width)
    throw DimensionError("crop_patches: patch size exceeds image");

  std::vector<PatchPair> out;
  out.reserve(count);
  const uint64_t row_range = clean.height - size + 1;
  const uint64_t col_range = clean.width - size + 1;
  for (int i = 0; i < count; i++) {
    const int row = static_cast<int>(rng.uniform_int(row_range));
    const int col = static_cast<int>(rng.uniform_int(col_range));
    out.push_back(PatchPair{crop(clean, row, col, size), crop(degraded, row, col, size), row, col});
  }
  return out;
}

Image flip_h(const Image& img) {
  Image out(img.height, img.width, 0.0, img.source_bit_depth);
  for (int c = 0; c < 3; c++)
    for (int y = 0; y < img.height; y++)
      for (int x = 0; x < img.width; x++) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image flip_v(const Image& img) {
  Image out(img.height, img.width, 0.0, img.source_bit_depth);
  for (int c = 0; c < 3; c++)
    for (int y = 0; y < img.height; y++)
      for (int x = 0; x < img.width; x++) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

Image rot90(const Image& img, int quarter_turns) {
  int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return img;
  if (img.height != img.width) throw DimensionError("rot90: requires a square image");
  const int n = img.height;
  Image out(n, n, 0.0, img.source_bit_depth);
  for (int c = 0; c < 3; c++)
    for (int y = 0; y < n; y++)
      for (int x = 0; x < n; x++) {
        // counter-clockwise quarter turns
        int sy = y, sx = x;
        for (int t = 0; t < k; t++) {
          const int ny = sx;
          const int nx = n - 1 - sy;
          sy = ny;
          sx = nx;
        }
        out.at(y, x, c) = img.at(sy, sx, c);
      }
  return out;
}

PatchPair apply_transform(const PatchPair& pair, bool fh, bool fv, int quarter_turns) {
  PatchPair out = pair;
  if (fh) {
    out.clean = flip_h(out.clean);
    out.degraded = flip_h(out.degraded);
  }
  if (fv) {
    out.clean = flip_v(out.clean);
    out.degraded = flip_v(out.degraded);
  }
  if (quarter_turns % 4 != 0) {
    out.clean = rot90(out.clean, quarter_turns);
    out.degraded = rot90(out.degraded, quarter_turns);
  }
  return out;
}

PatchPair augment(const PatchPair& pair, AugmentMode mode, RngStream& rng) {
  if (!pair.clean.same_shape(pair.degraded))
    throw DimensionError("augment: clean/degraded dimensions differ");
  const bool fh = rng.uniform_int(2) == 1;
  const bool fv = rng.uniform_int(2) == 1;
  int k = 0;
  if (mode == AugmentMode::flips_and_rotations) {
    if (pair.clean.height != pair.clean.width)
      throw DimensionError("augment: rotations require square patches");
    k = static_cast<int>(rng.uniform_int(4));
  }
  return apply_transform(pair, fh, fv, k);
}

}  // namespace udc
