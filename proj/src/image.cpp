// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "udc/error.hpp"

namespace udc {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image load_image(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image file: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw FormatError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng failure while reading: " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("expected an RGB PNG: " + path);
  }
  if (bit_depth != 8 && bit_depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("expected 8- or 16-bit samples: " + path);
  }
  if (bit_depth == 16) png_set_swap(png);  // PNG stores 16-bit big-endian

  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));

  Image img(h, w, 0.0, bit_depth);
  // Divide rather than multiply by a reciprocal so k/levels reproduces the
  // quantizer's round(v * levels) / levels bit for bit.
  const double levels = static_cast<double>((1u << bit_depth) - 1u);

  if (bit_depth == 8) {
    std::vector<png_byte> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; y++) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < w; x++)
        for (int c = 0; c < 3; c++) img.at(y, x, c) = row[3 * x + c] / levels;
    }
  } else {
    std::vector<uint16_t> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; y++) {
      png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
      for (int x = 0; x < w; x++)
        for (int c = 0; c < 3; c++) img.at(y, x, c) = row[3 * x + c] / levels;
    }
  }

  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_image(const Image& img, const std::string& path) {
  if (img.height < 1 || img.width < 1) throw DimensionError("cannot save an empty image");
  const int bits = img.source_bit_depth;
  if (bits != 8 && bits != 16) throw FormatError("PNG output supports 8- or 16-bit depth");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failure while writing: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, bits, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bits == 16) png_set_swap(png);

  const double peak = (1u << bits) - 1u;
  auto quant = [&](double v) {
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return std::lround(v * peak);
  };

  if (bits == 8) {
    std::vector<png_byte> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; y++) {
      for (int x = 0; x < img.width; x++)
        for (int c = 0; c < 3; c++)
          row[3 * x + c] = static_cast<png_byte>(quant(img.at(y, x, c)));
      png_write_row(png, row.data());
    }
  } else {
    std::vector<uint16_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; y++) {
      for (int x = 0; x < img.width; x++)
        for (int c = 0; c < 3; c++)
          row[3 * x + c] = static_cast<uint16_t>(quant(img.at(y, x, c)));
      png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
  }

  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace udc
