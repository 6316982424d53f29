// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "udc/image.hpp"

namespace udc {

/// Peak signal-to-noise ratio in dB with peak 1.0. Returns the sentinel cap
/// 99.0 when the mean squared error falls below 1e-12.
double psnr(const Image& a, const Image& b);

/// Mean structural similarity: 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, dynamic range 1.0, computed per channel over valid window
/// positions and averaged across channels.
double ssim(const Image& a, const Image& b);

}  // namespace udc
