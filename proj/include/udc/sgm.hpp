// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "udc/image.hpp"
#include "udc/rng.hpp"

#include <json.hpp>

namespace udc {

/// Closed-form degradation parameters: per-channel luminance scale, a global
/// PSF kernel, heteroscedastic noise levels and an output bit depth.
struct SgmConfig {
  std::array<double, 3> gamma{1.0, 1.0, 1.0};  // each in (0, 1]
  int psf_size = 1;                            // K, odd
  std::vector<double> psf{1.0};                // K*K row-major, sums to 1
  double sigma_read = 0.0;                     // signal-independent std
  double sigma_shot = 0.0;                     // signal-dependent variance coefficient
  int bit_depth = 8;                           // 0 disables quantization

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const SgmConfig& c);
void from_json(const nlohmann::json& j, SgmConfig& c);

/// Loads a K x K kernel from a whitespace-separated text matrix file and
/// normalizes it to unit sum.
std::vector<double> load_psf_text(const std::string& path, int* size_out);

/// Builds an anisotropic two-lobe Gaussian kernel of odd size k (unit sum).
std::vector<double> make_preset_psf(int k);

/// out[.,.,c] = gamma[c] * x[.,.,c], exactly.
Image apply_gamma(const Image& x, const std::array<double, 3>& gamma);

/// Per-channel 2-D convolution with reflect padding; output dimensions equal
/// input dimensions. An interior impulse reproduces the kernel flipped, the
/// standard convolution-convention observable.
Image convolve_psf(const Image& x, const std::vector<double>& psf, int k);

/// Zero-mean Gaussian field with variance sigma_read^2 + sigma_shot * signal
/// (signal clamped at 0 for the variance term).
Image sample_hetero_noise(const Image& signal, double sigma_read, double sigma_shot,
                          RngStream& rng);

/// Clamps to [0,1] and rounds to the nearest multiple of 1/(2^bit_depth - 1).
Image quantize(const Image& x, int bit_depth);

/// Full pipeline: quantize(convolve(gamma(x)) + noise), composition order fixed.
Image sgm_degrade(const Image& x, const SgmConfig& cfg, RngStream& rng);

}  // namespace udc
