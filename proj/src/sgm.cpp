// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/sgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "udc/error.hpp"

namespace udc {

void SgmConfig::validate() const {
  for (double g : gamma) {
    if (!(g > 0.0) || g > 1.0) throw ConfigError("gamma must lie in (0, 1]");
  }
  if (psf_size < 1 || psf_size % 2 == 0) throw ConfigError("psf_size must be odd and >= 1");
  if (static_cast<int>(psf.size()) != psf_size * psf_size)
    throw ConfigError("psf length must equal psf_size^2");
  double sum = 0.0;
  for (double v : psf) {
    if (!std::isfinite(v)) throw ConfigError("psf entries must be finite");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("psf must sum to 1");
  if (sigma_read < 0.0 || sigma_shot < 0.0) throw ConfigError("noise levels must be >= 0");
  if (bit_depth < 0 || bit_depth > 16) throw ConfigError("bit_depth must lie in [0, 16]");
}

void to_json(nlohmann::json& j, const SgmConfig& c) {
  j = nlohmann::json{{"gamma", c.gamma},         {"psf_size", c.psf_size},
                     {"psf", c.psf},             {"sigma_read", c.sigma_read},
                     {"sigma_shot", c.sigma_shot}, {"bit_depth", c.bit_depth}};
}

void from_json(const nlohmann::json& j, SgmConfig& c) {
  j.at("gamma").get_to(c.gamma);
  j.at("psf_size").get_to(c.psf_size);
  j.at("psf").get_to(c.psf);
  c.sigma_read = j.value("sigma_read", 0.0);
  c.sigma_shot = j.value("sigma_shot", 0.0);
  c.bit_depth = j.value("bit_depth", 8);
}

std::vector<double> load_psf_text(const std::string& path, int* size_out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open psf file: " + path);
  std::vector<double> vals;
  double v;
  while (in >> v) vals.push_back(v);
  if (vals.empty()) throw FormatError("psf file is empty: " + path);
  int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(vals.size()))));
  if (k * k != static_cast<int>(vals.size()) || k % 2 == 0)
    throw FormatError("psf file must contain an odd square matrix: " + path);
  double sum = std::accumulate(vals.begin(), vals.end(), 0.0);
  if (!(sum > 0.0)) throw FormatError("psf must have positive sum: " + path);
  for (double& x : vals) x /= sum;
  if (size_out) *size_out = k;
  return vals;
}

std::vector<double> make_preset_psf(int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("psf size must be odd and >= 1");
  int r = k / 2;
  std::vector<double> psf(static_cast<size_t>(k) * k);
  // Two offset anisotropic lobes give the kernel a mild directional smear.
  const double cx1 = -0.15 * r, cy1 = 0.1 * r, sx1 = 0.55 * r + 0.3, sy1 = 0.35 * r + 0.3;
  const double cx2 = 0.45 * r, cy2 = -0.3 * r, sx2 = 0.3 * r + 0.25, sy2 = 0.5 * r + 0.25;
  double sum = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      double g1 = std::exp(-0.5 * ((x - cx1) * (x - cx1) / (sx1 * sx1) +
                                   (y - cy1) * (y - cy1) / (sy1 * sy1)));
      double g2 = 0.6 * std::exp(-0.5 * ((x - cx2) * (x - cx2) / (sx2 * sx2) +
                                         (y - cy2) * (y - cy2) / (sy2 * sy2)));
      double v = g1 + g2;
      psf[static_cast<size_t>(y + r) * k + (x + r)] = v;
      sum += v;
    }
  }
  for (double& v : psf) v /= sum;
  return psf;
}

Image apply_gamma(const Image& x, const std::array<double, 3>& gamma) {
  Image out = x;
  for (int c = 0; c < 3; ++c) {
    double* p = out.channel(c);
    size_t n = out.pixel_count();
    for (size_t i = 0; i < n; ++i) p[i] *= gamma[c];
  }
  return out;
}

namespace {

// Reflect-101 index mapping: -1 -> 1, n -> n-2.
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

}  // namespace

Image convolve_psf(const Image& x, const std::vector<double>& psf, int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("psf size must be odd and >= 1");
  if (static_cast<int>(psf.size()) != k * k) throw DimensionError("psf length must equal k^2");
  const int r = k / 2;
  const int h = x.height, w = x.width;
  Image out = x;
  for (int c = 0; c < 3; ++c) {
    const double* src = x.channel(c);
    double* dst = out.channel(c);
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          int sy = reflect(y + dy, h);
          const double* row = src + static_cast<size_t>(sy) * w;
          const double* krow = psf.data() + static_cast<size_t>(dy + r) * k;
          for (int dx = -r; dx <= r; ++dx) {
            acc += krow[dx + r] * row[reflect(xx + dx, w)];
          }
        }
        dst[static_cast<size_t>(y) * w + xx] = acc;
      }
    }
  }
  return out;
}

Image sample_hetero_noise(const Image& signal, double sigma_read, double sigma_shot,
                          RngStream& rng) {
  Image out = signal;
  size_t n = out.data.size();
  const double* s = signal.data.data();
  double* p = out.data.data();
  for (size_t i = 0; i < n; ++i) {
    double var = sigma_read * sigma_read + sigma_shot * std::max(s[i], 0.0);
    p[i] = std::sqrt(var) * rng.normal();
  }
  return out;
}

Image quantize(const Image& x, int bit_depth) {
  if (bit_depth == 0) return x;
  if (bit_depth < 0 || bit_depth > 16) throw ConfigError("bit_depth must lie in [0, 16]");
  const double levels = static_cast<double>((1u << bit_depth) - 1u);
  Image out = x;
  for (double& v : out.data) {
    double c = std::clamp(v, 0.0, 1.0);
    v = std::round(c * levels) / levels;
  }
  return out;
}

Image sgm_degrade(const Image& x, const SgmConfig& cfg, RngStream& rng) {
  cfg.validate();
  Image dark = apply_gamma(x, cfg.gamma);
  Image blurred = convolve_psf(dark, cfg.psf, cfg.psf_size);
  Image noise = sample_hetero_noise(blurred, cfg.sigma_read, cfg.sigma_shot, rng);
  Image noisy = blurred;
  for (size_t i = 0; i < noisy.data.size(); ++i) noisy.data[i] += noise.data[i];
  return quantize(noisy, cfg.bit_depth);
}

}  // namespace udc
