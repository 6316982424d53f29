// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "udc/dwformer.hpp"
#include "udc/image.hpp"

namespace udc {

struct EvalImageResult {
  size_t index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::string model;        // caller-chosen label
  std::string config_hash;  // restorer architecture hash
  uint64_t seed = 0;
  size_t params = 0;
  long long macs = 0;       // at the evaluated image size
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<EvalImageResult> per_image;
};

/// Restores every degraded image (frozen statistics, sample by sample), clamps
/// to [0,1] and scores against the clean reference. Aggregates are plain means
/// over images. The restorer must be frozen; its weights are verified
/// unchanged afterwards (IntegrityError when not).
EvalReport evaluate(Restorer& restorer, const std::vector<PatchPair>& pairs,
                    const std::string& model_label = "restorer");

nlohmann::json report_json(const EvalReport& r);

}  // namespace udc
