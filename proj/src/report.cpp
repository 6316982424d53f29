// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/report.hpp"

#include <algorithm>

#include "udc/checkpoint.hpp"
#include "udc/config.hpp"
#include "udc/error.hpp"
#include "udc/metrics.hpp"
#include "udc/nn/tensor.hpp"

namespace udc {

EvalReport evaluate(Restorer& restorer, const std::vector<PatchPair>& pairs,
                    const std::string& model_label) {
  if (pairs.empty()) throw ConfigError("evaluate: empty pair list");
  if (!restorer.frozen())
    throw StateError("evaluate: restorer must be frozen for deterministic scoring");

  uint64_t before = registry_checksum(restorer.params());

  EvalReport rep;
  rep.model = model_label;
  rep.config_hash = config_hash(nlohmann::json(restorer.config()));
  rep.params = restorer.count_params();
  rep.macs = restorer.count_macs(pairs.front().clean.height, pairs.front().clean.width);
  rep.per_image.reserve(pairs.size());

  double sum_psnr = 0.0, sum_ssim = 0.0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const PatchPair& pair = pairs[i];
    if (!pair.clean.same_shape(pair.degraded))
      throw DimensionError("evaluate: pair " + std::to_string(i) + " shape mismatch");
    nn::Tensor y = nn::tensor_from_image(pair.degraded);
    nn::Tensor out = restorer.restore(y, nn::NormMode::frozen);
    Image restored = nn::image_from_tensor(out, 0);
    for (double& v : restored.data) v = std::clamp(v, 0.0, 1.0);
    EvalImageResult r;
    r.index = i;
    r.psnr = psnr(restored, pair.clean);
    r.ssim = ssim(restored, pair.clean);
    sum_psnr += r.psnr;
    sum_ssim += r.ssim;
    rep.per_image.push_back(r);
  }
  rep.mean_psnr = sum_psnr / static_cast<double>(pairs.size());
  rep.mean_ssim = sum_ssim / static_cast<double>(pairs.size());

  if (registry_checksum(restorer.params()) != before)
    throw IntegrityError("evaluate: restorer weights changed during evaluation");
  return rep;
}

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const EvalImageResult& e : r.per_image)
    per.push_back({{"index", e.index}, {"psnr", e.psnr}, {"ssim", e.ssim}});
  return nlohmann::json{{"model", r.model},
                        {"config_hash", r.config_hash},
                        {"seed", r.seed},
                        {"params", r.params},
                        {"macs", r.macs},
                        {"mean_psnr", r.mean_psnr},
                        {"mean_ssim", r.mean_ssim},
                        {"per_image", per}};
}

}  // namespace udc
