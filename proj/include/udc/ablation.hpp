// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "udc/closed_loop.hpp"

namespace udc {

/// Degradation-model swaps: replace one learned stage with the closed-form
/// oracle stage, or zero one noise branch while keeping its parameters.
enum class GenVariant { full, sgm_light, sgm_blur, sgm_noise, no_nq, no_nd, no_ni };

/// Restorer swaps: drop or replace the attention gate, or switch the
/// normalization family.
enum class ResVariant { full, no_aca, se_attention, layer_norm };

struct AblationSpec {
  GenVariant gen = GenVariant::full;
  ResVariant restorer = ResVariant::full;
  bool use_adv = true;
  bool use_sup = true;
  bool use_l1_direct = false;
  double lambda = 10.0;
};

std::string gen_variant_name(GenVariant v);
GenVariant gen_variant_from(const std::string& s);
std::string res_variant_name(ResVariant v);
ResVariant res_variant_from(const std::string& s);

void to_json(nlohmann::json& j, const AblationSpec& s);
void from_json(const nlohmann::json& j, AblationSpec& s);

/// The oracle parameters are substituted when v swaps in a closed-form stage.
GenConfig apply_gen_variant(GenConfig base, GenVariant v, const SgmConfig& oracle);
RestorerConfig apply_res_variant(RestorerConfig base, ResVariant v);
GanTrainConfig apply_loss_flags(GanTrainConfig base, const AblationSpec& spec);

/// Sorted symmetric difference of parameter names between two registries.
std::vector<std::string> registry_name_diff(const nn::ParamRegistry& a,
                                            const nn::ParamRegistry& b);

/// Applies the spec to every relevant sub-config and runs the full loop.
ClosedLoopReport run_ablation(const AblationSpec& spec, ClosedLoopConfig base,
                              RngStream rng);

nlohmann::json ablation_json(const AblationSpec& spec, const ClosedLoopReport& loop);

}  // namespace udc
