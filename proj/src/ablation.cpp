// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/ablation.hpp"

#include <algorithm>
#include <set>

#include "udc/error.hpp"

namespace udc {

std::string gen_variant_name(GenVariant v) {
  switch (v) {
    case GenVariant::full: return "full";
    case GenVariant::sgm_light: return "sgm-light";
    case GenVariant::sgm_blur: return "sgm-blur";
    case GenVariant::sgm_noise: return "sgm-noise";
    case GenVariant::no_nq: return "no-nq";
    case GenVariant::no_nd: return "no-nd";
    case GenVariant::no_ni: return "no-ni";
  }
  throw ConfigError("unknown generator variant");
}

GenVariant gen_variant_from(const std::string& s) {
  if (s == "full") return GenVariant::full;
  if (s == "sgm-light") return GenVariant::sgm_light;
  if (s == "sgm-blur") return GenVariant::sgm_blur;
  if (s == "sgm-noise") return GenVariant::sgm_noise;
  if (s == "no-nq") return GenVariant::no_nq;
  if (s == "no-nd") return GenVariant::no_nd;
  if (s == "no-ni") return GenVariant::no_ni;
  throw ConfigError("unknown generator variant: " + s);
}

std::string res_variant_name(ResVariant v) {
  switch (v) {
    case ResVariant::full: return "full";
    case ResVariant::no_aca: return "no-aca";
    case ResVariant::se_attention: return "se-attention";
    case ResVariant::layer_norm: return "layer-norm";
  }
  throw ConfigError("unknown restorer variant");
}

ResVariant res_variant_from(const std::string& s) {
  if (s == "full") return ResVariant::full;
  if (s == "no-aca") return ResVariant::no_aca;
  if (s == "se-attention") return ResVariant::se_attention;
  if (s == "layer-norm") return ResVariant::layer_norm;
  throw ConfigError("unknown restorer variant: " + s);
}

void to_json(nlohmann::json& j, const AblationSpec& s) {
  j = nlohmann::json{{"gen", gen_variant_name(s.gen)},
                     {"restorer", res_variant_name(s.restorer)},
                     {"use_adv", s.use_adv},
                     {"use_sup", s.use_sup},
                     {"use_l1_direct", s.use_l1_direct},
                     {"lambda", s.lambda}};
}

void from_json(const nlohmann::json& j, AblationSpec& s) {
  AblationSpec d;
  s.gen = gen_variant_from(j.value("gen", gen_variant_name(d.gen)));
  s.restorer = res_variant_from(j.value("restorer", res_variant_name(d.restorer)));
  s.use_adv = j.value("use_adv", d.use_adv);
  s.use_sup = j.value("use_sup", d.use_sup);
  s.use_l1_direct = j.value("use_l1_direct", d.use_l1_direct);
  s.lambda = j.value("lambda", d.lambda);
}

GenConfig apply_gen_variant(GenConfig base, GenVariant v, const SgmConfig& oracle) {
  switch (v) {
    case GenVariant::full: break;
    case GenVariant::sgm_light:
      base.bright_fixed = true;
      base.sgm = oracle;
      break;
    case GenVariant::sgm_blur:
      base.blur_fixed = true;
      base.sgm = oracle;
      break;
    case GenVariant::sgm_noise:
      base.noise_fixed = true;
      base.sgm = oracle;
      break;
    case GenVariant::no_nq: base.use_nq = false; break;
    case GenVariant::no_nd: base.use_nd = false; break;
    case GenVariant::no_ni: base.use_ni = false; break;
  }
  return base;
}

RestorerConfig apply_res_variant(RestorerConfig base, ResVariant v) {
  switch (v) {
    case ResVariant::full: break;
    case ResVariant::no_aca: base.attn = AttnKind::none; break;
    case ResVariant::se_attention: base.attn = AttnKind::se; break;
    case ResVariant::layer_norm: base.norm = NormKind::layer; break;
  }
  return base;
}

GanTrainConfig apply_loss_flags(GanTrainConfig base, const AblationSpec& spec) {
  base.use_adv = spec.use_adv;
  base.use_sup = spec.use_sup;
  base.use_l1_direct = spec.use_l1_direct;
  base.lambda = spec.lambda;
  return base;
}

std::vector<std::string> registry_name_diff(const nn::ParamRegistry& a,
                                            const nn::ParamRegistry& b) {
  std::set<std::string> na, nb;
  for (const nn::Parameter* p : a.all()) na.insert(p->name);
  for (const nn::Parameter* p : b.all()) nb.insert(p->name);
  std::vector<std::string> diff;
  std::set_symmetric_difference(na.begin(), na.end(), nb.begin(), nb.end(),
                                std::back_inserter(diff));
  return diff;
}

ClosedLoopReport run_ablation(const AblationSpec& spec, ClosedLoopConfig base,
                              RngStream rng) {
  base.gen = apply_gen_variant(base.gen, spec.gen, base.oracle);
  base.restorer = apply_res_variant(base.restorer, spec.restorer);
  base.gan = apply_loss_flags(base.gan, spec);
  return run_closed_loop(base, rng);
}

nlohmann::json ablation_json(const AblationSpec& spec, const ClosedLoopReport& loop) {
  return nlohmann::json{{"spec", spec}, {"result", closed_loop_json(loop)}};
}

}  // namespace udc
