// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "udc/error.hpp"

namespace udc {

void to_json(nlohmann::json& j, const GenConfig& c) {
  j = nlohmann::json{{"bright_width", c.bright_width}, {"bright_up", c.bright_up},
                     {"blur_width", c.blur_width},     {"noise_width", c.noise_width},
                     {"use_ni", c.use_ni},             {"use_nd", c.use_nd},
                     {"use_nq", c.use_nq},             {"bright_fixed", c.bright_fixed},
                     {"blur_fixed", c.blur_fixed},     {"noise_fixed", c.noise_fixed}};
  if (c.any_fixed()) j["sgm"] = c.sgm;
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  GenConfig d;
  c.bright_width = j.value("bright_width", d.bright_width);
  c.bright_up = j.value("bright_up", d.bright_up);
  c.blur_width = j.value("blur_width", d.blur_width);
  c.noise_width = j.value("noise_width", d.noise_width);
  c.use_ni = j.value("use_ni", d.use_ni);
  c.use_nd = j.value("use_nd", d.use_nd);
  c.use_nq = j.value("use_nq", d.use_nq);
  c.bright_fixed = j.value("bright_fixed", d.bright_fixed);
  c.blur_fixed = j.value("blur_fixed", d.blur_fixed);
  c.noise_fixed = j.value("noise_fixed", d.noise_fixed);
  if (j.contains("sgm")) j.at("sgm").get_to(c.sgm);
}

void to_json(nlohmann::json& j, const DiscConfig& c) {
  j = nlohmann::json{{"widths", c.widths}};
}

void from_json(const nlohmann::json& j, DiscConfig& c) {
  if (j.contains("widths")) j.at("widths").get_to(c.widths);
}

void to_json(nlohmann::json& j, const RestorerConfig& c) {
  j = nlohmann::json{{"widths", c.widths},
                     {"blocks", c.blocks},
                     {"mlp_expansion", c.mlp_expansion},
                     {"attn_reduction", c.attn_reduction},
                     {"attn", attn_kind_name(c.attn)},
                     {"norm", norm_kind_name(c.norm)},
                     {"bn_momentum", c.bn_momentum},
                     {"bn_eps", c.bn_eps}};
}

void from_json(const nlohmann::json& j, RestorerConfig& c) {
  RestorerConfig d;
  if (j.contains("widths")) j.at("widths").get_to(c.widths);
  if (j.contains("blocks")) j.at("blocks").get_to(c.blocks);
  c.mlp_expansion = j.value("mlp_expansion", d.mlp_expansion);
  c.attn_reduction = j.value("attn_reduction", d.attn_reduction);
  c.attn = attn_kind_from(j.value("attn", attn_kind_name(d.attn)));
  c.norm = norm_kind_from(j.value("norm", norm_kind_name(d.norm)));
  c.bn_momentum = j.value("bn_momentum", d.bn_momentum);
  c.bn_eps = j.value("bn_eps", d.bn_eps);
}

void to_json(nlohmann::json& j, const GanTrainConfig& c) {
  j = nlohmann::json{{"total_iters", c.total_iters},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"lr_g0", c.lr_g0},
                     {"lr_g_min", c.lr_g_min},
                     {"lr_d0", c.lr_d0},
                     {"lr_d_min", c.lr_d_min},
                     {"d_steps_per_g_step", c.d_steps_per_g_step},
                     {"batch", c.batch},
                     {"lambda", c.lambda},
                     {"use_adv", c.use_adv},
                     {"use_sup", c.use_sup},
                     {"use_l1_direct", c.use_l1_direct},
                     {"augment", augment_mode_name(c.augment)},
                     {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, GanTrainConfig& c) {
  GanTrainConfig d;
  c.total_iters = j.value("total_iters", d.total_iters);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.lr_g0 = j.value("lr_g0", d.lr_g0);
  c.lr_g_min = j.value("lr_g_min", d.lr_g_min);
  c.lr_d0 = j.value("lr_d0", d.lr_d0);
  c.lr_d_min = j.value("lr_d_min", d.lr_d_min);
  c.d_steps_per_g_step = j.value("d_steps_per_g_step", d.d_steps_per_g_step);
  c.batch = j.value("batch", d.batch);
  c.lambda = j.value("lambda", d.lambda);
  c.use_adv = j.value("use_adv", d.use_adv);
  c.use_sup = j.value("use_sup", d.use_sup);
  c.use_l1_direct = j.value("use_l1_direct", d.use_l1_direct);
  c.augment = augment_mode_from(j.value("augment", augment_mode_name(d.augment)));
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
}

void to_json(nlohmann::json& j, const RestoreTrainConfig& c) {
  j = nlohmann::json{{"total_iters", c.total_iters},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"lr0", c.lr0},
                     {"lr_min", c.lr_min},
                     {"batch", c.batch},
                     {"augment", augment_mode_name(c.augment)},
                     {"bn_freeze_fraction", c.bn_freeze_fraction},
                     {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, RestoreTrainConfig& c) {
  RestoreTrainConfig d;
  c.total_iters = j.value("total_iters", d.total_iters);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.lr0 = j.value("lr0", d.lr0);
  c.lr_min = j.value("lr_min", d.lr_min);
  c.batch = j.value("batch", d.batch);
  c.augment = augment_mode_from(j.value("augment", augment_mode_name(d.augment)));
  c.bn_freeze_fraction = j.value("bn_freeze_fraction", d.bn_freeze_fraction);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
}

std::string attn_kind_name(AttnKind k) {
  switch (k) {
    case AttnKind::aca: return "aca";
    case AttnKind::se: return "se";
    case AttnKind::none: return "none";
  }
  throw ConfigError("unknown attention kind");
}

AttnKind attn_kind_from(const std::string& s) {
  if (s == "aca") return AttnKind::aca;
  if (s == "se") return AttnKind::se;
  if (s == "none") return AttnKind::none;
  throw ConfigError("unknown attention kind: " + s);
}

std::string norm_kind_name(NormKind k) {
  switch (k) {
    case NormKind::batch: return "batch";
    case NormKind::layer: return "layer";
  }
  throw ConfigError("unknown norm kind");
}

NormKind norm_kind_from(const std::string& s) {
  if (s == "batch") return NormKind::batch;
  if (s == "layer") return NormKind::layer;
  throw ConfigError("unknown norm kind: " + s);
}

std::string augment_mode_name(AugmentMode m) {
  return m == AugmentMode::flips_only ? "flips" : "flips_and_rotations";
}

AugmentMode augment_mode_from(const std::string& s) {
  if (s == "flips") return AugmentMode::flips_only;
  if (s == "flips_and_rotations") return AugmentMode::flips_and_rotations;
  throw ConfigError("unknown augment mode: " + s);
}

std::string config_hash(const nlohmann::json& j) {
  std::string dump = j.dump();  // nlohmann objects keep sorted key order
  uint64_t h = fnv1a64(dump.data(), dump.size());
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open json file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("invalid json in " + path + ": " + e.what());
  }
  return j;
}

void save_json_file(const std::string& path, const nlohmann::json& j, int indent) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write json file: " + path);
  out << j.dump(indent) << "\n";
}

}  // namespace udc
