// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <json.hpp>

#include "udc/discriminator.hpp"
#include "udc/dwformer.hpp"
#include "udc/mpgnet.hpp"
#include "udc/patches.hpp"
#include "udc/sgm.hpp"
#include "udc/train.hpp"

namespace udc {

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);
void to_json(nlohmann::json& j, const DiscConfig& c);
void from_json(const nlohmann::json& j, DiscConfig& c);
void to_json(nlohmann::json& j, const RestorerConfig& c);
void from_json(const nlohmann::json& j, RestorerConfig& c);
void to_json(nlohmann::json& j, const GanTrainConfig& c);
void from_json(const nlohmann::json& j, GanTrainConfig& c);
void to_json(nlohmann::json& j, const RestoreTrainConfig& c);
void from_json(const nlohmann::json& j, RestoreTrainConfig& c);

std::string attn_kind_name(AttnKind k);
AttnKind attn_kind_from(const std::string& s);
std::string norm_kind_name(NormKind k);
NormKind norm_kind_from(const std::string& s);
std::string augment_mode_name(AugmentMode m);
AugmentMode augment_mode_from(const std::string& s);

/// 16-hex-digit digest of the canonical (sorted-key) JSON dump.
std::string config_hash(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j, int indent = 2);

}  // namespace udc
