// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "udc/discriminator.hpp"
#include "udc/dwformer.hpp"
#include "udc/mpgnet.hpp"
#include "udc/nn/layers.hpp"

namespace udc {

/// Binary container: 8-byte magic, little-endian u64 header length, JSON
/// header (kind, architecture, step, extras, tensor directory), then raw
/// little-endian doubles in directory order.
struct CheckpointMeta {
  std::string kind;
  long step = 0;
  nlohmann::json arch;
  nlohmann::json extras;
};

void save_registry(const std::string& path, const nn::ParamRegistry& reg,
                   const CheckpointMeta& meta);
/// Loads into an already-built registry; every name and shape must match.
CheckpointMeta load_registry(const std::string& path, nn::ParamRegistry& reg);
nlohmann::json read_checkpoint_header(const std::string& path);

/// Digest over parameter values in registry order (buffers included).
uint64_t registry_checksum(const nn::ParamRegistry& reg);

void save_generator(const std::string& path, const Generator& gen, long step = 0);
std::unique_ptr<Generator> load_generator(const std::string& path, long* step = nullptr);

void save_discriminator(const std::string& path, const Discriminator& disc, long step = 0);
std::unique_ptr<Discriminator> load_discriminator(const std::string& path,
                                                  long* step = nullptr);

void save_restorer(const std::string& path, const Restorer& restorer, long step = 0);
std::unique_ptr<Restorer> load_restorer(const std::string& path, long* step = nullptr);

}  // namespace udc
