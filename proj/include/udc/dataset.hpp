// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "udc/image.hpp"
#include "udc/mpgnet.hpp"
#include "udc/patches.hpp"
#include "udc/rng.hpp"
#include "udc/sgm.hpp"

namespace udc {

/// Procedural scene for desk-scale experiments: a color gradient base,
/// optional sinusoidal plaid, opaque-to-translucent rectangles and ellipses,
/// soft highlight blobs and smoothed grain, quantized to 8 bits.
Image synth_clean_image(int height, int width, RngStream& rng);

/// count images drawn from per-index substreams, so the corpus is stable under
/// reordering and prefix-sampling.
std::vector<Image> synth_clean_corpus(int count, int height, int width, RngStream rng);

/// Clamps, quantizes to 8 bits and pairs each clean image with its degraded
/// counterpart; image i consumes substream ("image", i).
std::vector<PatchPair> degrade_corpus(const std::vector<Image>& clean,
                                      const SgmConfig& cfg, RngStream rng);
std::vector<PatchPair> degrade_corpus(const std::vector<Image>& clean,
                                      const Generator& gen, RngStream rng);

struct DatasetEntry {
  std::string clean_path;     // relative to the dataset directory
  std::string degraded_path;
  std::string clean_hash;     // 16 hex digits
  std::string degraded_hash;
};

struct DatasetManifest {
  std::string degrader;            // "sgm" or "generator"
  nlohmann::json degrader_config;
  std::string config_hash;
  uint64_t seed = 0;
  int height = 0;
  int width = 0;
  std::vector<DatasetEntry> entries;
};

/// Content hash of a file, 16 hex digits. Throws IoError when unreadable.
std::string file_checksum(const std::string& path);

/// Writes clean/ and degraded/ png trees plus manifest.jsonl under dir.
DatasetManifest write_dataset(const std::vector<PatchPair>& pairs,
                              const std::string& dir, const std::string& degrader,
                              const nlohmann::json& degrader_config, uint64_t seed);

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

/// Loads every manifest pair, re-hashing files; a mismatch or a missing file
/// raises IntegrityError.
std::vector<PatchPair> load_pairs(const DatasetManifest& m, const std::string& dir);

/// per_image aligned random crops from each full-size pair; pair i consumes
/// substream ("crop", i).
std::vector<PatchPair> crop_dataset_patches(const std::vector<PatchPair>& pairs,
                                            int patch, int per_image, RngStream rng);

/// Deterministic shuffled split into train/val/test index sets by per-mille
/// weights (the remainder goes to train).
struct SplitIndices {
  std::vector<size_t> train, val, test;
};
SplitIndices split_indices(size_t count, int val_permille, int test_permille,
                           RngStream rng);

}  // namespace udc
