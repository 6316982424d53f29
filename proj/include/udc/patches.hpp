// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "udc/image.hpp"
#include "udc/rng.hpp"

namespace udc {

enum class AugmentMode { flips_only, flips_and_rotations };

/// Samples `count` aligned crops of size x size; offsets drawn uniformly from
/// the valid range, the same offset applied to both images.
std::vector<PatchPair> crop_patches(const Image& clean, const Image& degraded, int size,
                                    int count, RngStream& rng);

/// Applies one randomly chosen flip/rotation combination identically to the
/// clean and degraded patch. Rotations (multiples of 90 degrees) require a
/// square patch.
PatchPair augment(const PatchPair& pair, AugmentMode mode, RngStream& rng);

// Deterministic transform primitives used by augment; exposed so callers can
// force a specific transform.
Image flip_h(const Image& img);
Image flip_v(const Image& img);
Image rot90(const Image& img, int quarter_turns);
PatchPair apply_transform(const PatchPair& pair, bool fh, bool fv, int quarter_turns);

}  // namespace udc
