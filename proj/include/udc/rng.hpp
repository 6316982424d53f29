// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace udc {

/// Deterministic random stream. The same seed always produces the same draw
/// sequence, and independent substreams are derived from (seed, label) pairs
/// only, never from the parent's draw position.
class RngStream {
public:
  explicit RngStream(uint64_t seed = 0);

  /// Derives an independent stream keyed by a label. Calling twice with the
  /// same label yields the same stream; include an index in the label (or use
  /// the two-argument overload) when a fresh stream per step is wanted.
  RngStream substream(std::string_view label) const;
  RngStream substream(std::string_view label, uint64_t index) const;

  uint64_t seed() const { return seed_; }

  uint64_t next_u64();
  double uniform01();                 // [0, 1)
  double uniform(double lo, double hi);
  double uniform_sym();               // (-1, 1)
  double normal();                    // N(0, 1), Box-Muller
  uint64_t uniform_int(uint64_t n);   // [0, n), n >= 1

private:
  uint64_t seed_ = 0;
  uint64_t state_[4] = {0, 0, 0, 0};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a over a byte range; used for substream derivation and content hashes.
uint64_t fnv1a64(const void* data, size_t len, uint64_t basis = 0xcbf29ce484222325ull);

}  // namespace udc
