// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "udc/dataset.hpp"
#include "udc/report.hpp"
#include "udc/train.hpp"

namespace udc {

/// Synthetic corpus and patch extraction settings for one experiment.
struct DeskDataConfig {
  int corpus = 200;
  int height = 96;
  int width = 96;
  int patch = 64;
  int patches_per_image = 3;
  int val_permille = 100;
  int test_permille = 100;

  void validate() const;
};

/// End-to-end experiment: synthesize a corpus, degrade it with a closed-form
/// oracle, pretrain a restorer, fit the learned degrader adversarially, probe
/// what it learned, then compare restorers trained on generated versus oracle
/// data on held-out oracle images.
struct ClosedLoopConfig {
  DeskDataConfig data;
  SgmConfig oracle;
  GenConfig gen;
  DiscConfig disc;
  RestorerConfig restorer;
  RestoreTrainConfig pretrain;
  GanTrainConfig gan;
  RestoreTrainConfig transfer;
  int probe_draws = 32;
  double probe_level = 0.5;
  int probe_margin = 8;
  bool self_check = false;  // swap the learned degrader for a reseeded oracle
  std::string work_dir;     // empty keeps everything in memory

  void validate() const;
};

void to_json(nlohmann::json& j, const DeskDataConfig& c);
void from_json(const nlohmann::json& j, DeskDataConfig& c);
void to_json(nlohmann::json& j, const ClosedLoopConfig& c);
void from_json(const nlohmann::json& j, ClosedLoopConfig& c);

/// Flat-field probe of a degrader: channel gains from interior means of a
/// constant input, residual variance from the spread across repeated draws.
struct FlatFieldProbe {
  std::array<double, 3> gamma_est{0.0, 0.0, 0.0};
  double noise_var_est = 0.0;
};

FlatFieldProbe probe_generator(const Generator& gen, int size, int margin, int draws,
                               double level, RngStream rng);
FlatFieldProbe probe_oracle(const SgmConfig& cfg, int size, int margin, int draws,
                            double level, RngStream rng);

/// Analytic residual variance of the oracle at a flat level, averaged over
/// channels (includes the quantization term when bit_depth > 0).
double oracle_flat_variance(const SgmConfig& cfg, double level);

struct ClosedLoopReport {
  uint64_t seed = 0;
  std::string config_hash;
  bool self_check = false;

  std::array<double, 3> gamma_true{0.0, 0.0, 0.0};
  std::array<double, 3> gamma_est{0.0, 0.0, 0.0};
  double noise_var_analytic = 0.0;
  double noise_var_oracle_est = 0.0;
  double noise_var_est = 0.0;

  double mpg_test_psnr = 0.0;
  double oracle_test_psnr = 0.0;
  double mpg_test_ssim = 0.0;
  double oracle_test_ssim = 0.0;
  double restore_gap_db = 0.0;  // oracle-trained minus generated-trained

  std::vector<double> pretrain_loss;
  std::vector<double> gan_loss_total;
  double seconds = 0.0;
};

nlohmann::json closed_loop_json(const ClosedLoopReport& r);

ClosedLoopReport run_closed_loop(const ClosedLoopConfig& cfg, RngStream rng);

/// Built-in oracle presets: strongly attenuating ("poled") and mildly
/// attenuating ("toled") display stacks. Throws ConfigError on other names.
SgmConfig oracle_preset(const std::string& name);

/// Desk-scale defaults for every sub-config, sized for single-core runs.
ClosedLoopConfig desk_closed_loop_config();

}  // namespace udc
