// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "udc/discriminator.hpp"
#include "udc/dwformer.hpp"
#include "udc/mpgnet.hpp"
#include "udc/patches.hpp"
#include "udc/rng.hpp"

namespace udc {

struct GanTrainConfig {
  long total_iters = 60000;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lr_g0 = 1e-4;
  double lr_g_min = 1e-6;
  double lr_d0 = 1e-3;
  double lr_d_min = 1e-5;
  int d_steps_per_g_step = 3;
  int batch = 8;
  double lambda = 10.0;
  bool use_adv = true;             // false skips discriminator steps entirely
  bool use_sup = true;             // restorer-mediated L1 term
  bool use_l1_direct = false;      // plain L1(fake, degraded), weighted by lambda
  AugmentMode augment = AugmentMode::flips_only;
  long checkpoint_every = 0;       // 0 = 5% of total_iters
  std::string checkpoint_dir;      // empty = no checkpoints
  std::string history_path;        // empty = in-memory only

  void validate() const;
};

struct RestoreTrainConfig {
  long total_iters = 200000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lr0 = 1e-4;
  double lr_min = 1e-6;
  int batch = 64;
  AugmentMode augment = AugmentMode::flips_and_rotations;
  double bn_freeze_fraction = 0.8;
  long checkpoint_every = 0;
  std::string checkpoint_dir;
  std::string history_path;

  void validate() const;
};

/// One adversarial iteration: losses from the final discriminator step of the
/// iteration plus the single generator step.
struct GanRecord {
  long step = 0;
  double loss_d = 0.0;
  double loss_g_adv = 0.0;
  double loss_sup = 0.0;
  double loss_total = 0.0;
  double lr_g = 0.0;
  double lr_d = 0.0;
};

struct RestoreRecord {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool frozen = false;
};

struct GanTrainResult {
  std::unique_ptr<Generator> generator;
  std::unique_ptr<Discriminator> discriminator;
  std::vector<GanRecord> history;
  long d_steps = 0;
  long g_steps = 0;
};

struct RestoreTrainResult {
  std::unique_ptr<Restorer> restorer;
  std::vector<RestoreRecord> history;
  long freeze_step = -1;  // -1 when freezing never triggered
  double best_val_loss = 0.0;
};

/// Adversarial training of the degradation generator against real pairs.
/// The pretrained restorer is required (and must already be frozen) when
/// use_sup is on; its weights are left untouched. Per iteration the
/// discriminator takes d_steps_per_g_step steps on fresh batches, then the
/// generator takes one. With use_adv off no discriminator is built and the
/// result carries a null discriminator.
GanTrainResult train_generator(const std::vector<PatchPair>& pairs, Restorer* pretrained,
                               const GenConfig& gen_cfg, const DiscConfig& disc_cfg,
                               const GanTrainConfig& cfg, RngStream rng);

/// Supervised restorer training with mean-absolute-error. Normalization runs
/// on minibatch statistics until floor(bn_freeze_fraction * total_iters), then
/// freezes. Optional val_pairs select a best checkpoint by validation loss.
RestoreTrainResult train_restorer(const std::vector<PatchPair>& pairs,
                                  const RestorerConfig& arch,
                                  const RestoreTrainConfig& cfg, RngStream rng,
                                  const std::vector<PatchPair>& val_pairs = {});

/// Assembles (clean, degraded) batch tensors, drawing indices and augmentation
/// bits from the given stream.
void fill_batch(const std::vector<PatchPair>& pairs, int batch, AugmentMode augment,
                RngStream& rng, nn::Tensor* clean, nn::Tensor* degraded);

/// Mean absolute error of restore(degraded) against clean over a pair list,
/// evaluated sample by sample in frozen mode.
double validation_l1(Restorer& restorer, const std::vector<PatchPair>& pairs);

}  // namespace udc
