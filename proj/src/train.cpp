// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/train.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "udc/checkpoint.hpp"
#include "udc/error.hpp"
#include "udc/losses.hpp"
#include "udc/nn/optim.hpp"

namespace udc {

using nn::Tensor;
using nn::Var;

void GanTrainConfig::validate() const {
  if (total_iters < 1 || batch < 1 || d_steps_per_g_step < 1)
    throw ConfigError("gan training counts must be positive");
  if (lr_g0 <= 0 || lr_g_min <= 0 || lr_d0 <= 0 || lr_d_min <= 0)
    throw ConfigError("gan learning rates must be positive");
  if (lambda < 0) throw ConfigError("lambda must be >= 0");
  if (!use_adv && !use_sup && !use_l1_direct)
    throw ConfigError("at least one generator loss term must be enabled");
}

void RestoreTrainConfig::validate() const {
  if (total_iters < 1 || batch < 1) throw ConfigError("training counts must be positive");
  if (lr0 <= 0 || lr_min <= 0) throw ConfigError("learning rates must be positive");
  if (bn_freeze_fraction < 0.0 || bn_freeze_fraction > 1.0)
    throw ConfigError("bn_freeze_fraction must lie in [0, 1]");
}

namespace {

// Temporarily marks every currently-trainable parameter as fixed, so graphs
// built inside the scope skip weight gradients for that model.
class FreezeScope {
 public:
  explicit FreezeScope(nn::ParamRegistry& reg) {
    for (nn::Parameter* p : reg.trainable()) {
      p->trainable = false;
      flipped_.push_back(p);
    }
  }
  ~FreezeScope() {
    for (nn::Parameter* p : flipped_) p->trainable = true;
  }
  FreezeScope(const FreezeScope&) = delete;
  FreezeScope& operator=(const FreezeScope&) = delete;

 private:
  std::vector<nn::Parameter*> flipped_;
};

void require_finite(double v, const char* what, long step) {
  if (!std::isfinite(v)) {
    throw TrainingAbort(std::string(what) + " became non-finite at iteration " +
                        std::to_string(step));
  }
}

long cadence_or_default(long every, long total) {
  if (every > 0) return every;
  return std::max<long>(1, total / 20);
}

}  // namespace

void fill_batch(const std::vector<PatchPair>& pairs, int batch, AugmentMode augment_mode,
                RngStream& rng, Tensor* clean, Tensor* degraded) {
  if (pairs.empty()) throw ConfigError("fill_batch: empty pair list");
  const Image& probe = pairs.front().clean;
  *clean = Tensor(batch, 3, probe.height, probe.width);
  *degraded = Tensor(batch, 3, probe.height, probe.width);
  for (int b = 0; b < batch; ++b) {
    size_t idx = static_cast<size_t>(rng.uniform_int(pairs.size()));
    PatchPair item = augment(pairs[idx], augment_mode, rng);
    if (item.clean.height != probe.height || item.clean.width != probe.width)
      throw DimensionError("fill_batch: pair list mixes patch sizes");
    std::copy(item.clean.data.begin(), item.clean.data.end(), clean->sample(b));
    std::copy(item.degraded.data.begin(), item.degraded.data.end(), degraded->sample(b));
  }
}

double validation_l1(Restorer& restorer, const std::vector<PatchPair>& pairs) {
  if (pairs.empty()) throw ConfigError("validation_l1: empty pair list");
  double total = 0.0;
  size_t count = 0;
  for (const PatchPair& pair : pairs) {
    Tensor y = nn::tensor_from_image(pair.degraded);
    Tensor out = restorer.restore(y, nn::NormMode::frozen);
    const Image& ref = pair.clean;
    for (size_t i = 0; i < out.size(); ++i) total += std::abs(out.data[i] - ref.data[i]);
    count += out.size();
  }
  return total / static_cast<double>(count);
}

GanTrainResult train_generator(const std::vector<PatchPair>& pairs, Restorer* pretrained,
                               const GenConfig& gen_cfg, const DiscConfig& disc_cfg,
                               const GanTrainConfig& cfg, RngStream rng) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("train_generator: empty dataset");
  if (cfg.use_sup) {
    if (!pretrained)
      throw ConfigError("train_generator: supervised term needs a pretrained restorer");
    if (!pretrained->frozen())
      throw StateError("train_generator: pretrained restorer must be frozen");
  }

  GanTrainResult result;
  result.generator = std::make_unique<Generator>(gen_cfg, rng.substream("init_g"));
  if (cfg.use_adv) {
    result.discriminator =
        std::make_unique<Discriminator>(disc_cfg, rng.substream("init_d"));
  }
  Generator& gen = *result.generator;
  if (gen.params().trainable().empty())
    throw ConfigError("train_generator: generator has no trainable parameters");

  nn::Adam opt_g(gen.params().trainable(),
                 {cfg.lr_g0, cfg.beta1, cfg.beta2, 1e-8});
  std::unique_ptr<nn::Adam> opt_d;
  if (cfg.use_adv) {
    opt_d = std::make_unique<nn::Adam>(result.discriminator->params().trainable(),
                                       nn::AdamConfig{cfg.lr_d0, cfg.beta1, cfg.beta2,
                                                      1e-8});
  }

  std::unique_ptr<FreezeScope> freeze_restorer;
  if (pretrained) freeze_restorer = std::make_unique<FreezeScope>(pretrained->params());

  std::ofstream hist;
  if (!cfg.history_path.empty()) {
    hist.open(cfg.history_path);
    if (!hist) throw IoError("cannot open history file: " + cfg.history_path);
  }
  long cadence = cadence_or_default(cfg.checkpoint_every, cfg.total_iters);
  result.history.reserve(static_cast<size_t>(cfg.total_iters));

  for (long it = 0; it < cfg.total_iters; ++it) {
    double lr_g = nn::cosine_lr(it, cfg.total_iters, cfg.lr_g0, cfg.lr_g_min);
    double lr_d = nn::cosine_lr(it, cfg.total_iters, cfg.lr_d0, cfg.lr_d_min);
    opt_g.set_lr(lr_g);
    if (opt_d) opt_d->set_lr(lr_d);

    GanRecord rec;
    rec.step = it;
    rec.lr_g = lr_g;
    rec.lr_d = lr_d;

    if (cfg.use_adv) {
      Discriminator& disc = *result.discriminator;
      for (int k = 0; k < cfg.d_steps_per_g_step; ++k) {
        uint64_t tick = static_cast<uint64_t>(it) *
                            static_cast<uint64_t>(cfg.d_steps_per_g_step) +
                        static_cast<uint64_t>(k);
        RngStream bstream = rng.substream("d_batch", tick);
        Tensor clean, real;
        fill_batch(pairs, cfg.batch, cfg.augment, bstream, &clean, &real);
        RngStream sstream = rng.substream("d_sample", tick);
        Tensor fake = gen.generate(clean, sstream);

        Var clean_in = nn::constant(clean);
        Var d_real = disc.forward(clean_in, nn::constant(real));
        Var d_fake = disc.forward(clean_in, nn::constant(fake));
        Var loss_d = lsgan_d_loss(d_real, d_fake);
        require_finite(loss_d->val.data[0], "discriminator loss", it);
        opt_d->zero_grad();
        nn::backward(loss_d);
        opt_d->step();
        result.d_steps += 1;
        rec.loss_d = loss_d->val.data[0];
      }
    }

    {
      RngStream bstream = rng.substream("g_batch", static_cast<uint64_t>(it));
      Tensor clean, real;
      fill_batch(pairs, cfg.batch, cfg.augment, bstream, &clean, &real);
      RngStream sstream = rng.substream("g_sample", static_cast<uint64_t>(it));
      GenSample sample = gen.draw_sample(clean.n, clean.h, clean.w, sstream);

      std::unique_ptr<FreezeScope> freeze_disc;
      if (cfg.use_adv)
        freeze_disc = std::make_unique<FreezeScope>(result.discriminator->params());
      Var clean_in = nn::constant(clean);
      Var real_in = nn::constant(real);
      Var fake = gen.forward(clean_in, sample);
      Var loss;
      if (cfg.use_adv) {
        Var loss_adv = lsgan_g_loss(result.discriminator->forward(clean_in, fake));
        rec.loss_g_adv = loss_adv->val.data[0];
        loss = loss_adv;
      }
      if (cfg.use_sup) {
        Var loss_sup = supervised_loss(*pretrained, fake, real_in);
        rec.loss_sup = loss_sup->val.data[0];
        Var weighted = affine(loss_sup, cfg.lambda, 0.0);
        loss = loss ? add(loss, weighted) : weighted;
      }
      if (cfg.use_l1_direct) {
        Var direct = l1_loss(fake, real_in);
        Var weighted = affine(direct, cfg.lambda, 0.0);
        loss = loss ? add(loss, weighted) : weighted;
      }
      require_finite(loss->val.data[0], "generator loss", it);
      opt_g.zero_grad();
      nn::backward(loss);
      opt_g.step();
      result.g_steps += 1;
      rec.loss_total = loss->val.data[0];
    }

    result.history.push_back(rec);
    if (hist.is_open()) {
      nlohmann::json line{{"step", rec.step},          {"loss_d", rec.loss_d},
                          {"loss_g_adv", rec.loss_g_adv}, {"loss_sup", rec.loss_sup},
                          {"loss_total", rec.loss_total}, {"lr_g", rec.lr_g},
                          {"lr_d", rec.lr_d}};
      hist << line.dump() << "\n";
    }
    if (!cfg.checkpoint_dir.empty() &&
        ((it + 1) % cadence == 0 || it + 1 == cfg.total_iters)) {
      save_generator(cfg.checkpoint_dir + "/generator_" + std::to_string(it + 1) +
                         ".ckpt",
                     gen, it + 1);
      if (result.discriminator) {
        save_discriminator(cfg.checkpoint_dir + "/discriminator_" +
                               std::to_string(it + 1) + ".ckpt",
                           *result.discriminator, it + 1);
      }
    }
  }
  return result;
}

RestoreTrainResult train_restorer(const std::vector<PatchPair>& pairs,
                                  const RestorerConfig& arch,
                                  const RestoreTrainConfig& cfg, RngStream rng,
                                  const std::vector<PatchPair>& val_pairs) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("train_restorer: empty dataset");

  RestoreTrainResult result;
  result.restorer = std::make_unique<Restorer>(arch, rng.substream("init_r"));
  Restorer& restorer = *result.restorer;
  nn::Adam opt(restorer.params().trainable(), {cfg.lr0, cfg.beta1, cfg.beta2, 1e-8});

  long freeze_at =
      static_cast<long>(std::floor(cfg.bn_freeze_fraction *
                                   static_cast<double>(cfg.total_iters)));
  std::ofstream hist;
  if (!cfg.history_path.empty()) {
    hist.open(cfg.history_path);
    if (!hist) throw IoError("cannot open history file: " + cfg.history_path);
  }
  long cadence = cadence_or_default(cfg.checkpoint_every, cfg.total_iters);
  double best_val = std::numeric_limits<double>::infinity();
  result.history.reserve(static_cast<size_t>(cfg.total_iters));

  for (long it = 0; it < cfg.total_iters; ++it) {
    if (it >= freeze_at && !restorer.frozen() && restorer.stats_ready()) {
      restorer.freeze_bn();
      result.freeze_step = it;
      if (hist.is_open()) {
        hist << nlohmann::json{{"event", "freeze_bn"}, {"step", it}}.dump() << "\n";
      }
    }

    double lr = nn::cosine_lr(it, cfg.total_iters, cfg.lr0, cfg.lr_min);
    opt.set_lr(lr);

    RngStream bstream = rng.substream("batch", static_cast<uint64_t>(it));
    Tensor clean, degraded;
    fill_batch(pairs, cfg.batch, cfg.augment, bstream, &clean, &degraded);

    Var out = restorer.forward(nn::constant(degraded), nn::NormMode::minibatch);
    Var loss = l1_loss(out, nn::constant(clean));
    require_finite(loss->val.data[0], "restorer loss", it);
    opt.zero_grad();
    nn::backward(loss);
    opt.step();

    RestoreRecord rec{it, loss->val.data[0], lr, restorer.frozen()};
    result.history.push_back(rec);
    if (hist.is_open()) {
      hist << nlohmann::json{{"step", rec.step},
                             {"loss", rec.loss},
                             {"lr", rec.lr},
                             {"frozen", rec.frozen}}
                  .dump()
           << "\n";
    }

    if ((it + 1) % cadence == 0 || it + 1 == cfg.total_iters) {
      if (!val_pairs.empty()) {
        double val = validation_l1(restorer, val_pairs);
        if (hist.is_open()) {
          hist << nlohmann::json{{"event", "validation"}, {"step", it}, {"val_l1", val}}
                      .dump()
               << "\n";
        }
        if (val < best_val) {
          best_val = val;
          if (!cfg.checkpoint_dir.empty()) {
            save_restorer(cfg.checkpoint_dir + "/restorer_best.ckpt", restorer, it + 1);
          }
        }
      }
      if (!cfg.checkpoint_dir.empty()) {
        save_restorer(cfg.checkpoint_dir + "/restorer_" + std::to_string(it + 1) + ".ckpt",
                      restorer, it + 1);
      }
    }
  }
  result.best_val_loss = best_val;
  return result;
}

}  // namespace udc
