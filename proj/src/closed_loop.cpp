// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/closed_loop.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "udc/checkpoint.hpp"
#include "udc/config.hpp"
#include "udc/error.hpp"
#include "udc/nn/tensor.hpp"

namespace udc {

void DeskDataConfig::validate() const {
  if (corpus < 2) throw ConfigError("corpus must hold at least 2 images");
  if (height < 16 || width < 16) throw ConfigError("images must be at least 16x16");
  if (height % 4 != 0 || width % 4 != 0)
    throw ConfigError("image sides must be divisible by 4");
  if (patch < 16 || patch % 4 != 0)
    throw ConfigError("patch must be >= 16 and divisible by 4");
  if (patch > height || patch > width) throw ConfigError("patch larger than image");
  if (patches_per_image < 1) throw ConfigError("patches_per_image must be >= 1");
  if (val_permille <= 0 || test_permille <= 0 ||
      val_permille + test_permille >= 1000)
    throw ConfigError("split needs nonempty train, val and test parts");
}

void ClosedLoopConfig::validate() const {
  data.validate();
  oracle.validate();
  gen.validate();
  disc.validate();
  restorer.validate();
  pretrain.validate();
  gan.validate();
  transfer.validate();
  if (probe_draws < 2) throw ConfigError("probe_draws must be >= 2");
  if (probe_level <= 0.0 || probe_level > 1.0)
    throw ConfigError("probe_level must lie in (0, 1]");
  if (probe_margin < 0 || 2 * probe_margin >= data.patch)
    throw ConfigError("probe_margin leaves no interior");
}

void to_json(nlohmann::json& j, const DeskDataConfig& c) {
  j = nlohmann::json{{"corpus", c.corpus},
                     {"height", c.height},
                     {"width", c.width},
                     {"patch", c.patch},
                     {"patches_per_image", c.patches_per_image},
                     {"val_permille", c.val_permille},
                     {"test_permille", c.test_permille}};
}

void from_json(const nlohmann::json& j, DeskDataConfig& c) {
  DeskDataConfig d;
  c.corpus = j.value("corpus", d.corpus);
  c.height = j.value("height", d.height);
  c.width = j.value("width", d.width);
  c.patch = j.value("patch", d.patch);
  c.patches_per_image = j.value("patches_per_image", d.patches_per_image);
  c.val_permille = j.value("val_permille", d.val_permille);
  c.test_permille = j.value("test_permille", d.test_permille);
}

void to_json(nlohmann::json& j, const ClosedLoopConfig& c) {
  j = nlohmann::json{{"data", c.data},
                     {"oracle", c.oracle},
                     {"gen", c.gen},
                     {"disc", c.disc},
                     {"restorer", c.restorer},
                     {"pretrain", c.pretrain},
                     {"gan", c.gan},
                     {"transfer", c.transfer},
                     {"probe_draws", c.probe_draws},
                     {"probe_level", c.probe_level},
                     {"probe_margin", c.probe_margin},
                     {"self_check", c.self_check}};
}

void from_json(const nlohmann::json& j, ClosedLoopConfig& c) {
  ClosedLoopConfig d;
  if (j.contains("data")) j.at("data").get_to(c.data);
  if (j.contains("oracle")) j.at("oracle").get_to(c.oracle);
  if (j.contains("gen")) j.at("gen").get_to(c.gen);
  if (j.contains("disc")) j.at("disc").get_to(c.disc);
  if (j.contains("restorer")) j.at("restorer").get_to(c.restorer);
  if (j.contains("pretrain")) j.at("pretrain").get_to(c.pretrain);
  if (j.contains("gan")) j.at("gan").get_to(c.gan);
  if (j.contains("transfer")) j.at("transfer").get_to(c.transfer);
  c.probe_draws = j.value("probe_draws", d.probe_draws);
  c.probe_level = j.value("probe_level", d.probe_level);
  c.probe_margin = j.value("probe_margin", d.probe_margin);
  c.self_check = j.value("self_check", d.self_check);
  c.work_dir = j.value("work_dir", d.work_dir);
}

namespace {

// Accumulates interior samples of repeated flat-field draws and reduces them
// to per-channel gains and a residual variance (unbiased across draws).
struct FlatAccumulator {
  int size, margin, draws;
  int side;
  size_t interior;
  std::vector<double> values;  // draws x 3 x interior

  FlatAccumulator(int size_, int margin_, int draws_)
      : size(size_), margin(margin_), draws(draws_), side(size_ - 2 * margin_),
        interior(static_cast<size_t>(side) * side),
        values(static_cast<size_t>(draws_) * 3 * interior) {}

  void record(int draw, const Image& img) {
    for (int c = 0; c < 3; ++c) {
      double* dst = values.data() + (static_cast<size_t>(draw) * 3 + c) * interior;
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          dst[static_cast<size_t>(y) * side + x] = img.at(y + margin, x + margin, c);
    }
  }

  FlatFieldProbe reduce(double level) const {
    FlatFieldProbe probe;
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0;
      for (int k = 0; k < draws; ++k) {
        const double* src = values.data() + (static_cast<size_t>(k) * 3 + c) * interior;
        for (size_t i = 0; i < interior; ++i) sum += src[i];
      }
      probe.gamma_est[c] = sum / (static_cast<double>(draws) * interior) / level;
    }
    double var_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      for (size_t i = 0; i < interior; ++i) {
        double mean = 0.0;
        for (int k = 0; k < draws; ++k)
          mean += values[(static_cast<size_t>(k) * 3 + c) * interior + i];
        mean /= draws;
        double acc = 0.0;
        for (int k = 0; k < draws; ++k) {
          double d = values[(static_cast<size_t>(k) * 3 + c) * interior + i] - mean;
          acc += d * d;
        }
        var_sum += acc / (draws - 1);
      }
    }
    probe.noise_var_est = var_sum / (3.0 * interior);
    return probe;
  }
};

std::vector<PatchPair> gather(const std::vector<PatchPair>& all,
                              const std::vector<size_t>& idx) {
  std::vector<PatchPair> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(all[i]);
  return out;
}

std::vector<Image> gather_clean(const std::vector<Image>& all,
                                const std::vector<size_t>& idx) {
  std::vector<Image> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(all[i]);
  return out;
}

void route_outputs(RestoreTrainConfig& c, const std::string& dir,
                   const std::string& tag) {
  if (dir.empty()) return;
  c.history_path = dir + "/" + tag + "_history.jsonl";
}

void route_outputs(GanTrainConfig& c, const std::string& dir, const std::string& tag) {
  if (dir.empty()) return;
  c.history_path = dir + "/" + tag + "_history.jsonl";
}

}  // namespace

FlatFieldProbe probe_generator(const Generator& gen, int size, int margin, int draws,
                               double level, RngStream rng) {
  FlatAccumulator acc(size, margin, draws);
  nn::Tensor flat = nn::Tensor::full(1, 3, size, size, level);
  for (int k = 0; k < draws; ++k) {
    RngStream s = rng.substream("draw", static_cast<uint64_t>(k));
    nn::Tensor y = gen.generate(flat, s);
    acc.record(k, nn::image_from_tensor(y, 0));
  }
  return acc.reduce(level);
}

FlatFieldProbe probe_oracle(const SgmConfig& cfg, int size, int margin, int draws,
                            double level, RngStream rng) {
  FlatAccumulator acc(size, margin, draws);
  Image flat(size, size, level);
  for (int k = 0; k < draws; ++k) {
    RngStream s = rng.substream("draw", static_cast<uint64_t>(k));
    acc.record(k, sgm_degrade(flat, cfg, s));
  }
  return acc.reduce(level);
}

double oracle_flat_variance(const SgmConfig& cfg, double level) {
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double signal = cfg.gamma[c] * level;
    total += cfg.sigma_read * cfg.sigma_read + cfg.sigma_shot * std::max(signal, 0.0);
  }
  double var = total / 3.0;
  if (cfg.bit_depth > 0) {
    double q = 1.0 / ((1 << cfg.bit_depth) - 1);
    var += q * q / 12.0;
  }
  return var;
}

nlohmann::json closed_loop_json(const ClosedLoopReport& r) {
  return nlohmann::json{{"seed", r.seed},
                        {"config_hash", r.config_hash},
                        {"self_check", r.self_check},
                        {"gamma_true", r.gamma_true},
                        {"gamma_est", r.gamma_est},
                        {"noise_var_analytic", r.noise_var_analytic},
                        {"noise_var_oracle_est", r.noise_var_oracle_est},
                        {"noise_var_est", r.noise_var_est},
                        {"mpg_test_psnr", r.mpg_test_psnr},
                        {"oracle_test_psnr", r.oracle_test_psnr},
                        {"mpg_test_ssim", r.mpg_test_ssim},
                        {"oracle_test_ssim", r.oracle_test_ssim},
                        {"restore_gap_db", r.restore_gap_db},
                        {"pretrain_loss", r.pretrain_loss},
                        {"gan_loss_total", r.gan_loss_total},
                        {"seconds", r.seconds}};
}

ClosedLoopReport run_closed_loop(const ClosedLoopConfig& cfg, RngStream rng) {
  cfg.validate();
  auto started = std::chrono::steady_clock::now();
  if (!cfg.work_dir.empty()) std::filesystem::create_directories(cfg.work_dir);

  ClosedLoopReport rep;
  rep.seed = rng.seed();
  rep.config_hash = config_hash(nlohmann::json(cfg));
  rep.self_check = cfg.self_check;
  rep.gamma_true = cfg.oracle.gamma;
  rep.noise_var_analytic = oracle_flat_variance(cfg.oracle, cfg.probe_level);

  std::vector<Image> corpus = synth_clean_corpus(cfg.data.corpus, cfg.data.height,
                                                 cfg.data.width, rng.substream("corpus"));
  std::vector<PatchPair> oracle_pairs =
      degrade_corpus(corpus, cfg.oracle, rng.substream("oracle_data"));
  SplitIndices split = split_indices(corpus.size(), cfg.data.val_permille,
                                     cfg.data.test_permille, rng.substream("split"));
  std::vector<PatchPair> train_pairs = gather(oracle_pairs, split.train);
  std::vector<PatchPair> val_pairs = gather(oracle_pairs, split.val);
  std::vector<PatchPair> test_pairs = gather(oracle_pairs, split.test);
  std::vector<Image> train_clean = gather_clean(corpus, split.train);

  std::vector<PatchPair> patches_a =
      crop_dataset_patches(train_pairs, cfg.data.patch, cfg.data.patches_per_image,
                           rng.substream("crops_a"));

  rep.noise_var_oracle_est =
      probe_oracle(cfg.oracle, cfg.data.patch, cfg.probe_margin, cfg.probe_draws,
                   cfg.probe_level, rng.substream("probe_oracle"))
          .noise_var_est;

  std::vector<PatchPair> model_pairs;
  if (cfg.self_check) {
    // Fresh noise realizations from the same oracle stand in for the learned
    // degrader; transfer losses then bound everything but model error.
    model_pairs = degrade_corpus(train_clean, cfg.oracle, rng.substream("model_data"));
    FlatFieldProbe probe =
        probe_oracle(cfg.oracle, cfg.data.patch, cfg.probe_margin, cfg.probe_draws,
                     cfg.probe_level, rng.substream("probe_gen"));
    rep.gamma_est = probe.gamma_est;
    rep.noise_var_est = probe.noise_var_est;
  } else {
    RestoreTrainConfig pretrain_cfg = cfg.pretrain;
    route_outputs(pretrain_cfg, cfg.work_dir, "pretrain");
    RestoreTrainResult pre = train_restorer(patches_a, cfg.restorer, pretrain_cfg,
                                            rng.substream("pretrain"), val_pairs);
    rep.pretrain_loss.reserve(pre.history.size());
    for (const RestoreRecord& r : pre.history) rep.pretrain_loss.push_back(r.loss);
    if (!pre.restorer->frozen()) pre.restorer->freeze_bn();

    GanTrainConfig gan_cfg = cfg.gan;
    route_outputs(gan_cfg, cfg.work_dir, "gan");
    GanTrainResult gan = train_generator(patches_a, pre.restorer.get(), cfg.gen,
                                         cfg.disc, gan_cfg, rng.substream("gan"));
    rep.gan_loss_total.reserve(gan.history.size());
    for (const GanRecord& r : gan.history) rep.gan_loss_total.push_back(r.loss_total);

    FlatFieldProbe probe =
        probe_generator(*gan.generator, cfg.data.patch, cfg.probe_margin,
                        cfg.probe_draws, cfg.probe_level, rng.substream("probe_gen"));
    rep.gamma_est = probe.gamma_est;
    rep.noise_var_est = probe.noise_var_est;

    model_pairs = degrade_corpus(train_clean, *gan.generator,
                                 rng.substream("model_data"));
    if (!cfg.work_dir.empty()) {
      save_generator(cfg.work_dir + "/generator.ckpt", *gan.generator,
                     gan.g_steps);
    }
  }

  std::vector<PatchPair> patches_b =
      crop_dataset_patches(model_pairs, cfg.data.patch, cfg.data.patches_per_image,
                           rng.substream("crops_b"));

  RestoreTrainConfig transfer_cfg = cfg.transfer;
  route_outputs(transfer_cfg, cfg.work_dir, "transfer_model");
  RestoreTrainResult from_model = train_restorer(patches_b, cfg.restorer, transfer_cfg,
                                                 rng.substream("transfer"), {});
  route_outputs(transfer_cfg, cfg.work_dir, "transfer_oracle");
  RestoreTrainResult from_oracle = train_restorer(patches_a, cfg.restorer, transfer_cfg,
                                                  rng.substream("transfer"), {});
  if (!from_model.restorer->frozen()) from_model.restorer->freeze_bn();
  if (!from_oracle.restorer->frozen()) from_oracle.restorer->freeze_bn();

  EvalReport eval_model = evaluate(*from_model.restorer, test_pairs, "restorer_model");
  EvalReport eval_oracle = evaluate(*from_oracle.restorer, test_pairs, "restorer_oracle");
  rep.mpg_test_psnr = eval_model.mean_psnr;
  rep.mpg_test_ssim = eval_model.mean_ssim;
  rep.oracle_test_psnr = eval_oracle.mean_psnr;
  rep.oracle_test_ssim = eval_oracle.mean_ssim;
  rep.restore_gap_db = eval_oracle.mean_psnr - eval_model.mean_psnr;

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              started)
                    .count();
  if (!cfg.work_dir.empty())
    save_json_file(cfg.work_dir + "/closed_loop_report.json", closed_loop_json(rep));
  return rep;
}

SgmConfig oracle_preset(const std::string& name) {
  SgmConfig cfg;
  cfg.psf_size = 9;
  cfg.psf = make_preset_psf(9);
  cfg.bit_depth = 8;
  if (name == "poled") {
    cfg.gamma = {0.30, 0.35, 0.40};
    cfg.sigma_read = 0.02;
    cfg.sigma_shot = 0.010;
  } else if (name == "toled") {
    cfg.gamma = {0.85, 0.90, 0.95};
    cfg.sigma_read = 0.01;
    cfg.sigma_shot = 0.004;
  } else {
    throw ConfigError("unknown oracle preset: " + name);
  }
  return cfg;
}

ClosedLoopConfig desk_closed_loop_config() {
  ClosedLoopConfig cfg;
  cfg.data.corpus = 160;
  cfg.data.height = 96;
  cfg.data.width = 96;
  cfg.data.patch = 64;
  cfg.data.patches_per_image = 3;
  cfg.data.val_permille = 100;
  cfg.data.test_permille = 100;

  cfg.oracle = oracle_preset("poled");

  cfg.gen.bright_width = 8;
  cfg.gen.bright_up = 4;
  cfg.gen.blur_width = 16;
  cfg.gen.noise_width = 16;

  cfg.disc.widths = {12, 24, 48};

  cfg.restorer.widths = {12, 16, 20, 16, 12};
  cfg.restorer.blocks = {1, 1, 1, 1, 1};

  cfg.pretrain.total_iters = 600;
  cfg.pretrain.batch = 8;
  cfg.pretrain.lr0 = 1e-3;
  cfg.pretrain.lr_min = 1e-5;
  cfg.pretrain.bn_freeze_fraction = 0.8;
  cfg.pretrain.augment = AugmentMode::flips_and_rotations;

  cfg.gan.total_iters = 1000;
  cfg.gan.batch = 4;
  cfg.gan.lr_g0 = 5e-4;
  cfg.gan.lr_g_min = 5e-6;
  cfg.gan.lr_d0 = 1e-3;
  cfg.gan.lr_d_min = 1e-5;
  cfg.gan.lambda = 10.0;

  cfg.transfer.total_iters = 1200;
  cfg.transfer.batch = 8;
  cfg.transfer.lr0 = 1e-3;
  cfg.transfer.lr_min = 1e-5;
  cfg.transfer.bn_freeze_fraction = 0.8;
  cfg.transfer.augment = AugmentMode::flips_and_rotations;

  cfg.probe_draws = 32;
  cfg.probe_level = 0.5;
  cfg.probe_margin = 8;
  return cfg;
}

}  // namespace udc
