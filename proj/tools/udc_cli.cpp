// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end. Every subcommand takes --config and --seed, prints a
// human summary plus the full JSON report to stdout, and can mirror the JSON
// to a file. Exit codes: 0 ok, 1 usage/config/runtime, 2 integrity, 3 training
// abort.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "udc/ablation.hpp"
#include "udc/checkpoint.hpp"
#include "udc/closed_loop.hpp"
#include "udc/config.hpp"
#include "udc/dataset.hpp"
#include "udc/error.hpp"
#include "udc/report.hpp"
#include "udc/train.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 0;
  std::string json_out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  CLI::Option* opt = cmd->add_option("--config", args.config_path, "JSON config file");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "Random seed")->default_val("0");
  cmd->add_option("--json", args.json_out, "Also write the JSON report to this file");
}

json load_config_or_empty(const CommonArgs& args) {
  if (args.config_path.empty()) return json::object();
  return udc::load_json_file(args.config_path);
}

void emit(const json& report, const CommonArgs& args) {
  std::cout << report.dump(2) << "\n";
  if (!args.json_out.empty()) udc::save_json_file(args.json_out, report);
}

int run_count(const CommonArgs& args) {
  json cfg_json = load_config_or_empty(args);
  udc::RngStream rng(args.seed);
  json report;
  if (cfg_json.contains("gen")) {
    udc::GenConfig cfg = cfg_json.at("gen").get<udc::GenConfig>();
    udc::Generator gen(cfg, rng);
    report = json{{"model", "generator"},
                  {"config_hash", udc::config_hash(json(cfg))},
                  {"params", gen.params().scalar_count()}};
  } else if (cfg_json.contains("disc")) {
    udc::DiscConfig cfg = cfg_json.at("disc").get<udc::DiscConfig>();
    udc::Discriminator disc(cfg, rng);
    report = json{{"model", "discriminator"},
                  {"config_hash", udc::config_hash(json(cfg))},
                  {"params", disc.params().scalar_count()}};
  } else {
    udc::RestorerConfig cfg;
    if (cfg_json.contains("restorer"))
      cfg = cfg_json.at("restorer").get<udc::RestorerConfig>();
    else if (!cfg_json.empty())
      cfg = cfg_json.get<udc::RestorerConfig>();
    int h = cfg_json.value("height", 256);
    int w = cfg_json.value("width", 256);
    udc::Restorer restorer(cfg, rng);
    report = json{{"model", "restorer"},
                  {"config_hash", udc::config_hash(json(cfg))},
                  {"params", restorer.count_params()},
                  {"macs", restorer.count_macs(h, w)},
                  {"macs_height", h},
                  {"macs_width", w}};
  }
  std::printf("%s: %llu parameters\n", report.at("model").get<std::string>().c_str(),
              static_cast<unsigned long long>(report.at("params").get<size_t>()));
  emit(report, args);
  return 0;
}

int run_gen_dataset(const CommonArgs& args) {
  json cfg = load_config_or_empty(args);
  std::string out_dir = cfg.at("out_dir").get<std::string>();
  int count = cfg.value("count", 160);
  int height = cfg.value("height", 96);
  int width = cfg.value("width", 96);
  std::string degrader = cfg.value("degrader", "sgm");

  udc::RngStream rng(args.seed);
  std::vector<udc::Image> corpus =
      udc::synth_clean_corpus(count, height, width, rng.substream("corpus"));

  std::vector<udc::PatchPair> pairs;
  json degrader_config;
  if (degrader == "sgm") {
    udc::SgmConfig sgm;
    if (cfg.contains("sgm")) cfg.at("sgm").get_to(sgm);
    else if (cfg.contains("preset"))
      sgm = udc::oracle_preset(cfg.at("preset").get<std::string>());
    degrader_config = sgm;
    pairs = udc::degrade_corpus(corpus, sgm, rng.substream("degrade"));
  } else if (degrader == "generator") {
    std::string ckpt = cfg.at("generator_checkpoint").get<std::string>();
    std::unique_ptr<udc::Generator> gen = udc::load_generator(ckpt);
    degrader_config = json(gen->config());
    degrader_config["checkpoint"] = ckpt;
    pairs = udc::degrade_corpus(corpus, *gen, rng.substream("degrade"));
  } else {
    throw udc::ConfigError("degrader must be \"sgm\" or \"generator\"");
  }

  udc::DatasetManifest manifest =
      udc::write_dataset(pairs, out_dir, degrader, degrader_config, args.seed);
  json report{{"out_dir", out_dir},
              {"count", manifest.entries.size()},
              {"height", manifest.height},
              {"width", manifest.width},
              {"degrader", manifest.degrader},
              {"config_hash", manifest.config_hash},
              {"seed", args.seed}};
  std::printf("wrote %zu pairs to %s (degrader %s)\n", manifest.entries.size(),
              out_dir.c_str(), degrader.c_str());
  emit(report, args);
  return 0;
}

// Shared by train-restore and train-gen: dataset_dir + patch extraction keys.
std::vector<udc::PatchPair> load_patches(const json& cfg, udc::RngStream& rng,
                                         udc::SplitIndices* split_out,
                                         std::vector<udc::PatchPair>* pairs_out) {
  std::string dir = cfg.at("dataset_dir").get<std::string>();
  udc::DatasetManifest manifest = udc::load_manifest(dir + "/manifest.jsonl");
  std::vector<udc::PatchPair> pairs = udc::load_pairs(manifest, dir);
  udc::SplitIndices split =
      udc::split_indices(pairs.size(), cfg.value("val_permille", 100),
                         cfg.value("test_permille", 100), rng.substream("split"));
  std::vector<udc::PatchPair> train;
  train.reserve(split.train.size());
  for (size_t i : split.train) train.push_back(pairs[i]);
  int patch = cfg.value("patch", 64);
  int per_image = cfg.value("patches_per_image", 3);
  std::vector<udc::PatchPair> patches =
      udc::crop_dataset_patches(train, patch, per_image, rng.substream("crops"));
  if (split_out) *split_out = split;
  if (pairs_out) *pairs_out = std::move(pairs);
  return patches;
}

int run_train_restore(const CommonArgs& args) {
  json cfg = load_config_or_empty(args);
  udc::RngStream rng(args.seed);
  udc::SplitIndices split;
  std::vector<udc::PatchPair> pairs;
  std::vector<udc::PatchPair> patches = load_patches(cfg, rng, &split, &pairs);
  std::vector<udc::PatchPair> val, test;
  for (size_t i : split.val) val.push_back(pairs[i]);
  for (size_t i : split.test) test.push_back(pairs[i]);

  udc::RestorerConfig arch;
  if (cfg.contains("restorer")) cfg.at("restorer").get_to(arch);
  udc::RestoreTrainConfig train_cfg;
  if (cfg.contains("train")) cfg.at("train").get_to(train_cfg);
  std::string out_dir = cfg.value("out_dir", "");
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    if (train_cfg.history_path.empty())
      train_cfg.history_path = out_dir + "/history.jsonl";
    if (train_cfg.checkpoint_dir.empty()) train_cfg.checkpoint_dir = out_dir;
  }

  udc::RestoreTrainResult result =
      udc::train_restorer(patches, arch, train_cfg, rng.substream("train"), val);
  if (!result.restorer->frozen()) result.restorer->freeze_bn();
  if (!out_dir.empty())
    udc::save_restorer(out_dir + "/restorer_final.ckpt", *result.restorer,
                       train_cfg.total_iters);

  udc::EvalReport eval = udc::evaluate(*result.restorer, test.empty() ? val : test,
                                       "restorer");
  eval.seed = args.seed;
  json report{{"train_iters", train_cfg.total_iters},
              {"freeze_step", result.freeze_step},
              {"final_loss", result.history.back().loss},
              {"best_val_loss", result.best_val_loss},
              {"eval", udc::report_json(eval)}};
  std::printf("trained restorer for %ld iters; held-out psnr %.3f ssim %.4f\n",
              train_cfg.total_iters, eval.mean_psnr, eval.mean_ssim);
  emit(report, args);
  return 0;
}

int run_train_gen(const CommonArgs& args) {
  json cfg = load_config_or_empty(args);
  udc::RngStream rng(args.seed);
  std::vector<udc::PatchPair> patches = load_patches(cfg, rng, nullptr, nullptr);

  udc::GenConfig gen_cfg;
  if (cfg.contains("gen")) cfg.at("gen").get_to(gen_cfg);
  udc::DiscConfig disc_cfg;
  if (cfg.contains("disc")) cfg.at("disc").get_to(disc_cfg);
  udc::GanTrainConfig train_cfg;
  if (cfg.contains("train")) cfg.at("train").get_to(train_cfg);

  std::unique_ptr<udc::Restorer> restorer;
  if (cfg.contains("restorer_checkpoint")) {
    restorer = udc::load_restorer(cfg.at("restorer_checkpoint").get<std::string>());
    if (!restorer->frozen()) restorer->freeze_bn();
  } else if (train_cfg.use_sup) {
    throw udc::ConfigError(
        "train-gen: the supervised term needs restorer_checkpoint (or disable use_sup)");
  }

  std::string out_dir = cfg.value("out_dir", "");
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    if (train_cfg.history_path.empty())
      train_cfg.history_path = out_dir + "/history.jsonl";
    if (train_cfg.checkpoint_dir.empty()) train_cfg.checkpoint_dir = out_dir;
  }

  udc::GanTrainResult result = udc::train_generator(
      patches, restorer.get(), gen_cfg, disc_cfg, train_cfg, rng.substream("train"));
  if (!out_dir.empty())
    udc::save_generator(out_dir + "/generator_final.ckpt", *result.generator,
                        train_cfg.total_iters);

  int patch = cfg.value("patch", 64);
  udc::FlatFieldProbe probe =
      udc::probe_generator(*result.generator, patch, 8, cfg.value("probe_draws", 32),
                           0.5, rng.substream("probe"));
  json report{{"train_iters", train_cfg.total_iters},
              {"d_steps", result.d_steps},
              {"g_steps", result.g_steps},
              {"final_loss_total", result.history.back().loss_total},
              {"final_loss_d", result.history.back().loss_d},
              {"gamma_est", probe.gamma_est},
              {"noise_var_est", probe.noise_var_est}};
  std::printf("trained generator for %ld iters (%ld d-steps, %ld g-steps)\n",
              train_cfg.total_iters, result.d_steps, result.g_steps);
  emit(report, args);
  return 0;
}

int run_eval(const CommonArgs& args) {
  json cfg = load_config_or_empty(args);
  std::string dir = cfg.at("dataset_dir").get<std::string>();
  udc::DatasetManifest manifest = udc::load_manifest(dir + "/manifest.jsonl");
  std::vector<udc::PatchPair> pairs = udc::load_pairs(manifest, dir);
  std::unique_ptr<udc::Restorer> restorer =
      udc::load_restorer(cfg.at("restorer_checkpoint").get<std::string>());
  if (!restorer->frozen()) restorer->freeze_bn();
  udc::EvalReport eval =
      udc::evaluate(*restorer, pairs, cfg.value("label", "restorer"));
  eval.seed = args.seed;
  std::printf("evaluated %zu pairs: psnr %.3f ssim %.4f\n", pairs.size(),
              eval.mean_psnr, eval.mean_ssim);
  emit(udc::report_json(eval), args);
  return 0;
}

udc::ClosedLoopConfig closed_loop_config_from(const json& cfg) {
  udc::ClosedLoopConfig base;
  if (cfg.value("preset", "desk") == "desk") base = udc::desk_closed_loop_config();
  udc::from_json(cfg, base);
  return base;
}

int run_closed_loop_cmd(const CommonArgs& args, bool self_check_flag) {
  json cfg_json = load_config_or_empty(args);
  udc::ClosedLoopConfig cfg = closed_loop_config_from(cfg_json);
  if (self_check_flag) cfg.self_check = true;
  udc::ClosedLoopReport rep = udc::run_closed_loop(cfg, udc::RngStream(args.seed));
  std::printf("closed loop done in %.1fs: gamma (%.3f %.3f %.3f) vs (%.3f %.3f %.3f), "
              "noise var %.3g vs %.3g, transfer gap %.3f dB\n",
              rep.seconds, rep.gamma_est[0], rep.gamma_est[1], rep.gamma_est[2],
              rep.gamma_true[0], rep.gamma_true[1], rep.gamma_true[2],
              rep.noise_var_est, rep.noise_var_oracle_est, rep.restore_gap_db);
  emit(udc::closed_loop_json(rep), args);
  return 0;
}

int run_ablate(const CommonArgs& args) {
  json cfg_json = load_config_or_empty(args);
  udc::AblationSpec spec;
  if (cfg_json.contains("spec")) cfg_json.at("spec").get_to(spec);
  udc::ClosedLoopConfig base = closed_loop_config_from(
      cfg_json.value("base", json::object()));
  udc::ClosedLoopReport rep =
      udc::run_ablation(spec, base, udc::RngStream(args.seed));
  std::printf("ablation gen=%s restorer=%s: psnr %.3f (oracle-data %.3f), gap %.3f dB\n",
              udc::gen_variant_name(spec.gen).c_str(),
              udc::res_variant_name(spec.restorer).c_str(), rep.mpg_test_psnr,
              rep.oracle_test_psnr, rep.restore_gap_db);
  emit(udc::ablation_json(spec, rep), args);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"under-display camera degradation and restoration toolkit"};
  app.require_subcommand(1);

  CommonArgs count_args, gen_dataset_args, train_restore_args, train_gen_args,
      eval_args, closed_loop_args, ablate_args;
  bool self_check_flag = false;

  CLI::App* count_cmd =
      app.add_subcommand("count", "Parameter and MAC counts for a model config");
  add_common(count_cmd, count_args, false);

  CLI::App* gen_dataset_cmd =
      app.add_subcommand("gen-dataset", "Synthesize a clean corpus and degrade it");
  add_common(gen_dataset_cmd, gen_dataset_args);

  CLI::App* train_restore_cmd =
      app.add_subcommand("train-restore", "Train a restorer on a dataset");
  add_common(train_restore_cmd, train_restore_args);

  CLI::App* train_gen_cmd =
      app.add_subcommand("train-gen", "Train the degradation generator adversarially");
  add_common(train_gen_cmd, train_gen_args);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a restorer on a dataset");
  add_common(eval_cmd, eval_args);

  CLI::App* closed_loop_cmd = app.add_subcommand(
      "closed-loop", "Full oracle -> generator -> restorer experiment");
  add_common(closed_loop_cmd, closed_loop_args, false);
  closed_loop_cmd->add_flag("--self-check", self_check_flag,
                            "Replace the learned degrader with a reseeded oracle");

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "Closed loop with one component swapped");
  add_common(ablate_cmd, ablate_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (count_cmd->parsed()) return run_count(count_args);
    if (gen_dataset_cmd->parsed()) return run_gen_dataset(gen_dataset_args);
    if (train_restore_cmd->parsed()) return run_train_restore(train_restore_args);
    if (train_gen_cmd->parsed()) return run_train_gen(train_gen_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (closed_loop_cmd->parsed())
      return run_closed_loop_cmd(closed_loop_args, self_check_flag);
    if (ablate_cmd->parsed()) return run_ablate(ablate_args);
  } catch (const udc::IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return 2;
  } catch (const udc::TrainingAbort& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 3;
  } catch (const udc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
