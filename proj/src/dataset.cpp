// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "udc/config.hpp"
#include "udc/error.hpp"
#include "udc/nn/tensor.hpp"

namespace udc {

namespace {

constexpr double kPi = 3.14159265358979323846;

void add_gradient(Image& img, RngStream& rng) {
  for (int c = 0; c < 3; ++c) {
    double base = rng.uniform(0.15, 0.85);
    double gx = rng.uniform(-0.35, 0.35);
    double gy = rng.uniform(-0.35, 0.35);
    for (int y = 0; y < img.height; ++y) {
      double fy = static_cast<double>(y) / img.height;
      for (int x = 0; x < img.width; ++x) {
        double fx = static_cast<double>(x) / img.width;
        img.at(y, x, c) = base + gx * fx + gy * fy;
      }
    }
  }
}

void add_plaid(Image& img, RngStream& rng) {
  double fx = rng.uniform(1.0, 6.0);
  double fy = rng.uniform(1.0, 6.0);
  double px = rng.uniform01() * 2.0 * kPi;
  double py = rng.uniform01() * 2.0 * kPi;
  double amp[3];
  for (double& a : amp) a = rng.uniform(0.02, 0.12);
  for (int y = 0; y < img.height; ++y) {
    double sy = std::sin(2.0 * kPi * fy * y / img.height + py);
    for (int x = 0; x < img.width; ++x) {
      double v = std::sin(2.0 * kPi * fx * x / img.width + px) * sy;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp[c] * v;
    }
  }
}

void add_shape(Image& img, RngStream& rng) {
  bool ellipse = rng.uniform01() < 0.5;
  double cx = rng.uniform(0.0, img.width);
  double cy = rng.uniform(0.0, img.height);
  double rx = rng.uniform(img.width * 0.05, img.width * 0.35);
  double ry = rng.uniform(img.height * 0.05, img.height * 0.35);
  double alpha = rng.uniform(0.4, 1.0);
  double color[3];
  for (double& c : color) c = rng.uniform01();
  int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
  int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + ry)));
  int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
  int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + rx)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (ellipse) {
        double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy > 1.0) continue;
      }
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = (1.0 - alpha) * img.at(y, x, c) + alpha * color[c];
    }
  }
}

// Soft highlight; these are what a point light smears into after diffraction,
// so the corpus needs plenty of them.
void add_blob(Image& img, RngStream& rng) {
  double cx = rng.uniform(0.0, img.width);
  double cy = rng.uniform(0.0, img.height);
  double sigma = rng.uniform(1.5, img.width / 6.0);
  double amp = rng.uniform(0.2, 1.0);
  double tint[3];
  for (double& t : tint) t = rng.uniform(0.7, 1.0);
  double inv = 1.0 / (2.0 * sigma * sigma);
  int reach = static_cast<int>(std::ceil(3.0 * sigma));
  int y0 = std::max(0, static_cast<int>(cy) - reach);
  int y1 = std::min(img.height - 1, static_cast<int>(cy) + reach);
  int x0 = std::max(0, static_cast<int>(cx) - reach);
  int x1 = std::min(img.width - 1, static_cast<int>(cx) + reach);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      double g = amp * std::exp(-d2 * inv);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) += g * tint[c];
    }
  }
}

void add_grain(Image& img, RngStream& rng) {
  double amp = rng.uniform(0.02, 0.08);
  Image noise(img.height, img.width);
  for (double& v : noise.data) v = amp * rng.uniform_sym();
  static const std::vector<double> box(9, 1.0 / 9.0);
  Image smooth = convolve_psf(noise, box, 3);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] += smooth.data[i];
}

std::string entry_name(size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05zu.png", index);
  return buf;
}

std::string hash_hex(uint64_t h) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace

Image synth_clean_image(int height, int width, RngStream& rng) {
  if (height < 8 || width < 8) throw ConfigError("synthetic images must be at least 8x8");
  Image img(height, width);
  add_gradient(img, rng);
  if (rng.uniform01() < 0.5) add_plaid(img, rng);
  int shapes = 3 + static_cast<int>(rng.uniform_int(6));
  for (int i = 0; i < shapes; ++i) add_shape(img, rng);
  int blobs = 1 + static_cast<int>(rng.uniform_int(4));
  for (int i = 0; i < blobs; ++i) add_blob(img, rng);
  add_grain(img, rng);
  return quantize(img, 8);
}

std::vector<Image> synth_clean_corpus(int count, int height, int width, RngStream rng) {
  if (count < 1) throw ConfigError("corpus count must be >= 1");
  std::vector<Image> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    RngStream s = rng.substream("image", static_cast<uint64_t>(i));
    out.push_back(synth_clean_image(height, width, s));
  }
  return out;
}

std::vector<PatchPair> degrade_corpus(const std::vector<Image>& clean,
                                      const SgmConfig& cfg, RngStream rng) {
  cfg.validate();
  std::vector<PatchPair> out;
  out.reserve(clean.size());
  for (size_t i = 0; i < clean.size(); ++i) {
    RngStream s = rng.substream("image", static_cast<uint64_t>(i));
    PatchPair pair;
    pair.clean = clean[i];
    pair.degraded = quantize(sgm_degrade(clean[i], cfg, s), 8);
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<PatchPair> degrade_corpus(const std::vector<Image>& clean,
                                      const Generator& gen, RngStream rng) {
  std::vector<PatchPair> out;
  out.reserve(clean.size());
  for (size_t i = 0; i < clean.size(); ++i) {
    RngStream s = rng.substream("image", static_cast<uint64_t>(i));
    PatchPair pair;
    pair.clean = clean[i];
    nn::Tensor x = nn::tensor_from_image(clean[i]);
    nn::Tensor y = gen.generate(x, s);
    pair.degraded = quantize(nn::image_from_tensor(y, 0), 8);
    out.push_back(std::move(pair));
  }
  return out;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for hashing: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  return hash_hex(fnv1a64(bytes.data(), bytes.size()));
}

DatasetManifest write_dataset(const std::vector<PatchPair>& pairs,
                              const std::string& dir, const std::string& degrader,
                              const nlohmann::json& degrader_config, uint64_t seed) {
  if (pairs.empty()) throw ConfigError("write_dataset: no pairs");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "clean");
  fs::create_directories(fs::path(dir) / "degraded");

  DatasetManifest m;
  m.degrader = degrader;
  m.degrader_config = degrader_config;
  m.config_hash = config_hash(degrader_config);
  m.seed = seed;
  m.height = pairs.front().clean.height;
  m.width = pairs.front().clean.width;
  m.entries.reserve(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    DatasetEntry e;
    e.clean_path = "clean/" + entry_name(i);
    e.degraded_path = "degraded/" + entry_name(i);
    save_image(pairs[i].clean, dir + "/" + e.clean_path);
    save_image(pairs[i].degraded, dir + "/" + e.degraded_path);
    e.clean_hash = file_checksum(dir + "/" + e.clean_path);
    e.degraded_hash = file_checksum(dir + "/" + e.degraded_path);
    m.entries.push_back(std::move(e));
  }
  save_manifest(dir + "/manifest.jsonl", m);
  return m;
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  nlohmann::json meta{{"kind", "udc-dataset"},   {"version", 1},
                      {"degrader", m.degrader},  {"config", m.degrader_config},
                      {"config_hash", m.config_hash}, {"seed", m.seed},
                      {"height", m.height},      {"width", m.width},
                      {"count", m.entries.size()}};
  out << meta.dump() << "\n";
  for (const DatasetEntry& e : m.entries) {
    nlohmann::json line{{"clean", e.clean_path},
                        {"degraded", e.degraded_path},
                        {"clean_hash", e.clean_hash},
                        {"degraded_hash", e.degraded_hash}};
    out << line.dump() << "\n";
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty manifest: " + path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("bad manifest header in " + path + ": " + e.what());
  }
  if (meta.value("kind", "") != "udc-dataset")
    throw FormatError("not a dataset manifest: " + path);

  DatasetManifest m;
  m.degrader = meta.value("degrader", "");
  m.degrader_config = meta.value("config", nlohmann::json::object());
  m.config_hash = meta.value("config_hash", "");
  m.seed = meta.value("seed", uint64_t{0});
  m.height = meta.value("height", 0);
  m.width = meta.value("width", 0);
  size_t count = meta.value("count", size_t{0});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("bad manifest entry in " + path + ": " + e.what());
    }
    DatasetEntry e;
    e.clean_path = j.at("clean").get<std::string>();
    e.degraded_path = j.at("degraded").get<std::string>();
    e.clean_hash = j.value("clean_hash", "");
    e.degraded_hash = j.value("degraded_hash", "");
    m.entries.push_back(std::move(e));
  }
  if (count != 0 && count != m.entries.size())
    throw IntegrityError("manifest count mismatch in " + path + ": header says " +
                         std::to_string(count) + ", found " +
                         std::to_string(m.entries.size()));
  return m;
}

std::vector<PatchPair> load_pairs(const DatasetManifest& m, const std::string& dir) {
  std::vector<PatchPair> out;
  out.reserve(m.entries.size());
  for (const DatasetEntry& e : m.entries) {
    std::string cpath = dir + "/" + e.clean_path;
    std::string dpath = dir + "/" + e.degraded_path;
    if (!e.clean_hash.empty() && file_checksum(cpath) != e.clean_hash)
      throw IntegrityError("checksum mismatch: " + cpath);
    if (!e.degraded_hash.empty() && file_checksum(dpath) != e.degraded_hash)
      throw IntegrityError("checksum mismatch: " + dpath);
    PatchPair pair;
    pair.clean = load_image(cpath);
    pair.degraded = load_image(dpath);
    if (!pair.clean.same_shape(pair.degraded))
      throw IntegrityError("pair shape mismatch: " + cpath);
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<PatchPair> crop_dataset_patches(const std::vector<PatchPair>& pairs,
                                            int patch, int per_image, RngStream rng) {
  if (patch < 1 || per_image < 1)
    throw ConfigError("patch size and per-image count must be >= 1");
  std::vector<PatchPair> out;
  out.reserve(pairs.size() * static_cast<size_t>(per_image));
  for (size_t i = 0; i < pairs.size(); ++i) {
    RngStream s = rng.substream("crop", static_cast<uint64_t>(i));
    std::vector<PatchPair> crops =
        crop_patches(pairs[i].clean, pairs[i].degraded, patch, per_image, s);
    for (PatchPair& c : crops) out.push_back(std::move(c));
  }
  return out;
}

SplitIndices split_indices(size_t count, int val_permille, int test_permille,
                           RngStream rng) {
  if (val_permille < 0 || test_permille < 0 || val_permille + test_permille > 1000)
    throw ConfigError("split weights must be nonnegative and sum to <= 1000");
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;
  RngStream s = rng.substream("split");
  for (size_t i = count; i > 1; --i) {
    size_t j = static_cast<size_t>(s.uniform_int(i));
    std::swap(order[i - 1], order[j]);
  }
  size_t n_val = count * static_cast<size_t>(val_permille) / 1000;
  size_t n_test = count * static_cast<size_t>(test_permille) / 1000;
  SplitIndices out;
  out.val.assign(order.begin(), order.begin() + n_val);
  out.test.assign(order.begin() + n_val, order.begin() + n_val + n_test);
  out.train.assign(order.begin() + n_val + n_test, order.end());
  return out;
}

}  // namespace udc
