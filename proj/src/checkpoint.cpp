// Copyright 2026 the udcsim authors
// SPDX-License-Identifier: Apache-2.0

#include "udc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "udc/config.hpp"
#include "udc/error.hpp"

namespace udc {

namespace {

constexpr char kMagic[8] = {'U', 'D', 'C', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_registry(const std::string& path, const nn::ParamRegistry& reg,
                   const CheckpointMeta& meta) {
  nlohmann::json dir = nlohmann::json::array();
  uint64_t offset = 0;
  auto params = reg.all();
  for (const nn::Parameter* p : params) {
    dir.push_back({{"name", p->name},
                   {"shape", {p->value.n, p->value.c, p->value.h, p->value.w}},
                   {"offset", offset},
                   {"count", p->value.size()},
                   {"trainable", p->trainable}});
    offset += p->value.size();
  }
  nlohmann::json header{{"format_version", 1}, {"layout", "f64le"},
                        {"kind", meta.kind},   {"step", meta.step},
                        {"arch", meta.arch},   {"extras", meta.extras},
                        {"tensors", dir}};
  std::string hbytes = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  uint64_t hlen = hbytes.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hbytes.data(), static_cast<std::streamsize>(hbytes.size()));
  for (const nn::Parameter* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write on checkpoint: " + path);
}

nlohmann::json read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a checkpoint file: " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen == 0 || hlen > (1u << 30))
    throw FormatError("corrupt checkpoint header: " + path);
  std::string hbytes(hlen, '\0');
  in.read(hbytes.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw FormatError("truncated checkpoint header: " + path);
  try {
    return nlohmann::json::parse(hbytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("invalid checkpoint header json: " + std::string(e.what()));
  }
}

CheckpointMeta load_registry(const std::string& path, nn::ParamRegistry& reg) {
  nlohmann::json header = read_checkpoint_header(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  uint64_t hlen = header.dump().size();
  // Header length comes from the file, not from a re-dump.
  in.seekg(8);
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::streamoff payload = static_cast<std::streamoff>(8 + sizeof(uint64_t) + hlen);

  const auto& dir = header.at("tensors");
  auto params = reg.all();
  if (dir.size() != params.size())
    throw IntegrityError("checkpoint tensor count differs from model");
  for (const auto& entry : dir) {
    std::string name = entry.at("name").get<std::string>();
    nn::Parameter* p = reg.find(name);
    if (!p) throw IntegrityError("checkpoint has unknown tensor: " + name);
    auto shape = entry.at("shape").get<std::array<int, 4>>();
    if (shape[0] != p->value.n || shape[1] != p->value.c || shape[2] != p->value.h ||
        shape[3] != p->value.w)
      throw IntegrityError("checkpoint shape mismatch for tensor: " + name);
    uint64_t offset = entry.at("offset").get<uint64_t>();
    uint64_t count = entry.at("count").get<uint64_t>();
    if (count != p->value.size())
      throw IntegrityError("checkpoint count mismatch for tensor: " + name);
    in.seekg(payload + static_cast<std::streamoff>(offset * sizeof(double)));
    in.read(reinterpret_cast<char*>(p->value.data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw IntegrityError("truncated checkpoint payload at tensor: " + name);
  }

  CheckpointMeta meta;
  meta.kind = header.value("kind", "");
  meta.step = header.value("step", 0L);
  meta.arch = header.value("arch", nlohmann::json::object());
  meta.extras = header.value("extras", nlohmann::json::object());
  return meta;
}

uint64_t registry_checksum(const nn::ParamRegistry& reg) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const nn::Parameter* p : reg.all()) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->value.data.data(), p->value.size() * sizeof(double), h);
  }
  return h;
}

void save_generator(const std::string& path, const Generator& gen, long step) {
  CheckpointMeta meta;
  meta.kind = "generator";
  meta.step = step;
  meta.arch = gen.config();
  save_registry(path, gen.params(), meta);
}

std::unique_ptr<Generator> load_generator(const std::string& path, long* step) {
  nlohmann::json header = read_checkpoint_header(path);
  if (header.value("kind", "") != "generator")
    throw IntegrityError("checkpoint is not a generator: " + path);
  GenConfig cfg = header.at("arch").get<GenConfig>();
  auto gen = std::make_unique<Generator>(cfg, RngStream(0));
  CheckpointMeta meta = load_registry(path, gen->params());
  if (step) *step = meta.step;
  return gen;
}

void save_discriminator(const std::string& path, const Discriminator& disc, long step) {
  CheckpointMeta meta;
  meta.kind = "discriminator";
  meta.step = step;
  meta.arch = disc.config();
  save_registry(path, disc.params(), meta);
}

std::unique_ptr<Discriminator> load_discriminator(const std::string& path, long* step) {
  nlohmann::json header = read_checkpoint_header(path);
  if (header.value("kind", "") != "discriminator")
    throw IntegrityError("checkpoint is not a discriminator: " + path);
  DiscConfig cfg = header.at("arch").get<DiscConfig>();
  auto disc = std::make_unique<Discriminator>(cfg, RngStream(0));
  CheckpointMeta meta = load_registry(path, disc->params());
  if (step) *step = meta.step;
  return disc;
}

void save_restorer(const std::string& path, const Restorer& restorer, long step) {
  CheckpointMeta meta;
  meta.kind = "restorer";
  meta.step = step;
  meta.arch = restorer.config();
  meta.extras = {{"frozen", restorer.frozen()}, {"stats_ready", restorer.stats_ready()}};
  save_registry(path, restorer.params(), meta);
}

std::unique_ptr<Restorer> load_restorer(const std::string& path, long* step) {
  nlohmann::json header = read_checkpoint_header(path);
  if (header.value("kind", "") != "restorer")
    throw IntegrityError("checkpoint is not a restorer: " + path);
  RestorerConfig cfg = header.at("arch").get<RestorerConfig>();
  auto restorer = std::make_unique<Restorer>(cfg, RngStream(0));
  CheckpointMeta meta = load_registry(path, restorer->params());
  if (meta.extras.value("stats_ready", false)) restorer->mark_stats_ready();
  if (meta.extras.value("frozen", false)) restorer->freeze_bn();
  if (step) *step = meta.step;
  return restorer;
}

}  // namespace udc
