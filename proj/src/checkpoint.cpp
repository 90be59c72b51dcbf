// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "apnv/digest.hpp"
#include "apnv/error.hpp"

namespace apnv {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr const char* kMagic = "APNV1";

}  // namespace

Network<float> Checkpoint::network() const {
  Network<float> net(config);
  if (net.layout() != layout || net.parameters().size() != parameters.size()) {
    throw DataError("checkpoint layout does not match its model config");
  }
  net.parameters() = parameters;
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (ckpt.parameters.size() != parameter_count(ckpt.layout)) {
    throw std::invalid_argument("save_checkpoint: parameter count disagrees with layout");
  }
  const nlohmann::json meta{{"config", ckpt.config},
                            {"shape", std::string(to_string(ckpt.shape))},
                            {"config_digest", ckpt.config_digest},
                            {"seed", ckpt.seed},
                            {"best_val_pose_success", ckpt.best_val_pose_success},
                            {"epoch", ckpt.epoch},
                            {"layout", ckpt.layout}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << kMagic << '\n' << meta.dump() << '\n';
  const std::uint64_t count = static_cast<std::uint64_t>(ckpt.parameters.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(ckpt.parameters.data()),
            static_cast<std::streamsize>(sizeof(float) * ckpt.parameters.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::string magic, meta_line;
  if (!std::getline(in, magic) || magic != kMagic) throw DataError(path.string() + ": not an APNV1 checkpoint");
  if (!std::getline(in, meta_line)) throw DataError(path.string() + ": missing metadata");
  Checkpoint ckpt;
  try {
    const auto meta = nlohmann::json::parse(meta_line);
    ckpt.config = meta.at("config").get<ModelConfig>();
    ckpt.shape = shape_kind_from_string(meta.at("shape").get<std::string>());
    ckpt.config_digest = meta.at("config_digest").get<std::string>();
    ckpt.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.best_val_pose_success = meta.at("best_val_pose_success").get<double>();
    ckpt.epoch = meta.at("epoch").get<int>();
    ckpt.layout = meta.at("layout").get<std::vector<ParameterBlock>>();
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": bad checkpoint metadata: " + e.what());
  }
  std::uint64_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), sizeof(count))) throw DataError(path.string() + ": truncated");
  if (count != static_cast<std::uint64_t>(parameter_count(ckpt.layout)) ||
      ckpt.layout != parameter_layout(ckpt.config)) {
    throw DataError(path.string() + ": parameter layout does not match the model config");
  }
  ckpt.parameters.resize(static_cast<Eigen::Index>(count));
  if (!in.read(reinterpret_cast<char*>(ckpt.parameters.data()), static_cast<std::streamsize>(sizeof(float) * count))) {
    throw DataError(path.string() + ": truncated parameters");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");
  return ckpt;
}

std::string checkpoint_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

}  // namespace apnv
