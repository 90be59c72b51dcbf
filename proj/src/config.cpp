// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "apnv/digest.hpp"
#include "apnv/error.hpp"

namespace apnv {
namespace {

nlohmann::json corpus_json(const CorpusConfig& c) {
  return {{"products_per_shape", c.products_per_shape},
          {"validation_product", c.validation_product},
          {"seed", c.seed},
          {"ring", c.ring},
          {"camera", c.camera},
          {"yaw_step", c.sweep.yaw_step},
          {"crop_size", c.sweep.crop_size},
          {"edge_threshold", c.sweep.edge_threshold},
          {"depth_noise_sigma_mm", c.sweep.render.depth_noise_sigma_mm},
          {"depth_noise_seed", c.sweep.render.noise_seed},
          {"argmax_ring_only", c.argmax_ring_only}};
}

CorpusConfig corpus_from_json(const nlohmann::json& j) {
  CorpusConfig c;
  c.products_per_shape = j.at("products_per_shape").get<int>();
  c.validation_product = j.at("validation_product").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.ring = j.at("ring").get<ViewpointRing>();
  c.camera = j.at("camera").get<CameraIntrinsics>();
  c.sweep.yaw_step = j.at("yaw_step").get<int>();
  c.sweep.crop_size = j.at("crop_size").get<int>();
  c.sweep.edge_threshold = j.at("edge_threshold").get<double>();
  c.sweep.render.depth_noise_sigma_mm = j.at("depth_noise_sigma_mm").get<double>();
  c.sweep.render.noise_seed = j.at("depth_noise_seed").get<std::uint64_t>();
  c.argmax_ring_only = j.at("argmax_ring_only").get<bool>();
  return c;
}

// Every key of `given` must exist in the canonical form.
void reject_unknown(const nlohmann::json& given, const nlohmann::json& canonical, const std::string& path) {
  if (!given.is_object() || !canonical.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const auto it = canonical.find(key);
    if (it == canonical.end()) throw ConfigError("unknown config key '" + path + key + "'");
    reject_unknown(value, *it, path + key + ".");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (corpus.products_per_shape < 2) throw ConfigError("products_per_shape must be at least 2");
  corpus.ring.validate();
  corpus.camera.validate();
  if (corpus.sweep.yaw_step <= 0 || 360 % corpus.sweep.yaw_step != 0) {
    throw ConfigError("yaw_step must be a positive divisor of 360");
  }
  if (corpus.sweep.crop_size < 8) throw ConfigError("crop_size must be at least 8");
  if (!(corpus.sweep.edge_threshold >= 0)) throw ConfigError("edge_threshold must be non-negative");
  if (!(corpus.sweep.render.depth_noise_sigma_mm >= 0)) throw ConfigError("depth noise sigma must be non-negative");
  model.validate();
  if (strategies.empty()) throw ConfigError("no strategies given");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (strategies[i] == strategies[k]) throw ConfigError("strategy listed twice");
    }
  }
  if (seeds.empty()) throw ConfigError("no training seeds given");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("training seed listed twice");
  }
  for (int f : folds) {
    if (f < 0 || f >= corpus.products_per_shape) throw ConfigError("fold " + std::to_string(f) + " out of range");
  }
  if (phi_max != 30.0 || phi_step != 0.1) throw ConfigError("the success grid is fixed at 0 to 30 degrees in 0.1 steps");
  if (display_trials_per_poseclass <= 0) throw ConfigError("display trials per poseclass must be positive");
  if (display_fold < 0 || display_fold >= corpus.products_per_shape) throw ConfigError("display fold out of range");
}

std::string RunConfig::digest() const { return json_digest(nlohmann::json(*this)); }

void to_json(nlohmann::json& j, const RunConfig& c) {
  std::vector<std::string> strategies;
  for (StrategyKind k : c.strategies) strategies.emplace_back(to_string(k));
  j = nlohmann::json{{"corpus", corpus_json(c.corpus)},
                     {"model", c.model},
                     {"strategies", strategies},
                     {"seeds", c.seeds},
                     {"folds", c.folds},
                     {"phi", {{"max", c.phi_max}, {"step", c.phi_step}}},
                     {"display", {{"trials_per_poseclass", c.display_trials_per_poseclass},
                                  {"seed", c.display_seed},
                                  {"fold", c.display_fold}}}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  nlohmann::json merged = RunConfig{};
  reject_unknown(j, merged, "");
  merged.merge_patch(j);
  try {
    RunConfig out;
    out.corpus = corpus_from_json(merged.at("corpus"));
    out.model = merged.at("model").get<ModelConfig>();
    out.strategies.clear();
    for (const auto& s : merged.at("strategies")) out.strategies.push_back(strategy_from_string(s.get<std::string>()));
    out.seeds = merged.at("seeds").get<std::vector<std::uint64_t>>();
    out.folds = merged.at("folds").get<std::vector<int>>();
    out.phi_max = merged.at("phi").at("max").get<double>();
    out.phi_step = merged.at("phi").at("step").get<double>();
    out.display_trials_per_poseclass = merged.at("display").at("trials_per_poseclass").get<int>();
    out.display_seed = merged.at("display").at("seed").get<std::uint64_t>();
    out.display_fold = merged.at("display").at("fold").get<int>();
    c = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c = j.get<RunConfig>();
  c.validate();
  return c;
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json(config).dump(2) << '\n';
}

std::string run_directory_name(const RunConfig& config) {
  std::string name = config.digest() + "-seed";
  for (std::size_t i = 0; i < config.seeds.size(); ++i) name += (i ? "_" : "") + std::to_string(config.seeds[i]);
  return name;
}

}  // namespace apnv
