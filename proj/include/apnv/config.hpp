// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "apnv/dataset.hpp"
#include "apnv/model.hpp"
#include "apnv/strategy.hpp"

namespace apnv {

/// Every setting that influences an artifact, in one JSON document. The job count is
/// deliberately absent: results do not depend on it.
struct RunConfig {
  CorpusConfig corpus;
  ModelConfig model;
  std::vector<StrategyKind> strategies{StrategyKind::FixedOverhead, StrategyKind::EdgeBased, StrategyKind::Learned,
                                       StrategyKind::OracleNV};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> folds;  ///< empty = all
  double phi_max = 30.0;
  double phi_step = 0.1;
  int display_trials_per_poseclass = 2;
  std::uint64_t display_seed = 1;
  int display_fold = 0;

  /// Throws ConfigError.
  void validate() const;
  /// Content hash of the canonical serialization.
  std::string digest() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

/// `<digest>-seed<s>` with the training seeds joined by '_'.
std::string run_directory_name(const RunConfig& config);

}  // namespace apnv
