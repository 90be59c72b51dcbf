// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "apnv/model.hpp"
#include "apnv/shape.hpp"

namespace apnv {

struct Checkpoint {
  ModelConfig config;
  ShapeKind shape = ShapeKind::RectangularPrism;
  std::string config_digest;
  std::uint64_t seed = 0;
  double best_val_pose_success = 0.0;
  int epoch = 0;
  std::vector<ParameterBlock> layout;
  Eigen::VectorXf parameters;

  Network<float> network() const;
  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.config == b.config && a.shape == b.shape && a.config_digest == b.config_digest &&
           a.seed == b.seed && a.best_val_pose_success == b.best_val_pose_success && a.epoch == b.epoch &&
           a.layout == b.layout && a.parameters.size() == b.parameters.size() &&
           a.parameters == b.parameters;
  }
};

/// `APNV1` line, one JSON metadata line, u64 LE parameter count, f32 LE parameters.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws DataError on a malformed file or a layout that disagrees with the config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Digest of the checkpoint file bytes.
std::string checkpoint_digest(const std::filesystem::path& path);

}  // namespace apnv
