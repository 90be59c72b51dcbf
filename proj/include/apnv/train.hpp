// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "apnv/checkpoint.hpp"
#include "apnv/dataset.hpp"
#include "apnv/model.hpp"

namespace apnv {

/// Training produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network inputs for every record of a manifest, decoded once at a fixed resolution.
class SampleStore {
 public:
  /// Decodes all crops (in parallel) or reads them from `<root>/.cache` when a cache for
  /// the same manifest content and resolution exists.
  SampleStore(const Manifest& manifest, int resolution, int jobs = 0, bool use_cache = true);

  const Manifest& manifest() const { return *manifest_; }
  int resolution() const { return resolution_; }
  std::size_t size() const { return manifest_->records.size(); }

  /// channels x resolution^2 block of one record.
  Eigen::Map<const Eigen::MatrixXf> input(std::size_t record) const;
  /// Records side by side, ready for Network::forward.
  Eigen::MatrixXf batch(std::span<const std::size_t> records) const;

 private:
  const Manifest* manifest_;
  int resolution_;
  Eigen::MatrixXf data_;
};

/// World yaw seen from `viewpoint`: ring cameras observe the scene rotated by their
/// azimuth, so the model's target is yaw - azimuth (wrapped to [0, 360)).
double camera_yaw(const ViewpointRing& ring, int viewpoint, double world_yaw);
/// Inverse of camera_yaw.
double world_yaw(const ViewpointRing& ring, int viewpoint, double camera_yaw);

/// Targets for a set of records; NV targets only on overhead records and only when
/// `with_nv`.
Targets make_targets(const Manifest& manifest, std::span<const std::size_t> records, bool with_nv);

struct EpochLog {
  int epoch = 0;  ///< 1-based
  LossTerms train;
  double val_pose_success = 0.0;
  double val_nv_accuracy = 0.0;
};

/// 1-based epoch of the first maximum.
int select_best_epoch(std::span<const double> val_scores);

struct Evaluation {
  double pose_success = 0.0;  ///< fraction with angle error <= 30 degrees
  double nv_accuracy = 0.0;   ///< over overhead records; 0 when there are none
};

/// Pose success and NV accuracy of a network over records of one shape.
Evaluation evaluate_records(const Network<float>& net, const SampleStore& store,
                            std::span<const std::size_t> records);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Momentum SGD over `train` with a seeded shuffle; keeps the parameters of the epoch
/// with the highest validation pose success. NV loss is applied only when the NV loss
/// weight is positive, and only to overhead records.
TrainResult train_model(const ModelConfig& config, ShapeKind shape, const SampleStore& store,
                        std::span<const std::size_t> train, std::span<const std::size_t> val,
                        const EpochCallback& on_epoch = {});

/// CSV: epoch, loss_total, loss_pose_class, loss_yaw, loss_nv, val_pose_success,
/// val_nv_accuracy.
void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace apnv
