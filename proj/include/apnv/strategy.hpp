// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "apnv/dataset.hpp"
#include "apnv/imageproc.hpp"
#include "apnv/model.hpp"
#include "apnv/render.hpp"

namespace apnv {

enum class StrategyKind { FixedOverhead, EdgeBased, Learned, OracleNV };

/// "fixed", "edge", "learned", "oracle".
std::string_view to_string(StrategyKind kind);
/// Accepts the short names and "fixed-overhead", "edge-based", "oracle-nv".
StrategyKind strategy_from_string(std::string_view name);
/// Comma-separated list.
std::vector<StrategyKind> parse_strategies(std::string_view list);

/// Estimates world-frame poses from cropped observations.
class PoseEstimator {
 public:
  virtual ~PoseEstimator() = default;
  virtual ObjectPose estimate_pose(const Observation& crop, const Viewpoint& viewpoint) const = 0;
  /// Next viewpoint chosen from the cropped overhead observation.
  virtual int estimate_nv(const Observation& crop) const = 0;
};

/// Network-backed estimator. Predictions are camera-relative and are turned into world
/// poses with the ring camera's azimuth.
class NetworkEstimator final : public PoseEstimator {
 public:
  NetworkEstimator(const Network<float>& net, ShapeKind shape, ViewpointRing ring);
  ObjectPose estimate_pose(const Observation& crop, const Viewpoint& viewpoint) const override;
  int estimate_nv(const Observation& crop) const override;

 private:
  const Network<float>* net_;
  ShapeKind shape_;
  ViewpointRing ring_;
};

struct EdgeRule {
  double threshold = 96.0;
};

/// Ring candidate facing the longest edge of the overhead crop: the edge normal that
/// points from the crop center toward the segment midpoint is taken as a world azimuth
/// (image right = +x, image up = +y) and the nearest ring azimuth wins, lowest index on
/// ties. Returns 0 when the crop has no edges.
int edge_based_viewpoint(const Observation& overhead_crop, const ViewpointRing& ring, const EdgeRule& rule = {});

/// fixed -> 0; learned -> stage-1 NV prediction; oracle -> `oracle_label`; edge -> the
/// edge rule. Throws std::invalid_argument when a required input is missing.
int select_viewpoint(StrategyKind kind, const Observation& overhead_crop, const ViewpointRing& ring,
                     const PoseEstimator* stage1, std::optional<int> oracle_label, const EdgeRule& rule = {});

struct TrialResult {
  std::string product_id;
  std::string strategy;
  int fold = -1;
  std::uint64_t seed = 0;
  ObjectPose truth;
  ObjectPose first;
  int viewpoint = 0;
  std::optional<ObjectPose> second;
  ObjectPose final_pose;
  double error_deg = 0.0;
  bool moved = false;
  int renders = 0;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

void to_json(nlohmann::json& j, const TrialResult& t);
void from_json(const nlohmann::json& j, TrialResult& t);

/// Cropped observation of the trial's object from a candidate viewpoint.
using Capture = std::function<Observation(int viewpoint)>;

inline constexpr int kMaxRendersPerTrial = 2;

/// Two-stage trial: overhead capture and stage-1 estimate, viewpoint selection, and when
/// the choice is a ring camera, one more capture and a stage-2 estimate. Throws
/// std::logic_error if more than two captures would be taken.
TrialResult run_pipeline(const ProductSpec& spec, const ObjectPose& truth, StrategyKind kind,
                         const PoseEstimator& stage1, const PoseEstimator& stage2, const ViewpointRing& ring,
                         const Capture& capture, std::optional<int> oracle_label = std::nullopt,
                         const EdgeRule& rule = {});

/// Renders and crops a product at a pose, memoizing per viewpoint.
class CaptureCache {
 public:
  CaptureCache(const Scene& scene, ObjectPose pose, int crop_size);
  Observation operator()(int viewpoint);
  /// Distinct viewpoints rendered so far.
  int renders() const;

 private:
  const Scene* scene_;
  ObjectPose pose_;
  int crop_size_;
  std::vector<std::optional<Observation>> views_;
};

/// Teaching label for an arbitrary pose, from freshly rendered views of every candidate.
int teaching_label(const Scene& scene, const ObjectPose& pose, int nonmove, int crop_size, double edge_threshold,
                   bool argmax_ring_only);

/// JSON Lines, one trial per line.
void write_trials(const std::filesystem::path& path, const std::vector<TrialResult>& trials);
std::vector<TrialResult> read_trials(const std::filesystem::path& path);

}  // namespace apnv
