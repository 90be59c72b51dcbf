// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apnv/checkpoint.hpp"
#include "apnv/dataset.hpp"
#include "apnv/strategy.hpp"
#include "apnv/train.hpp"

namespace apnv {

/// The headline permissible angle error, degrees.
inline constexpr double kSuccessPhi = 30.0;
/// phi = 0.0, 0.1, ..., 30.0.
inline constexpr int kPhiPoints = 301;

/// Fraction of errors e with e <= phi. Throws std::invalid_argument on an empty list.
double success_rate(std::span<const double> errors, double phi);

struct SuccessCurve {
  std::vector<double> phi;
  std::vector<double> rate;

  static SuccessCurve from_errors(std::span<const double> errors);
  /// Rate at the grid point nearest `phi`.
  double at(double phi) const;
  bool monotone() const;
  friend bool operator==(const SuccessCurve&, const SuccessCurve&) = default;
};

/// Grid value i / 10.
double phi_grid(int i);

struct Tally {
  long long trials = 0;
  long long successes = 0;
  long long moves = 0;
  double rate() const { return trials ? double(successes) / double(trials) : 0.0; }
  double move_rate() const { return trials ? double(moves) / double(trials) : 0.0; }
  friend bool operator==(const Tally&, const Tally&) = default;
};

struct StrategyReport {
  SuccessCurve curve;
  Tally overall;
  std::map<int, Tally> folds;
  /// Trials whose poseclass is the non-move poseclass of their shape.
  std::optional<SuccessCurve> nonmove_curve;
  Tally nonmove;
  friend bool operator==(const StrategyReport&, const StrategyReport&) = default;
};

struct EvalReport {
  std::vector<std::string> strategies;  ///< column order
  std::map<std::string, StrategyReport> by_strategy;
  /// (shape, poseclass, strategy) -> tally at phi = 30.
  std::map<std::tuple<ShapeKind, int, std::string>, Tally> per_poseclass;
  std::map<ShapeKind, int> nonmove_poseclass;
  long long trial_count = 0;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Aggregates trial results; strategies appear in order of first occurrence.
EvalReport make_report(const std::vector<TrialResult>& trials, const std::map<ShapeKind, int>& nonmove);

/// Non-move subset curves of two strategies (e.g. learned against fixed). Throws
/// DataError when a strategy has no trials on the subset.
std::pair<SuccessCurve, SuccessCurve> nonmove_subset_eval(const EvalReport& report, const std::string& a,
                                                          const std::string& b);

/// curves.csv, nonmove_curves.csv, per_poseclass.csv and summary.json under `dir`.
void emit_reports(const EvalReport& report, const std::filesystem::path& dir);

struct LoocvConfig {
  ModelConfig model;  ///< poseclasses and nv_classes are set per shape
  std::vector<StrategyKind> strategies{StrategyKind::FixedOverhead, StrategyKind::EdgeBased,
                                       StrategyKind::Learned, StrategyKind::OracleNV};
  std::vector<std::uint64_t> seeds{1};
  EdgeRule edge;
  int jobs = 0;
  std::vector<int> folds;  ///< empty = all folds
  /// Checkpoints and training logs are written here when set.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Load existing checkpoints from `checkpoint_dir` instead of retraining.
  bool reuse_checkpoints = false;
};

/// Products of one shape that enter cross-validation, in manifest order.
std::vector<std::string> loocv_products(const CorpusMetadata& meta, ShapeKind kind);
/// Number of folds (the LOOCV product count per shape, which must agree across shapes).
int loocv_fold_count(const CorpusMetadata& meta);

/// Stage-1 (all heads) and stage-2 (pose heads only) models of one shape.
struct StageModels {
  Checkpoint stage1;
  Checkpoint stage2;
};

/// Model config of stage 1 (all heads) or stage 2 (NV weight 0) for one shape.
ModelConfig stage_config(const ModelConfig& base, ShapeKind kind, const CorpusMetadata& meta, std::uint64_t seed,
                         int stage);

/// `<dir>/seed<seed>/fold<fold>/<product>.stage<stage>.apnv`.
std::filesystem::path stage_checkpoint_path(const std::filesystem::path& dir, std::uint64_t seed, int fold,
                                            const std::string& product, int stage);

/// Loads both stage checkpoints and checks them against the expected configs.
/// Throws DataError on a missing file and ConfigError on a config mismatch.
StageModels load_fold_models(const ModelConfig& base, const CorpusMetadata& meta, const std::filesystem::path& dir,
                             std::uint64_t seed, int fold, const std::string& test_product);

/// Trains the models for `test_product`'s fold on the other LOOCV products of its shape,
/// selecting on the shape's validation products.
StageModels train_fold(const ModelConfig& base, const SampleStore& store, const std::string& test_product,
                       std::uint64_t seed, const std::function<void(const std::string&, const EpochLog&)>& on_epoch = {});

/// Runs every strategy on every (poseclass, yaw) of the corpus grid for `spec` with
/// teaching labels from the manifest.
std::vector<TrialResult> run_product_trials(const Manifest& manifest, const ProductSpec& spec,
                                            const StageModels& models, std::span<const StrategyKind> strategies,
                                            const EdgeRule& edge, int fold, std::uint64_t seed, int jobs);

using ProgressFn = std::function<void(const std::string&)>;

/// Leave-one-product-out over every shape, for each seed.
std::vector<TrialResult> loocv(const Manifest& manifest, const SampleStore& store, const LoocvConfig& config,
                               const ProgressFn& progress = {});

/// Products whose records train fold `fold` (all shapes).
std::vector<std::string> fold_training_products(const CorpusMetadata& meta, int fold);

struct DisplaySubject {
  ProductSpec spec;
  const PoseEstimator* stage1 = nullptr;
  const PoseEstimator* stage2 = nullptr;
  int nonmove = 0;
};

struct DisplayConfig {
  int trials_per_poseclass = 2;
  double phi = kSuccessPhi;
  std::uint64_t seed = 1;
  ViewpointRing ring;
  CameraIntrinsics camera;
  int crop_size = kDefaultCropSize;
  EdgeRule edge;
  bool argmax_ring_only = false;
};

struct DisplayTable {
  std::vector<std::string> strategies;
  std::vector<ShapeKind> shapes;
  std::map<std::pair<std::string, ShapeKind>, Tally> cells;
  std::map<std::string, Tally> totals;
  std::vector<TrialResult> trials;
};

/// The (subject index, true pose) sequence display_sim evaluates.
std::vector<std::pair<std::size_t, ObjectPose>> display_poses(const std::vector<DisplaySubject>& subjects,
                                                              const DisplayConfig& config);

/// Seeded uniform yaws, `trials_per_poseclass` per poseclass of every subject, each run
/// through every strategy; success when the final error is within `phi`.
DisplayTable display_sim(const std::vector<DisplaySubject>& subjects, std::span<const StrategyKind> strategies,
                         const DisplayConfig& config);

/// "84.2" style percentage of successes / trials.
std::string format_percent(long long successes, long long trials);

/// Rows = strategies; columns = shapes then total; cells "successes/trials (pct%)".
void write_display_table(const std::filesystem::path& path, const DisplayTable& table);

}  // namespace apnv
