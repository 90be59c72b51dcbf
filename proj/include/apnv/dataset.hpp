// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "apnv/render.hpp"
#include "apnv/shape.hpp"

namespace apnv {

/// One-hot next-viewpoint teaching vector over the n + 1 candidates.
struct NVLabel {
  std::vector<int> one_hot;
  int v = 0;

  static NVLabel of(int v, int candidates);
  bool valid() const;
  friend bool operator==(const NVLabel&, const NVLabel&) = default;
};

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct SampleRecord {
  std::string product_id;
  int poseclass = 0;
  double yaw_deg = 0.0;
  int viewpoint = 0;
  std::string color;  ///< paths relative to the manifest directory
  std::string depth;
  std::string mask;
  NVLabel nv_label;
  Split split = Split::Train;
  long long detection_area = 0;  ///< full-frame detection rectangle, pixels^2
  long long edge_count = 0;      ///< edge pixels of the stored crop

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

void to_json(nlohmann::json& j, const SampleRecord& r);
void from_json(const nlohmann::json& j, SampleRecord& r);

struct CorpusMetadata {
  ViewpointRing ring;
  CameraIntrinsics camera;
  std::vector<ProductSpec> products;
  std::vector<std::string> validation_products;
  int yaw_step = 10;
  int crop_size = kDefaultCropSize;
  double edge_threshold = 96.0;
  bool argmax_ring_only = false;
  /// Yaw- and product-averaged full-frame detection area, rows = poseclass,
  /// columns = candidate viewpoint.
  std::map<ShapeKind, Eigen::MatrixXd> area_tables;
  std::map<ShapeKind, int> nonmove_poseclass;

  const ProductSpec& product(const std::string& id) const;
  bool is_validation(const std::string& id) const;
  int candidates() const { return ring.n + 1; }
  int yaw_count() const { return 360 / yaw_step; }
};

void to_json(nlohmann::json& j, const CorpusMetadata& m);
void from_json(const nlohmann::json& j, CorpusMetadata& m);

struct Manifest {
  CorpusMetadata meta;
  std::vector<SampleRecord> records;
  std::filesystem::path root;  ///< directory holding the manifest and image tree

  friend bool operator==(const Manifest& a, const Manifest& b) {
    return nlohmann::json(a.meta) == nlohmann::json(b.meta) && a.records == b.records;
  }
};

inline constexpr const char* kManifestFile = "manifest.jsonl";

struct SweepOptions {
  int yaw_step = 10;
  int crop_size = kDefaultCropSize;
  double edge_threshold = 96.0;
  RenderOptions render;
  int jobs = 0;
  friend bool operator==(const SweepOptions&, const SweepOptions&) = default;
};

/// Renders every (poseclass, viewpoint, yaw) of one product, writes the cropped color,
/// depth and mask under `root`, and returns unlabeled records ordered by poseclass,
/// viewpoint, yaw.
std::vector<SampleRecord> capture_sweep(const ProductSpec& spec, const ViewpointRing& ring,
                                        const CameraIntrinsics& cam, const SweepOptions& options,
                                        const std::filesystem::path& root);

/// `<product>/<poseclass>/<viewpoint>/<yaw:03d>` without the extension.
std::string sample_stem(const std::string& product, int poseclass, int viewpoint, int yaw);

/// argmin over poseclasses k of max over ring viewpoints i >= 1 of a(k, i) / a(k, 0);
/// ties go to the lowest k. Throws DataError on missing or non-positive entries.
int nonmove_poseclass(const Eigen::MatrixXd& areas);

struct LabelOptions {
  int candidates = 5;
  bool argmax_ring_only = false;
};

/// v = 0 when `poseclass` is the non-move poseclass, otherwise argmax of the edge
/// counts (lowest index on ties). Throws DataError on a length mismatch.
NVLabel nv_teacher(std::span<const long long> edge_counts, int nonmove, int poseclass,
                   const LabelOptions& options);

/// Mean full-frame detection area per (poseclass, viewpoint) over the products and
/// yaws of one shape.
Eigen::MatrixXd area_table(const Manifest& manifest, ShapeKind kind);

/// Recomputes area tables, non-move poseclasses and every record's NV label from the
/// stored detection areas and edge counts.
void label_manifest(Manifest& manifest);

/// Re-reads every stored crop and refreshes `edge_count`.
void recompute_edge_counts(Manifest& manifest, int jobs = 0);

/// Writes `root / manifest.jsonl`: metadata on line one, one record per line after.
void write_manifest(const Manifest& manifest);

/// Reads and validates a manifest (record invariants, per-cell counts and, when
/// `check_files`, existence of every image). Throws DataError.
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);

/// Checks the invariants `load_manifest` enforces on an in-memory manifest.
void validate_manifest(const Manifest& manifest, bool check_files);

/// Reads the cropped observation of a record.
Observation load_observation(const Manifest& manifest, const SampleRecord& record);

struct CorpusConfig {
  int products_per_shape = 4;
  bool validation_product = true;
  std::uint64_t seed = 1;
  ViewpointRing ring;
  CameraIntrinsics camera;
  SweepOptions sweep;
  bool argmax_ring_only = false;
  friend bool operator==(const CorpusConfig&, const CorpusConfig&) = default;
};

/// Seeded products with ids `<shape>-<k>` (and `<shape>-val`); dimensions vary by up
/// to about 12% around a per-shape base size.
std::vector<ProductSpec> make_products(const CorpusConfig& config);

/// Generates products, captures every sweep, labels, and writes the manifest.
Manifest build_corpus(const CorpusConfig& config, const std::filesystem::path& root);

}  // namespace apnv
