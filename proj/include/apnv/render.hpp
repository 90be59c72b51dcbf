// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "apnv/image.hpp"
#include "apnv/shape.hpp"

namespace apnv {

struct CameraIntrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  void validate() const;
  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

void to_json(nlohmann::json& j, const CameraIntrinsics& cam);
void from_json(const nlohmann::json& j, CameraIntrinsics& cam);

/// Next-viewpoint candidates: the overhead camera plus `n` cameras spread evenly on a
/// horizontal circle of `radius` at the same `height`, aimed at (0, 0, look_at_height).
struct ViewpointRing {
  int n = 4;
  double radius = 0.15;
  double height = 0.40;
  double look_at_height = 0.04;

  void validate() const;
  friend bool operator==(const ViewpointRing&, const ViewpointRing&) = default;
};

void to_json(nlohmann::json& j, const ViewpointRing& ring);
void from_json(const nlohmann::json& j, ViewpointRing& ring);

struct Viewpoint {
  int index = 0;
  double azimuth_deg = 0.0;  ///< ring azimuth; 0 for the overhead camera
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  /// World-from-camera rotation; camera x right, y down, z along the optical axis.
  Rotation orientation = Rotation::Identity();
};

/// Index 0 is overhead (image right = world +x, image up = world +y); indices 1..n sit
/// at azimuth 360 (k - 1) / n with image right along the counterclockwise tangent.
std::vector<Viewpoint> viewpoint_candidates(const ViewpointRing& ring);

struct Observation {
  ImageU8 color;   ///< 3 channels
  ImageU16 depth;  ///< millimeters along the optical axis, 0 = no object
  ImageU8 mask;    ///< 0 or 1
  PixelRect rect;  ///< tight bounding box of the mask
};

/// One texture image per mesh slot.
struct TextureAtlas {
  std::vector<ImageU8> slots;
  friend bool operator==(const TextureAtlas&, const TextureAtlas&) = default;
};

inline constexpr int kTextureSize = 128;

/// Seeded product print: front dense glyph bars and blocks, back barcode stripes,
/// sides one sparse band, top and bottom nearly uniform.
TextureAtlas procedural_texture(const ProductSpec& spec,
                                int cylinder_facets = kDefaultCylinderFacets);

struct RenderOptions {
  double depth_noise_sigma_mm = 0.0;  ///< zero-mean Gaussian on object depth when > 0
  std::uint64_t noise_seed = 0;
  friend bool operator==(const RenderOptions&, const RenderOptions&) = default;
};

inline constexpr std::uint8_t kGroundGray = 118;

/// Z-buffered perspective rasterization of a posed mesh over a matte gray ground plane.
/// Throws std::runtime_error when the object is entirely outside the frustum.
Observation render(const Mesh& mesh, const Eigen::Isometry3d& world_from_object,
                   const Viewpoint& viewpoint, const CameraIntrinsics& cam,
                   const TextureAtlas& texture, const RenderOptions& options = {});

inline constexpr int kDefaultCropSize = 224;
inline constexpr double kCropMargin = 1.25;

/// Square window of side kCropMargin * max(rect width, rect height) centered on the
/// detection rectangle, resampled to size x size (bilinear color, nearest depth/mask).
Observation crop_to_object(const Observation& obs, int size = kDefaultCropSize);

/// A product with its mesh and print, ready to be photographed from ring viewpoints.
class Scene {
 public:
  Scene(ProductSpec spec, ViewpointRing ring, CameraIntrinsics cam, RenderOptions options = {});

  const ProductSpec& product() const { return spec_; }
  const ViewpointRing& ring() const { return ring_; }
  const CameraIntrinsics& camera() const { return cam_; }
  const std::vector<Viewpoint>& viewpoints() const { return viewpoints_; }
  const Mesh& mesh() const { return mesh_; }
  const TextureAtlas& texture() const { return texture_; }

  /// Full-frame render.
  Observation render(const ObjectPose& pose, int viewpoint) const;

 private:
  ProductSpec spec_;
  ViewpointRing ring_;
  CameraIntrinsics cam_;
  RenderOptions options_;
  Mesh mesh_;
  TextureAtlas texture_;
  std::vector<Viewpoint> viewpoints_;
};

}  // namespace apnv
