// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <json.hpp>

#include "apnv/geometry.hpp"

namespace apnv {

enum class ShapeKind { RectangularPrism, Cylinder, TriangularPrism };

std::string_view to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(std::string_view name);

/// 6, 8 and 5 for rectangular prism, cylinder and triangular prism.
int poseclass_count(ShapeKind kind);

/// One synthetic product.
///
/// `dimensions` holds lengths in meters:
///   rectangular prism: width (x), depth (y), height (z)
///   cylinder:          radius, height (z)
///   triangular prism:  base edge (x), triangle height (y), length (z)
struct ProductSpec {
  std::string id;
  ShapeKind kind = ShapeKind::RectangularPrism;
  std::vector<double> dimensions;
  std::uint64_t texture_seed = 0;

  /// Throws ConfigError on a wrong dimension count or non-positive length.
  void validate() const;

  friend bool operator==(const ProductSpec&, const ProductSpec&) = default;
};

void to_json(nlohmann::json& j, const ProductSpec& spec);
void from_json(const nlohmann::json& j, ProductSpec& spec);

/// The grounded surface of a product.
///
/// Index convention:
///   rectangular prism: 0 bottom, 1 top, 2 front, 3 back, 4 left, 5 right
///   cylinder:          0 bottom end, 1 top end, 2..7 side with the contact line at
///                      roll 0, 60, ..., 300 degrees from the texture seam
///   triangular prism:  0 bottom end, 1 top end, 2 base face, 3 and 4 slanted faces
struct PoseClass {
  ShapeKind kind = ShapeKind::RectangularPrism;
  int index = 0;

  friend bool operator==(const PoseClass&, const PoseClass&) = default;
};

std::vector<PoseClass> enumerate_poseclasses(ShapeKind kind);

struct ObjectPose {
  PoseClass poseclass;
  double yaw_deg = 0.0;  ///< about world +z, counterclockwise from above, in [0, 360)

  friend bool operator==(const ObjectPose&, const ObjectPose&) = default;
};

/// Outward normal, in the object frame, of the face that touches the ground.
Eigen::Vector3d contact_normal(const ProductSpec& spec, PoseClass poseclass);

/// Rotation taking the contact normal of `poseclass` to world -z with zero yaw.
Rotation grounding_rotation(const ProductSpec& spec, PoseClass poseclass);

/// Rz(yaw) * grounding_rotation(poseclass).
Rotation pose_to_rotation(const ProductSpec& spec, const ObjectPose& pose);

/// Rigid placement of the object: rotation from `pose_to_rotation`, object-frame
/// origin above the world origin, lowest mesh vertex on the ground plane z = 0.
Eigen::Isometry3d pose_placement(const ProductSpec& spec, const ObjectPose& pose);

/// Inverse of `pose_to_rotation`: the poseclass whose contact normal points closest to
/// world down, and the residual yaw.
ObjectPose rotation_to_pose(const ProductSpec& spec, const Rotation& rotation);

enum class FaceRole { Front, Back, Side, Top, Bottom };

std::string_view to_string(FaceRole role);

struct MeshTriangle {
  std::array<Eigen::Vector3d, 3> vertices;  ///< object frame, counterclockwise from outside
  std::array<Eigen::Vector2d, 3> uv;        ///< texture coordinates in the slot image
  int slot = 0;                             ///< texture atlas slot
  FaceRole role = FaceRole::Side;
};

struct Mesh {
  std::vector<MeshTriangle> triangles;
  std::vector<FaceRole> slot_roles;  ///< role of every texture slot

  Eigen::AlignedBox3d bounds() const;
};

inline constexpr int kDefaultCylinderFacets = 48;

/// Closed triangle mesh centered on the bounding-box center.
///
/// Cylinder sides are split into `cylinder_facets` quads (a multiple of 4); the side
/// texture is four quarter slots (front, side, back, side) starting at the seam.
Mesh canonical_mesh(const ProductSpec& spec, int cylinder_facets = kDefaultCylinderFacets);

}  // namespace apnv
