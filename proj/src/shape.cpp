// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/shape.hpp"

#include <cmath>
#include <limits>

#include "apnv/error.hpp"

namespace apnv {

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::RectangularPrism: return "rectangular-prism";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::TriangularPrism: return "triangular-prism";
  }
  return "unknown";
}

ShapeKind shape_kind_from_string(std::string_view name) {
  if (name == "rectangular-prism" || name == "rect") return ShapeKind::RectangularPrism;
  if (name == "cylinder" || name == "cyl") return ShapeKind::Cylinder;
  if (name == "triangular-prism" || name == "tri") return ShapeKind::TriangularPrism;
  throw ConfigError("unknown shape kind '" + std::string(name) + "'");
}

int poseclass_count(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::RectangularPrism: return 6;
    case ShapeKind::Cylinder: return 8;
    case ShapeKind::TriangularPrism: return 5;
  }
  return 0;
}

std::string_view to_string(FaceRole role) {
  switch (role) {
    case FaceRole::Front: return "front";
    case FaceRole::Back: return "back";
    case FaceRole::Side: return "side";
    case FaceRole::Top: return "top";
    case FaceRole::Bottom: return "bottom";
  }
  return "unknown";
}

namespace {

std::size_t expected_dimension_count(ShapeKind kind) {
  return kind == ShapeKind::Cylinder ? 2 : 3;
}

void check_poseclass(const ProductSpec& spec, PoseClass poseclass) {
  if (poseclass.kind != spec.kind) {
    throw std::invalid_argument("poseclass of kind " + std::string(to_string(poseclass.kind)) +
                                " used with a " + std::string(to_string(spec.kind)) + " product");
  }
  if (poseclass.index < 0 || poseclass.index >= poseclass_count(spec.kind)) {
    throw std::invalid_argument("poseclass index " + std::to_string(poseclass.index) +
                                " out of range for " + std::string(to_string(spec.kind)));
  }
}

}  // namespace

void ProductSpec::validate() const {
  if (dimensions.size() != expected_dimension_count(kind)) {
    throw ConfigError("product '" + id + "': expected " +
                      std::to_string(expected_dimension_count(kind)) + " dimensions for " +
                      std::string(to_string(kind)));
  }
  for (double d : dimensions) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw ConfigError("product '" + id + "': dimensions must be finite and strictly positive");
    }
  }
}

void to_json(nlohmann::json& j, const ProductSpec& spec) {
  j = nlohmann::json{{"id", spec.id},
                     {"kind", std::string(to_string(spec.kind))},
                     {"dimensions", spec.dimensions},
                     {"texture_seed", spec.texture_seed}};
}

void from_json(const nlohmann::json& j, ProductSpec& spec) {
  spec.id = j.at("id").get<std::string>();
  spec.kind = shape_kind_from_string(j.at("kind").get<std::string>());
  spec.dimensions = j.at("dimensions").get<std::vector<double>>();
  spec.texture_seed = j.at("texture_seed").get<std::uint64_t>();
}

std::vector<PoseClass> enumerate_poseclasses(ShapeKind kind) {
  std::vector<PoseClass> out;
  for (int i = 0; i < poseclass_count(kind); ++i) out.push_back({kind, i});
  return out;
}

Eigen::Vector3d contact_normal(const ProductSpec& spec, PoseClass poseclass) {
  check_poseclass(spec, poseclass);
  const int k = poseclass.index;
  if (k == 0) return -Eigen::Vector3d::UnitZ();
  if (k == 1) return Eigen::Vector3d::UnitZ();
  switch (spec.kind) {
    case ShapeKind::RectangularPrism: {
      static const Eigen::Vector3d normals[] = {
          -Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitY(),
          -Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitX()};
      return normals[k - 2];
    }
    case ShapeKind::Cylinder: {
      const double roll = deg2rad(60.0 * (k - 2));
      return {std::cos(roll), std::sin(roll), 0.0};
    }
    case ShapeKind::TriangularPrism: {
      const double base = spec.dimensions[0];
      const double height = spec.dimensions[1];
      if (k == 2) return -Eigen::Vector3d::UnitY();
      const double sign = k == 3 ? 1.0 : -1.0;
      return Eigen::Vector3d(sign * height, base / 2.0, 0.0).normalized();
    }
  }
  return Eigen::Vector3d::Zero();
}

Rotation grounding_rotation(const ProductSpec& spec, PoseClass poseclass) {
  const Eigen::Vector3d n = contact_normal(spec, poseclass);
  if (n.z() < -0.5) return Rotation::Identity();
  if (n.z() > 0.5) return rot_x(180.0);
  const double azimuth = rad2deg(std::atan2(n.y(), n.x()));
  return rot_y(90.0) * rot_z(-azimuth);
}

Rotation pose_to_rotation(const ProductSpec& spec, const ObjectPose& pose) {
  return rot_z(pose.yaw_deg) * grounding_rotation(spec, pose.poseclass);
}

Eigen::Isometry3d pose_placement(const ProductSpec& spec, const ObjectPose& pose) {
  const Rotation r = pose_to_rotation(spec, pose);
  const Mesh mesh = canonical_mesh(spec);
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles) {
    for (const auto& v : tri.vertices) lowest = std::min(lowest, (r * v).z());
  }
  Eigen::Isometry3d placement = Eigen::Isometry3d::Identity();
  placement.linear() = r;
  placement.translation() = Eigen::Vector3d(0.0, 0.0, -lowest);
  return placement;
}

ObjectPose rotation_to_pose(const ProductSpec& spec, const Rotation& rotation) {
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const PoseClass pc : enumerate_poseclasses(spec.kind)) {
    const double score = -(rotation * contact_normal(spec, pc)).z();
    if (score > best_score) {
      best_score = score;
      best = pc.index;
    }
  }
  const PoseClass pc{spec.kind, best};
  const Rotation yaw = rotation * grounding_rotation(spec, pc).transpose();
  return {pc, wrap_degrees(rad2deg(std::atan2(yaw(1, 0), yaw(0, 0))))};
}

Eigen::AlignedBox3d Mesh::bounds() const {
  Eigen::AlignedBox3d box;
  for (const auto& tri : triangles) {
    for (const auto& v : tri.vertices) box.extend(v);
  }
  return box;
}

namespace {

class MeshBuilder {
 public:
  explicit MeshBuilder(Mesh& mesh) : mesh_(mesh) {}

  /// Quad origin, origin+u, origin+u+v, origin+v; u x v must point outward.
  void quad(const Eigen::Vector3d& origin, const Eigen::Vector3d& u, const Eigen::Vector3d& v,
            int slot, const Eigen::Vector2d& uv0 = {0, 0}, const Eigen::Vector2d& uv1 = {1, 1}) {
    const Eigen::Vector3d p[4] = {origin, origin + u, origin + u + v, origin + v};
    const Eigen::Vector2d t[4] = {uv0, {uv1.x(), uv0.y()}, uv1, {uv0.x(), uv1.y()}};
    triangle({p[0], p[1], p[2]}, {t[0], t[1], t[2]}, slot);
    triangle({p[0], p[2], p[3]}, {t[0], t[2], t[3]}, slot);
  }

  void triangle(const std::array<Eigen::Vector3d, 3>& v, const std::array<Eigen::Vector2d, 3>& uv,
                int slot) {
    mesh_.triangles.push_back({v, uv, slot, mesh_.slot_roles.at(slot)});
  }

 private:
  Mesh& mesh_;
};

Mesh box_mesh(double w, double d, double h) {
  Mesh mesh;
  mesh.slot_roles = {FaceRole::Bottom, FaceRole::Top,  FaceRole::Front,
                     FaceRole::Back,   FaceRole::Side, FaceRole::Side};
  MeshBuilder b(mesh);
  const double x = w / 2, y = d / 2, z = h / 2;
  b.quad({-x, y, -z}, {w, 0, 0}, {0, -d, 0}, 0);
  b.quad({-x, -y, z}, {w, 0, 0}, {0, d, 0}, 1);
  b.quad({-x, -y, -z}, {w, 0, 0}, {0, 0, h}, 2);
  b.quad({x, y, -z}, {-w, 0, 0}, {0, 0, h}, 3);
  b.quad({-x, y, -z}, {0, -d, 0}, {0, 0, h}, 4);
  b.quad({x, -y, -z}, {0, d, 0}, {0, 0, h}, 5);
  return mesh;
}

Mesh cylinder_mesh(double r, double h, int facets) {
  Mesh mesh;
  mesh.slot_roles = {FaceRole::Bottom, FaceRole::Top,  FaceRole::Front,
                     FaceRole::Side,   FaceRole::Back, FaceRole::Side};
  MeshBuilder b(mesh);
  const int per_quarter = facets / 4;
  auto ring = [&](int j, double z) {
    const double a = 2.0 * kPi<double> * j / facets;
    return Eigen::Vector3d(r * std::cos(a), r * std::sin(a), z);
  };
  auto cap_uv = [&](const Eigen::Vector3d& p) {
    return Eigen::Vector2d((p.x() / r + 1.0) / 2.0, (p.y() / r + 1.0) / 2.0);
  };
  const Eigen::Vector3d top_center(0, 0, h / 2), bottom_center(0, 0, -h / 2);
  for (int j = 0; j < facets; ++j) {
    const int quarter = j / per_quarter;
    const double u0 = double(j - quarter * per_quarter) / per_quarter;
    const double u1 = double(j + 1 - quarter * per_quarter) / per_quarter;
    const Eigen::Vector3d p0 = ring(j, -h / 2), p1 = ring(j + 1, -h / 2);
    const Eigen::Vector3d p2 = ring(j + 1, h / 2), p3 = ring(j, h / 2);
    b.triangle({p0, p1, p2}, {Eigen::Vector2d(u0, 0), {u1, 0}, {u1, 1}}, 2 + quarter);
    b.triangle({p0, p2, p3}, {Eigen::Vector2d(u0, 0), {u1, 1}, {u0, 1}}, 2 + quarter);
    b.triangle({top_center, p3, p2}, {cap_uv(top_center), cap_uv(p3), cap_uv(p2)}, 1);
    b.triangle({bottom_center, p1, p0}, {cap_uv(bottom_center), cap_uv(p1), cap_uv(p0)}, 0);
  }
  return mesh;
}

Mesh triangular_prism_mesh(double base, double height, double length) {
  Mesh mesh;
  mesh.slot_roles = {FaceRole::Bottom, FaceRole::Top, FaceRole::Side, FaceRole::Front,
                     FaceRole::Back};
  MeshBuilder b(mesh);
  const double z = length / 2;
  const Eigen::Vector3d a(-base / 2, -height / 2, 0), bb(base / 2, -height / 2, 0),
      c(0, height / 2, 0);
  const Eigen::Vector3d lo(0, 0, -z), hi(0, 0, z);
  auto end_uv = [&](const Eigen::Vector3d& p) {
    return Eigen::Vector2d(p.x() / base + 0.5, p.y() / height + 0.5);
  };
  b.triangle({a + lo, c + lo, bb + lo}, {end_uv(a), end_uv(c), end_uv(bb)}, 0);
  b.triangle({a + hi, bb + hi, c + hi}, {end_uv(a), end_uv(bb), end_uv(c)}, 1);
  const Eigen::Vector3d up(0, 0, length);
  b.quad(a + lo, bb - a, up, 2);
  b.quad(bb + lo, c - bb, up, 3);
  b.quad(c + lo, a - c, up, 4);
  return mesh;
}

}  // namespace

Mesh canonical_mesh(const ProductSpec& spec, int cylinder_facets) {
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw std::invalid_argument(std::string("canonical_mesh: degenerate product: ") + e.what());
  }
  const auto& d = spec.dimensions;
  switch (spec.kind) {
    case ShapeKind::RectangularPrism: return box_mesh(d[0], d[1], d[2]);
    case ShapeKind::Cylinder:
      if (cylinder_facets < 4 || cylinder_facets % 4 != 0) {
        throw std::invalid_argument("canonical_mesh: cylinder facets must be a positive multiple of 4");
      }
      return cylinder_mesh(d[0], d[1], cylinder_facets);
    case ShapeKind::TriangularPrism: return triangular_prism_mesh(d[0], d[1], d[2]);
  }
  return {};
}

}  // namespace apnv
