// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <set>

#include "apnv/error.hpp"
#include "apnv/geometry.hpp"
#include "apnv/shape.hpp"
#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace apnv;
using Catch::Approx;

namespace {

const ProductSpec kRect = test::box(0.06, 0.04, 0.12);
const ProductSpec kCylinder{"cyl", ShapeKind::Cylinder, {0.03, 0.12}, 5};
const ProductSpec kPrism{"tri", ShapeKind::TriangularPrism, {0.07, 0.06, 0.15}, 7};

Eigen::Vector3d triangle_normal(const MeshTriangle& t) {
  return (t.vertices[1] - t.vertices[0]).cross(t.vertices[2] - t.vertices[0]).normalized();
}

}  // namespace

TEST_CASE("poseclass counts are 6, 8 and 5") {
  CHECK(poseclass_count(ShapeKind::RectangularPrism) == 6);
  CHECK(poseclass_count(ShapeKind::Cylinder) == 8);
  CHECK(poseclass_count(ShapeKind::TriangularPrism) == 5);
  CHECK(enumerate_poseclasses(ShapeKind::Cylinder).size() == 8);
  int total = 0;
  for (ShapeKind k : {ShapeKind::RectangularPrism, ShapeKind::Cylinder, ShapeKind::TriangularPrism}) {
    total += poseclass_count(k);
  }
  CHECK(total == 19);
}

TEST_CASE("cylinder has six side bins") {
  int sides = 0;
  for (const PoseClass& pc : enumerate_poseclasses(ShapeKind::Cylinder)) {
    sides += std::abs(contact_normal(kCylinder, pc).z()) < 1e-12 ? 1 : 0;
  }
  CHECK(sides == 6);
}

TEST_CASE("shape names round trip") {
  for (ShapeKind k : {ShapeKind::RectangularPrism, ShapeKind::Cylinder, ShapeKind::TriangularPrism}) {
    CHECK(shape_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS(shape_kind_from_string("sphere"));
}

TEST_CASE("rect poseclass 0 at yaw 0 is the identity; yaw 90 is a pure z rotation") {
  CHECK(pose_to_rotation(kRect, {{ShapeKind::RectangularPrism, 0}, 0.0}).isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  CHECK(pose_to_rotation(kRect, {{ShapeKind::RectangularPrism, 0}, 90.0}).isApprox(rot_z(90.0), 1e-12));
}

TEST_CASE("every pose grounds its contact normal straight down") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> yaw(0.0, 360.0);
  for (const ProductSpec* spec : {&kRect, &kCylinder, &kPrism}) {
    for (const PoseClass& pc : enumerate_poseclasses(spec->kind)) {
      const ObjectPose pose{pc, yaw(rng)};
      const Rotation r = pose_to_rotation(*spec, pose);
      CHECK(is_rotation(r));
      CHECK((r * contact_normal(*spec, pc) - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);
    }
  }
}

TEST_CASE("cylinder side bin at 120 degrees of roll with yaw 45") {
  const PoseClass pc{ShapeKind::Cylinder, 4};
  const Eigen::Vector3d n = contact_normal(kCylinder, pc);
  // contact line at roll 120 degrees from the seam, which lies on object +x
  CHECK(n.isApprox(Eigen::Vector3d(std::cos(deg2rad(120.0)), std::sin(deg2rad(120.0)), 0.0), 1e-12));
  const Rotation r = pose_to_rotation(kCylinder, {pc, 45.0});
  CHECK((r * n - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("rotation_to_pose inverts pose_to_rotation") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> yaw(0.0, 360.0);
  for (const ProductSpec* spec : {&kRect, &kCylinder, &kPrism}) {
    for (const PoseClass& pc : enumerate_poseclasses(spec->kind)) {
      const ObjectPose pose{pc, yaw(rng)};
      const ObjectPose back = rotation_to_pose(*spec, pose_to_rotation(*spec, pose));
      CHECK(back.poseclass == pc);
      CHECK(std::abs(wrap_signed_degrees(back.yaw_deg - pose.yaw_deg)) < 1e-9);
    }
  }
}

TEST_CASE("placement rests the lowest vertex on the ground") {
  for (const ProductSpec* spec : {&kRect, &kCylinder, &kPrism}) {
    const Mesh mesh = canonical_mesh(*spec);
    for (const PoseClass& pc : enumerate_poseclasses(spec->kind)) {
      const Eigen::Isometry3d place = pose_placement(*spec, {pc, 33.0});
      double lowest = 1e9;
      for (const auto& t : mesh.triangles) {
        for (const auto& v : t.vertices) lowest = std::min(lowest, (place * v).z());
      }
      CHECK(lowest == Approx(0.0).margin(1e-12));
    }
  }
}

TEST_CASE("box mesh has 12 triangles and 6 face roles") {
  const Mesh mesh = canonical_mesh(kRect);
  CHECK(mesh.triangles.size() == 12);
  CHECK(mesh.slot_roles.size() == 6);
  std::set<int> slots;
  for (const auto& t : mesh.triangles) slots.insert(t.slot);
  CHECK(slots.size() == 6);
}

TEST_CASE("cylinder side facet count equals the tessellation") {
  for (int facets : {16, 48}) {
    const Mesh mesh = canonical_mesh(kCylinder, facets);
    int side = 0;
    for (const auto& t : mesh.triangles) side += std::abs(triangle_normal(t).z()) < 1e-9 ? 1 : 0;
    CHECK(side == 2 * facets);
  }
  CHECK_THROWS(canonical_mesh(kCylinder, 18));
}

TEST_CASE("mesh bounds equal the product dimensions") {
  auto extent = [](const ProductSpec& s) { return canonical_mesh(s).bounds().sizes(); };
  CHECK(extent(kRect).isApprox(Eigen::Vector3d(0.06, 0.04, 0.12), 1e-12));
  CHECK(extent(kCylinder).isApprox(Eigen::Vector3d(0.06, 0.06, 0.12), 1e-12));
  CHECK(extent(kPrism).isApprox(Eigen::Vector3d(0.07, 0.06, 0.15), 1e-12));
  CHECK(canonical_mesh(kRect).bounds().center().norm() < 1e-12);
}

TEST_CASE("triangles wind counterclockwise seen from outside") {
  for (const ProductSpec* spec : {&kRect, &kCylinder, &kPrism}) {
    const Mesh mesh = canonical_mesh(*spec);
    const Eigen::Vector3d center = mesh.bounds().center();
    for (const auto& t : mesh.triangles) {
      const Eigen::Vector3d centroid = (t.vertices[0] + t.vertices[1] + t.vertices[2]) / 3.0;
      CHECK(triangle_normal(t).dot(centroid - center) > 0.0);
    }
  }
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS((ProductSpec{"x", ShapeKind::Cylinder, {0.03}, 0}.validate()), ConfigError);
  CHECK_THROWS_AS(test::box(0.1, -0.1, 0.1).validate(), ConfigError);
  CHECK_NOTHROW(kPrism.validate());
}
