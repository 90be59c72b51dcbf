// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/render.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "apnv/error.hpp"

namespace apnv {

void CameraIntrinsics::validate() const {
  if (!(fx > 0 && fy > 0)) throw ConfigError("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("camera: image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
    throw ConfigError("camera: principal point outside the image");
  }
}

void to_json(nlohmann::json& j, const CameraIntrinsics& cam) {
  j = nlohmann::json{{"fx", cam.fx}, {"fy", cam.fy},       {"cx", cam.cx},
                     {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

void from_json(const nlohmann::json& j, CameraIntrinsics& cam) {
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
}

void ViewpointRing::validate() const {
  if (n < 1) throw ConfigError("ring: need at least one ring viewpoint");
  if (!(radius > 0)) throw ConfigError("ring: radius must be positive");
  if (!(height > look_at_height)) throw ConfigError("ring: cameras must sit above the look-at point");
}

void to_json(nlohmann::json& j, const ViewpointRing& ring) {
  j = nlohmann::json{{"n", ring.n},
                     {"radius", ring.radius},
                     {"height", ring.height},
                     {"look_at_height", ring.look_at_height}};
}

void from_json(const nlohmann::json& j, ViewpointRing& ring) {
  ring.n = j.at("n").get<int>();
  ring.radius = j.at("radius").get<double>();
  ring.height = j.at("height").get<double>();
  ring.look_at_height = j.at("look_at_height").get<double>();
}

std::vector<Viewpoint> viewpoint_candidates(const ViewpointRing& ring) {
  ring.validate();
  std::vector<Viewpoint> out;
  Viewpoint overhead;
  overhead.index = 0;
  overhead.position = {0.0, 0.0, ring.height};
  overhead.orientation.col(0) = Eigen::Vector3d::UnitX();
  overhead.orientation.col(1) = -Eigen::Vector3d::UnitY();
  overhead.orientation.col(2) = -Eigen::Vector3d::UnitZ();
  out.push_back(overhead);

  const Eigen::Vector3d target(0.0, 0.0, ring.look_at_height);
  for (int k = 1; k <= ring.n; ++k) {
    Viewpoint vp;
    vp.index = k;
    vp.azimuth_deg = 360.0 * (k - 1) / ring.n;
    const double a = deg2rad(vp.azimuth_deg);
    vp.position = {ring.radius * std::cos(a), ring.radius * std::sin(a), ring.height};
    const Eigen::Vector3d z = (target - vp.position).normalized();
    const Eigen::Vector3d x(-std::sin(a), std::cos(a), 0.0);
    vp.orientation.col(0) = x;
    vp.orientation.col(1) = z.cross(x);
    vp.orientation.col(2) = z;
    out.push_back(vp);
  }
  return out;
}

namespace {

constexpr double kNearPlane = 1e-3;
// shared edges are covered by both neighbours; the depth test picks one
constexpr double kEdgeEpsilon = 1e-9;
constexpr double kAmbient = 0.45;
constexpr double kDiffuse = 0.55;

const Eigen::Vector3d& light_direction() {
  static const Eigen::Vector3d l = Eigen::Vector3d(0.4, -0.3, 1.0).normalized();
  return l;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Observation render(const Mesh& mesh, const Eigen::Isometry3d& world_from_object,
                   const Viewpoint& viewpoint, const CameraIntrinsics& cam,
                   const TextureAtlas& texture, const RenderOptions& options) {
  const int w = cam.width, h = cam.height;
  Observation obs;
  obs.color = ImageU8(w, h, 3, kGroundGray);
  obs.depth = ImageU16(w, h, 1, 0);
  obs.mask = ImageU8(w, h, 1, 0);
  std::vector<double> zbuf(static_cast<std::size_t>(w) * h,
                           std::numeric_limits<double>::infinity());

  const Rotation cam_from_world = viewpoint.orientation.transpose();
  for (const MeshTriangle& tri : mesh.triangles) {
    Eigen::Vector3d pc[3];
    Eigen::Vector2d ps[3];
    Eigen::Vector3d pw[3];
    for (int i = 0; i < 3; ++i) {
      pw[i] = world_from_object * tri.vertices[i];
      pc[i] = cam_from_world * (pw[i] - viewpoint.position);
      if (pc[i].z() <= kNearPlane) {
        throw std::runtime_error("render: object crosses the camera near plane");
      }
      ps[i] = {cam.fx * pc[i].x() / pc[i].z() + cam.cx, cam.fy * pc[i].y() / pc[i].z() + cam.cy};
    }
    const double area = (ps[1] - ps[0]).x() * (ps[2] - ps[0]).y() -
                        (ps[1] - ps[0]).y() * (ps[2] - ps[0]).x();
    if (std::abs(area) < 1e-12) continue;

    const Eigen::Vector3d normal = (pw[1] - pw[0]).cross(pw[2] - pw[0]).normalized();
    const double shade = kAmbient + kDiffuse * std::max(0.0, normal.dot(light_direction()));
    const ImageU8& tex = texture.slots.at(static_cast<std::size_t>(tri.slot));

    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min({ps[0].x(), ps[1].x(), ps[2].x()}))));
    const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(std::max({ps[0].x(), ps[1].x(), ps[2].x()}))));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min({ps[0].y(), ps[1].y(), ps[2].y()}))));
    const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(std::max({ps[0].y(), ps[1].y(), ps[2].y()}))));

    const double inv_area = 1.0 / area;
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        const Eigen::Vector2d p(x + 0.5, y + 0.5);
        auto edge = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
          return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
        };
        const double l0 = edge(ps[1], ps[2]) * inv_area;
        const double l1 = edge(ps[2], ps[0]) * inv_area;
        const double l2 = edge(ps[0], ps[1]) * inv_area;
        if (l0 < -kEdgeEpsilon || l1 < -kEdgeEpsilon || l2 < -kEdgeEpsilon) continue;

        const double w0 = l0 / pc[0].z(), w1 = l1 / pc[1].z(), w2 = l2 / pc[2].z();
        const double inv_z = w0 + w1 + w2;
        const double z = 1.0 / inv_z;
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        if (z >= zbuf[idx]) continue;
        zbuf[idx] = z;

        const Eigen::Vector2d uv = (w0 * tri.uv[0] + w1 * tri.uv[1] + w2 * tri.uv[2]) * z;
        const int tx = std::clamp(static_cast<int>(std::floor(uv.x() * tex.width())), 0, tex.width() - 1);
        const int ty = std::clamp(static_cast<int>(std::floor((1.0 - uv.y()) * tex.height())), 0,
                                  tex.height() - 1);
        for (int c = 0; c < 3; ++c) obs.color(x, y, c) = to_u8(tex(tx, ty, c) * shade);
        obs.depth(x, y) = static_cast<std::uint16_t>(std::clamp(std::lround(z * 1000.0), 1L, 65535L));
        obs.mask(x, y) = 1;
      }
    }
  }

  obs.rect = nonzero_bounds(obs.mask);
  if (obs.rect.empty()) throw std::runtime_error("render: empty mask, object outside the frustum");

  if (options.depth_noise_sigma_mm > 0.0) {
    std::mt19937_64 rng(options.noise_seed);
    std::normal_distribution<double> noise(0.0, options.depth_noise_sigma_mm);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!obs.mask(x, y)) continue;
        const double d = obs.depth(x, y) + noise(rng);
        obs.depth(x, y) = static_cast<std::uint16_t>(std::clamp(std::lround(d), 1L, 65535L));
      }
    }
  }
  return obs;
}

Observation crop_to_object(const Observation& obs, int size) {
  if (obs.rect.empty()) throw std::invalid_argument("crop_to_object: empty mask");
  if (size <= 0) throw std::invalid_argument("crop_to_object: size must be positive");
  const double cx = 0.5 * (obs.rect.x0 + obs.rect.x1);
  const double cy = 0.5 * (obs.rect.y0 + obs.rect.y1);
  const double side = kCropMargin * std::max(obs.rect.width(), obs.rect.height());
  const double scale = side / size;
  const double left = cx - side / 2.0, top = cy - side / 2.0;
  const int sw = obs.color.width(), sh = obs.color.height();

  Observation out;
  out.color = ImageU8(size, size, 3);
  out.depth = ImageU16(size, size, 1, 0);
  out.mask = ImageU8(size, size, 1, 0);
  for (int j = 0; j < size; ++j) {
    const double sy = top + (j + 0.5) * scale;
    for (int i = 0; i < size; ++i) {
      const double sx = left + (i + 0.5) * scale;
      const int nx = static_cast<int>(std::floor(sx)), ny = static_cast<int>(std::floor(sy));
      if (obs.mask.contains(nx, ny)) {
        out.depth(i, j) = obs.depth(nx, ny);
        out.mask(i, j) = obs.mask(nx, ny);
      }
      const double gx = std::clamp(sx - 0.5, 0.0, sw - 1.0);
      const double gy = std::clamp(sy - 0.5, 0.0, sh - 1.0);
      const int x0 = std::min(static_cast<int>(gx), sw - 1), y0 = std::min(static_cast<int>(gy), sh - 1);
      const int x1 = std::min(x0 + 1, sw - 1), y1 = std::min(y0 + 1, sh - 1);
      const double fx = gx - x0, fy = gy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top_row = (1 - fx) * obs.color(x0, y0, c) + fx * obs.color(x1, y0, c);
        const double bottom_row = (1 - fx) * obs.color(x0, y1, c) + fx * obs.color(x1, y1, c);
        out.color(i, j, c) = to_u8((1 - fy) * top_row + fy * bottom_row);
      }
    }
  }
  out.rect = nonzero_bounds(out.mask);
  if (out.rect.empty()) throw std::runtime_error("crop_to_object: crop lost the object");
  return out;
}

Scene::Scene(ProductSpec spec, ViewpointRing ring, CameraIntrinsics cam, RenderOptions options)
    : spec_(std::move(spec)), ring_(ring), cam_(cam), options_(options) {
  spec_.validate();
  cam_.validate();
  mesh_ = canonical_mesh(spec_);
  texture_ = procedural_texture(spec_);
  viewpoints_ = viewpoint_candidates(ring_);
}

Observation Scene::render(const ObjectPose& pose, int viewpoint) const {
  if (viewpoint < 0 || viewpoint >= static_cast<int>(viewpoints_.size())) {
    throw std::out_of_range("Scene::render: viewpoint index out of range");
  }
  RenderOptions options = options_;
  options.noise_seed ^= (static_cast<std::uint64_t>(pose.poseclass.index) << 40) ^
                        (static_cast<std::uint64_t>(viewpoint) << 32) ^
                        static_cast<std::uint64_t>(std::llround(pose.yaw_deg * 1000.0));
  return apnv::render(mesh_, pose_placement(spec_, pose), viewpoints_[static_cast<std::size_t>(viewpoint)],
                      cam_, texture_, options);
}

}  // namespace apnv
