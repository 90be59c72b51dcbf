// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "apnv/dataset.hpp"
#include "apnv/shape.hpp"

namespace apnv::test {

/// Fresh, empty scratch directory under $APNV_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("APNV_TEST_TMP");
  const std::filesystem::path base = env && *env ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "apnv-tests";
  const std::filesystem::path dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ProductSpec box(double w, double d, double h, std::uint64_t seed = 3, std::string id = "box") {
  return ProductSpec{std::move(id), ShapeKind::RectangularPrism, {w, d, h}, seed};
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

/// Small corpus (2 LOOCV products and a validation product per shape, yaw step 90,
/// 48 px crops), built once per test binary under scratch directory `tag`.
inline const Manifest& tiny_corpus(const std::string& tag) {
  static const Manifest m = [&] {
    CorpusConfig c;
    c.products_per_shape = 2;
    c.sweep.yaw_step = 90;
    c.sweep.crop_size = 48;
    return build_corpus(c, scratch_dir(tag));
  }();
  return m;
}

}  // namespace apnv::test
