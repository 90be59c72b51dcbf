// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "apnv/image.hpp"
#include "apnv/render.hpp"

namespace apnv {

inline constexpr double kDefaultEdgeThreshold = 96.0;

/// Y = round(0.299 R + 0.587 G + 0.114 B).
ImageU8 grayscale(const ImageU8& color);

struct EdgeMap {
  ImageU8 marks;  ///< 0 or 1
  double threshold = kDefaultEdgeThreshold;

  long long count() const;
};

/// Marks pixels whose Sobel magnitude sqrt(gx^2 + gy^2) reaches `threshold`. The
/// one-pixel border is never marked.
EdgeMap edge_map(const ImageU8& gray, double threshold = kDefaultEdgeThreshold);

/// Square (Chebyshev) dilation of a binary mask.
ImageU8 dilate(const ImageU8& mask, int radius);

inline constexpr int kEdgeMaskDilation = 2;

/// Edge pixels of the observation's color image inside the object mask dilated by two
/// pixels, so silhouette edges count. Throws std::invalid_argument on an empty mask.
long long edge_count(const Observation& obs, double threshold = kDefaultEdgeThreshold);

/// Width x height of the detection rectangle. Throws std::invalid_argument on an
/// empty mask.
long long detection_rect_area(const Observation& obs);

struct Segment {
  Eigen::Vector2d start = Eigen::Vector2d::Zero();  ///< pixel coordinates (x right, y down)
  Eigen::Vector2d end = Eigen::Vector2d::Zero();
  double length = 0.0;           ///< pixels
  double orientation_deg = 0.0;  ///< [0, 180), counterclockwise on screen from +x

  Eigen::Vector2d midpoint() const { return 0.5 * (start + end); }
};

/// Longest straight edge: Hough voting over 1-degree normal angles and 1-pixel offsets,
/// then the longest run of marked pixels on the winning line allowing gaps of up to
/// 2 pixels. Ties go to the smaller angle bin, then the smaller offset. Throws
/// std::invalid_argument when nothing is marked.
Segment longest_segment(const EdgeMap& edges);

}  // namespace apnv
