// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/imageproc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace apnv {

ImageU8 grayscale(const ImageU8& color) {
  if (color.channels() != 3) throw std::invalid_argument("grayscale: expected 3 channels");
  ImageU8 gray(color.width(), color.height(), 1);
  for (int y = 0; y < color.height(); ++y) {
    for (int x = 0; x < color.width(); ++x) {
      const double v = 0.299 * color(x, y, 0) + 0.587 * color(x, y, 1) + 0.114 * color(x, y, 2);
      gray(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return gray;
}

long long EdgeMap::count() const {
  return std::count_if(marks.data().begin(), marks.data().end(), [](std::uint8_t v) { return v != 0; });
}

EdgeMap edge_map(const ImageU8& gray, double threshold) {
  if (gray.channels() != 1) throw std::invalid_argument("edge_map: expected a gray image");
  EdgeMap out{ImageU8(gray.width(), gray.height(), 1, 0), threshold};
  const double t2 = threshold * threshold;
  for (int y = 1; y + 1 < gray.height(); ++y) {
    for (int x = 1; x + 1 < gray.width(); ++x) {
      auto p = [&](int dx, int dy) { return static_cast<int>(gray(x + dx, y + dy)); };
      const int gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
      const int gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      if (static_cast<double>(gx * gx + gy * gy) >= t2) out.marks(x, y) = 1;
    }
  }
  return out;
}

ImageU8 dilate(const ImageU8& mask, int radius) {
  const int w = mask.width(), h = mask.height();
  // separable max filter: rows, then columns
  ImageU8 rows(w, h, 1, 0), out(w, h, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t m = 0;
      for (int dx = -radius; dx <= radius && !m; ++dx) {
        if (mask.contains(x + dx, y) && mask(x + dx, y)) m = 1;
      }
      rows(x, y) = m;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t m = 0;
      for (int dy = -radius; dy <= radius && !m; ++dy) {
        if (rows.contains(x, y + dy) && rows(x, y + dy)) m = 1;
      }
      out(x, y) = m;
    }
  }
  return out;
}

long long edge_count(const Observation& obs, double threshold) {
  if (nonzero_bounds(obs.mask).empty()) throw std::invalid_argument("edge_count: empty mask");
  const EdgeMap edges = edge_map(grayscale(obs.color), threshold);
  const ImageU8 region = dilate(obs.mask, kEdgeMaskDilation);
  long long n = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    n += (region.data()[i] && edges.marks.data()[i]) ? 1 : 0;
  }
  return n;
}

long long detection_rect_area(const Observation& obs) {
  const PixelRect r = nonzero_bounds(obs.mask);
  if (r.empty()) throw std::invalid_argument("detection_rect_area: empty mask");
  return r.area();
}

Segment longest_segment(const EdgeMap& edges) {
  const ImageU8& m = edges.marks;
  std::vector<Eigen::Vector2i> points;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m(x, y)) points.emplace_back(x, y);
    }
  }
  if (points.empty()) throw std::invalid_argument("longest_segment: empty edge map");

  constexpr int kAngles = 180;
  const int max_offset = static_cast<int>(std::ceil(std::hypot(m.width(), m.height())));
  const int offsets = 2 * max_offset + 1;
  std::vector<double> cos_t(kAngles), sin_t(kAngles);
  for (int t = 0; t < kAngles; ++t) {
    cos_t[t] = std::cos(deg2rad(double(t)));
    sin_t[t] = std::sin(deg2rad(double(t)));
  }
  auto offset_bin = [&](const Eigen::Vector2i& p, int t) {
    return static_cast<int>(std::lround(p.x() * cos_t[t] + p.y() * sin_t[t])) + max_offset;
  };

  std::vector<int> votes(static_cast<std::size_t>(kAngles) * offsets, 0);
  for (const auto& p : points) {
    for (int t = 0; t < kAngles; ++t) ++votes[static_cast<std::size_t>(t) * offsets + offset_bin(p, t)];
  }
  int best_t = 0, best_r = 0, best_votes = -1;
  for (int t = 0; t < kAngles; ++t) {
    for (int r = 0; r < offsets; ++r) {
      const int v = votes[static_cast<std::size_t>(t) * offsets + r];
      if (v > best_votes) {
        best_votes = v;
        best_t = t;
        best_r = r;
      }
    }
  }

  // pixels on the winning line, ordered along its direction
  std::vector<std::pair<double, Eigen::Vector2i>> line;
  for (const auto& p : points) {
    if (offset_bin(p, best_t) == best_r) {
      line.emplace_back(-p.x() * sin_t[best_t] + p.y() * cos_t[best_t], p);
    }
  }
  std::stable_sort(line.begin(), line.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  constexpr double kMaxStep = 3.0;  // at most two missing pixels between neighbours
  std::size_t run_start = 0, best_start = 0, best_end = 0;
  double best_extent = -1.0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (i > 0 && line[i].first - line[i - 1].first > kMaxStep) run_start = i;
    const double extent = line[i].first - line[run_start].first;
    if (extent > best_extent) {
      best_extent = extent;
      best_start = run_start;
      best_end = i;
    }
  }

  Segment seg;
  seg.start = line[best_start].second.cast<double>();
  seg.end = line[best_end].second.cast<double>();
  seg.length = (seg.end - seg.start).norm();
  const Eigen::Vector2d d = seg.length > 0.0
                                ? Eigen::Vector2d(seg.end - seg.start)
                                : Eigen::Vector2d(-sin_t[best_t], cos_t[best_t]);
  seg.orientation_deg = std::fmod(wrap_degrees(rad2deg(std::atan2(-d.y(), d.x()))), 180.0);
  return seg;
}

}  // namespace apnv
