// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/strategy.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "apnv/error.hpp"
#include "apnv/geometry.hpp"
#include "apnv/train.hpp"

namespace apnv {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::FixedOverhead: return "fixed";
    case StrategyKind::EdgeBased: return "edge";
    case StrategyKind::Learned: return "learned";
    case StrategyKind::OracleNV: return "oracle";
  }
  return "unknown";
}

StrategyKind strategy_from_string(std::string_view name) {
  if (name == "fixed" || name == "fixed-overhead") return StrategyKind::FixedOverhead;
  if (name == "edge" || name == "edge-based") return StrategyKind::EdgeBased;
  if (name == "learned") return StrategyKind::Learned;
  if (name == "oracle" || name == "oracle-nv") return StrategyKind::OracleNV;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

std::vector<StrategyKind> parse_strategies(std::string_view list) {
  std::vector<StrategyKind> out;
  std::size_t begin = 0;
  while (begin <= list.size()) {
    const std::size_t end = std::min(list.find(',', begin), list.size());
    const std::string_view item = list.substr(begin, end - begin);
    if (!item.empty()) {
      const StrategyKind kind = strategy_from_string(item);
      if (std::find(out.begin(), out.end(), kind) != out.end()) {
        throw ConfigError("strategy '" + std::string(item) + "' listed twice");
      }
      out.push_back(kind);
    }
    begin = end + 1;
  }
  if (out.empty()) throw ConfigError("no strategies given");
  return out;
}

NetworkEstimator::NetworkEstimator(const Network<float>& net, ShapeKind shape, ViewpointRing ring)
    : net_(&net), shape_(shape), ring_(ring) {
  if (net.config().poseclasses != poseclass_count(shape)) {
    throw ConfigError("estimator: model poseclasses do not match the shape");
  }
  if (net.config().nv_classes != ring.n + 1) throw ConfigError("estimator: model NV classes do not match the ring");
}

ObjectPose NetworkEstimator::estimate_pose(const Observation& crop, const Viewpoint& viewpoint) const {
  const ModelOutput<float> out = net_->forward(network_input(crop, net_->config().resolution));
  ObjectPose pose = decode_pose(shape_, out);
  pose.yaw_deg = world_yaw(ring_, viewpoint.index, pose.yaw_deg);
  return pose;
}

int NetworkEstimator::estimate_nv(const Observation& crop) const {
  return decode_nv(net_->forward(network_input(crop, net_->config().resolution)));
}

int edge_based_viewpoint(const Observation& crop, const ViewpointRing& ring, const EdgeRule& rule) {
  const EdgeMap edges = edge_map(grayscale(crop.color), rule.threshold);
  if (edges.count() == 0) return 0;
  const Segment seg = longest_segment(edges);
  // screen vectors with y pointing up
  const Eigen::Vector2d center((crop.color.width() - 1) / 2.0, (crop.color.height() - 1) / 2.0);
  const Eigen::Vector2d offset(seg.midpoint().x() - center.x(), center.y() - seg.midpoint().y());
  double azimuth = wrap_degrees(seg.orientation_deg + 90.0);
  const double other = wrap_degrees(seg.orientation_deg + 270.0);
  auto along = [&](double deg) {
    return offset.dot(Eigen::Vector2d(std::cos(deg2rad(deg)), std::sin(deg2rad(deg))));
  };
  const double a = along(azimuth), b = along(other);
  if (b > a + 1e-9 || (std::abs(a - b) <= 1e-9 && other < azimuth)) azimuth = other;

  int best = 1;
  double best_gap = 1e300;
  for (int k = 1; k <= ring.n; ++k) {
    const double gap = std::abs(wrap_signed_degrees(azimuth - 360.0 * (k - 1) / ring.n));
    if (gap < best_gap - 1e-9) {
      best_gap = gap;
      best = k;
    }
  }
  return best;
}

int select_viewpoint(StrategyKind kind, const Observation& overhead_crop, const ViewpointRing& ring,
                     const PoseEstimator* stage1, std::optional<int> oracle_label, const EdgeRule& rule) {
  switch (kind) {
    case StrategyKind::FixedOverhead: return 0;
    case StrategyKind::EdgeBased: return edge_based_viewpoint(overhead_crop, ring, rule);
    case StrategyKind::Learned:
      if (!stage1) throw std::invalid_argument("learned strategy needs a stage-1 model");
      return stage1->estimate_nv(overhead_crop);
    case StrategyKind::OracleNV:
      if (!oracle_label) throw std::invalid_argument("oracle strategy needs a teaching label");
      if (*oracle_label < 0 || *oracle_label > ring.n) throw std::out_of_range("oracle label outside the candidates");
      return *oracle_label;
  }
  return 0;
}

void to_json(nlohmann::json& j, const TrialResult& t) {
  auto pose = [](const ObjectPose& p) {
    return nlohmann::json{{"poseclass", p.poseclass.index}, {"yaw", p.yaw_deg}};
  };
  j = nlohmann::json{{"product_id", t.product_id},
                     {"shape", std::string(to_string(t.truth.poseclass.kind))},
                     {"strategy", t.strategy},
                     {"fold", t.fold},
                     {"seed", t.seed},
                     {"truth", pose(t.truth)},
                     {"first", pose(t.first)},
                     {"viewpoint", t.viewpoint},
                     {"second", t.second ? pose(*t.second) : nlohmann::json(nullptr)},
                     {"final", pose(t.final_pose)},
                     {"error_deg", t.error_deg},
                     {"moved", t.moved},
                     {"renders", t.renders}};
}

void from_json(const nlohmann::json& j, TrialResult& t) {
  const ShapeKind kind = shape_kind_from_string(j.at("shape").get<std::string>());
  auto pose = [&](const nlohmann::json& p) {
    return ObjectPose{{kind, p.at("poseclass").get<int>()}, p.at("yaw").get<double>()};
  };
  t.product_id = j.at("product_id").get<std::string>();
  t.strategy = j.at("strategy").get<std::string>();
  t.fold = j.at("fold").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.truth = pose(j.at("truth"));
  t.first = pose(j.at("first"));
  t.viewpoint = j.at("viewpoint").get<int>();
  t.second = j.at("second").is_null() ? std::nullopt : std::optional<ObjectPose>(pose(j.at("second")));
  t.final_pose = pose(j.at("final"));
  t.error_deg = j.at("error_deg").get<double>();
  t.moved = j.at("moved").get<bool>();
  t.renders = j.at("renders").get<int>();
}

TrialResult run_pipeline(const ProductSpec& spec, const ObjectPose& truth, StrategyKind kind,
                         const PoseEstimator& stage1, const PoseEstimator& stage2, const ViewpointRing& ring,
                         const Capture& capture, std::optional<int> oracle_label, const EdgeRule& rule) {
  const std::vector<Viewpoint> viewpoints = viewpoint_candidates(ring);
  int renders = 0;
  auto take = [&](int v) {
    if (++renders > kMaxRendersPerTrial) throw std::logic_error("pipeline exceeded two observations");
    return capture(v);
  };

  TrialResult t;
  t.product_id = spec.id;
  t.strategy = std::string(to_string(kind));
  t.truth = truth;
  const Observation overhead = take(0);
  t.first = stage1.estimate_pose(overhead, viewpoints[0]);
  t.viewpoint = select_viewpoint(kind, overhead, ring, &stage1, oracle_label, rule);
  t.moved = t.viewpoint != 0;
  if (t.moved) {
    const Observation view = take(t.viewpoint);
    t.second = stage2.estimate_pose(view, viewpoints.at(static_cast<std::size_t>(t.viewpoint)));
    t.final_pose = *t.second;
  } else {
    t.final_pose = t.first;
  }
  t.renders = renders;
  t.error_deg = angle_error(pose_to_rotation(spec, t.final_pose), pose_to_rotation(spec, truth));
  return t;
}

CaptureCache::CaptureCache(const Scene& scene, ObjectPose pose, int crop_size)
    : scene_(&scene), pose_(pose), crop_size_(crop_size), views_(scene.viewpoints().size()) {}

Observation CaptureCache::operator()(int viewpoint) {
  auto& slot = views_.at(static_cast<std::size_t>(viewpoint));
  if (!slot) {
    try {
      slot = crop_to_object(scene_->render(pose_, viewpoint), crop_size_);
    } catch (const std::exception& e) {
      throw DataError("render failed for " + scene_->product().id + " poseclass " +
                      std::to_string(pose_.poseclass.index) + " yaw " + std::to_string(pose_.yaw_deg) +
                      " viewpoint " + std::to_string(viewpoint) + ": " + e.what());
    }
  }
  return *slot;
}

int CaptureCache::renders() const {
  int n = 0;
  for (const auto& v : views_) n += v.has_value();
  return n;
}

int teaching_label(const Scene& scene, const ObjectPose& pose, int nonmove, int crop_size, double edge_threshold,
                   bool argmax_ring_only) {
  const int candidates = static_cast<int>(scene.viewpoints().size());
  std::vector<long long> edges(static_cast<std::size_t>(candidates));
  if (pose.poseclass.index != nonmove) {
    for (int v = 0; v < candidates; ++v) {
      edges[static_cast<std::size_t>(v)] = edge_count(crop_to_object(scene.render(pose, v), crop_size), edge_threshold);
    }
  }
  return nv_teacher(edges, nonmove, pose.poseclass.index, LabelOptions{candidates, argmax_ring_only}).v;
}

void write_trials(const std::filesystem::path& path, const std::vector<TrialResult>& trials) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : trials) out << nlohmann::json(t).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<TrialResult> read_trials(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<TrialResult> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<TrialResult>());
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace apnv
