// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "apnv/digest.hpp"
#include "apnv/error.hpp"
#include "apnv/geometry.hpp"
#include "apnv/parallel.hpp"

namespace fs = std::filesystem;

namespace apnv {

namespace {

constexpr int kChannels = 4;
constexpr double kSuccessThreshold = 30.0;

fs::path cache_path(const Manifest& manifest, int resolution) {
  nlohmann::json j{{"meta", manifest.meta}, {"records", manifest.records}, {"resolution", resolution}};
  return manifest.root / ".cache" / ("inputs-r" + std::to_string(resolution) + "-" + json_digest(j) + ".f32");
}

void augment_colors(Eigen::MatrixXf& input, Eigen::Index pixels, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> gain(0.8f, 1.2f);
  for (Eigen::Index begin = 0; begin < input.cols(); begin += pixels) {
    std::array<int, 3> perm{0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::MatrixXf rgb = input.block(0, begin, 3, pixels);
    for (int c = 0; c < 3; ++c) input.block(c, begin, 1, pixels) = (rgb.row(perm[c]) * gain(rng)).cwiseMin(1.0f);
  }
}

}  // namespace

SampleStore::SampleStore(const Manifest& manifest, int resolution, int jobs, bool use_cache)
    : manifest_(&manifest), resolution_(resolution) {
  if (resolution <= 0) throw ConfigError("sample store: resolution must be positive");
  const Eigen::Index pixels = Eigen::Index(resolution) * resolution;
  data_.resize(kChannels, pixels * static_cast<Eigen::Index>(manifest.records.size()));
  const fs::path cache = use_cache ? cache_path(manifest, resolution) : fs::path();
  if (use_cache && fs::exists(cache) &&
      fs::file_size(cache) == static_cast<std::uintmax_t>(data_.size()) * sizeof(float)) {
    std::ifstream in(cache, std::ios::binary);
    if (in.read(reinterpret_cast<char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(float)))) {
      return;
    }
  }
  parallel_for(manifest.records.size(), jobs, [&](std::size_t i) {
    const Observation obs = load_observation(manifest, manifest.records[i]);
    data_.middleCols(static_cast<Eigen::Index>(i) * pixels, pixels) = network_input(obs, resolution);
  });
  if (use_cache) {
    std::error_code ec;
    fs::create_directories(cache.parent_path(), ec);
    const fs::path tmp = cache.string() + ".tmp";
    std::ofstream out(tmp, std::ios::binary);
    out.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(float)));
    out.close();
    if (out) fs::rename(tmp, cache, ec);
  }
}

Eigen::Map<const Eigen::MatrixXf> SampleStore::input(std::size_t record) const {
  const Eigen::Index pixels = Eigen::Index(resolution_) * resolution_;
  return Eigen::Map<const Eigen::MatrixXf>(data_.data() + static_cast<Eigen::Index>(record) * pixels * kChannels,
                                           kChannels, pixels);
}

Eigen::MatrixXf SampleStore::batch(std::span<const std::size_t> records) const {
  const Eigen::Index pixels = Eigen::Index(resolution_) * resolution_;
  Eigen::MatrixXf out(kChannels, pixels * static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.middleCols(static_cast<Eigen::Index>(i) * pixels, pixels) = input(records[i]);
  }
  return out;
}

double camera_yaw(const ViewpointRing& ring, int viewpoint, double world) {
  if (viewpoint == 0) return wrap_degrees(world);
  return wrap_degrees(world - 360.0 * (viewpoint - 1) / ring.n);
}

double world_yaw(const ViewpointRing& ring, int viewpoint, double camera) {
  if (viewpoint == 0) return wrap_degrees(camera);
  return wrap_degrees(camera + 360.0 * (viewpoint - 1) / ring.n);
}

Targets make_targets(const Manifest& manifest, std::span<const std::size_t> records, bool with_nv) {
  Targets t;
  for (std::size_t i : records) {
    const SampleRecord& r = manifest.records.at(i);
    t.poseclass.push_back(r.poseclass);
    t.yaw_deg.push_back(camera_yaw(manifest.meta.ring, r.viewpoint, r.yaw_deg));
    t.nv.push_back(with_nv && r.viewpoint == 0 ? r.nv_label.v : -1);
  }
  return t;
}

int select_best_epoch(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("select_best_epoch: no epochs");
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin()) + 1;
}

Evaluation evaluate_records(const Network<float>& net, const SampleStore& store,
                            std::span<const std::size_t> records) {
  const Manifest& m = store.manifest();
  constexpr std::size_t kChunk = 256;
  std::size_t hits = 0, nv_hits = 0, overhead = 0;
  for (std::size_t begin = 0; begin < records.size(); begin += kChunk) {
    const auto chunk = records.subspan(begin, std::min(kChunk, records.size() - begin));
    const ModelOutput<float> out = net.forward(store.batch(chunk));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const SampleRecord& r = m.records[chunk[i]];
      const ProductSpec& spec = m.meta.product(r.product_id);
      ObjectPose est = decode_pose(spec.kind, out, static_cast<Eigen::Index>(i));
      est.yaw_deg = world_yaw(m.meta.ring, r.viewpoint, est.yaw_deg);
      const ObjectPose truth{{spec.kind, r.poseclass}, r.yaw_deg};
      if (angle_error(pose_to_rotation(spec, est), pose_to_rotation(spec, truth)) <= kSuccessThreshold) ++hits;
      if (r.viewpoint == 0) {
        ++overhead;
        if (decode_nv(out, static_cast<Eigen::Index>(i)) == r.nv_label.v) ++nv_hits;
      }
    }
  }
  Evaluation e;
  if (!records.empty()) e.pose_success = double(hits) / double(records.size());
  if (overhead > 0) e.nv_accuracy = double(nv_hits) / double(overhead);
  return e;
}

TrainResult train_model(const ModelConfig& config, ShapeKind shape, const SampleStore& store,
                        std::span<const std::size_t> train, std::span<const std::size_t> val,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw DataError("training split is empty");
  if (val.empty()) throw DataError("validation split is empty");
  if (config.resolution != store.resolution()) throw ConfigError("model resolution differs from the sample store");
  if (config.poseclasses != poseclass_count(shape)) throw ConfigError("model poseclass count does not match the shape");
  if (config.nv_classes != store.manifest().meta.candidates()) throw ConfigError("model NV classes do not match the ring");

  Network<float> net(config);
  net.initialize(config.seed);
  const bool with_nv = config.weights.nv > 0.0;
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(train.begin(), train.end());
  Eigen::VectorXf velocity = Eigen::VectorXf::Zero(net.parameters().size());
  Eigen::VectorXf gradient;
  Eigen::VectorXf best = net.parameters();
  double best_score = -1.0;
  int best_epoch = 0;

  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::span<const std::size_t> idx(order.data() + begin,
                                             std::min<std::size_t>(config.batch_size, order.size() - begin));
      Eigen::MatrixXf input = store.batch(idx);
      if (config.color_augment) augment_colors(input, Eigen::Index(config.resolution) * config.resolution, rng);
      const LossTerms terms = net.loss(input, make_targets(store.manifest(), idx, with_nv),
                                       config.weights, &gradient);
      if (!std::isfinite(terms.total) || !gradient.allFinite()) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
      }
      const double share = double(idx.size()) / double(order.size());
      log.train.pose_class += share * terms.pose_class;
      log.train.yaw += share * terms.yaw;
      log.train.nv += share * terms.nv;
      log.train.total += share * terms.total;
      velocity = float(config.momentum) * velocity - float(config.learning_rate) * gradient;
      net.parameters() += velocity;
    }
    const Evaluation e = evaluate_records(net, store, val);
    log.val_pose_success = e.pose_success;
    log.val_nv_accuracy = e.nv_accuracy;
    if (e.pose_success > best_score) {
      best_score = e.pose_success;
      best_epoch = epoch;
      best = net.parameters();
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.shape = shape;
  ckpt.config_digest = json_digest(nlohmann::json(config));
  ckpt.seed = config.seed;
  ckpt.best_val_pose_success = best_score;
  ckpt.epoch = best_epoch;
  ckpt.layout = net.layout();
  ckpt.parameters = best;
  return result;
}

void write_training_log(const fs::path& path, const std::vector<EpochLog>& log) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss_total,loss_pose_class,loss_yaw,loss_nv,val_pose_success,val_nv_accuracy\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train.total, e.train.pose_class,
                  e.train.yaw, e.train.nv, e.val_pose_success, e.val_nv_accuracy);
    out << buf;
  }
}

}  // namespace apnv
