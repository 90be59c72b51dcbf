// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "apnv/error.hpp"
#include "apnv/geometry.hpp"

namespace apnv {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (resolution <= 0 || channels <= 0 || feature_dim <= 0) fail("sizes must be positive");
  if (widths.empty()) fail("at least one encoder block is required");
  for (int w : widths) {
    if (w <= 0) fail("encoder widths must be positive");
  }
  if (widths.size() >= 31 || resolution % (1 << widths.size()) != 0) {
    fail("resolution must be divisible by 2^(number of blocks)");
  }
  if (poseclasses <= 0 || nv_classes <= 0) fail("class counts must be positive");
  if (weights.pose_class < 0 || weights.yaw < 0 || weights.nv < 0) fail("loss weights must be non-negative");
  if (!(learning_rate > 0) || momentum < 0 || momentum >= 1) fail("bad optimizer settings");
  if (batch_size <= 0 || epochs <= 0) fail("batch size and epochs must be positive");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"pose_class", w.pose_class}, {"yaw", w.yaw}, {"nv", w.nv}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.pose_class = j.at("pose_class").get<double>();
  w.yaw = j.at("yaw").get<double>();
  w.nv = j.at("nv").get<double>();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"resolution", c.resolution},   {"channels", c.channels},
                     {"widths", c.widths},           {"feature_dim", c.feature_dim},
                     {"poseclasses", c.poseclasses}, {"nv_classes", c.nv_classes},
                     {"weights", c.weights},         {"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},       {"batch_size", c.batch_size},
                     {"epochs", c.epochs},           {"seed", c.seed},
                     {"color_augment", c.color_augment}, {"flatten", c.flatten}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.resolution = j.value("resolution", d.resolution);
  c.channels = j.value("channels", d.channels);
  c.widths = j.value("widths", d.widths);
  c.feature_dim = j.value("feature_dim", d.feature_dim);
  c.poseclasses = j.value("poseclasses", d.poseclasses);
  c.nv_classes = j.value("nv_classes", d.nv_classes);
  c.weights = j.value("weights", d.weights);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.momentum = j.value("momentum", d.momentum);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.color_augment = j.value("color_augment", d.color_augment);
  c.flatten = j.value("flatten", d.flatten);
}

void to_json(nlohmann::json& j, const ParameterBlock& b) {
  j = nlohmann::json{{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"offset", b.offset}};
}

void from_json(const nlohmann::json& j, ParameterBlock& b) {
  b.name = j.at("name").get<std::string>();
  b.rows = j.at("rows").get<int>();
  b.cols = j.at("cols").get<int>();
  b.offset = j.at("offset").get<Eigen::Index>();
}

std::vector<ParameterBlock> parameter_layout(const ModelConfig& config) {
  std::vector<ParameterBlock> layout;
  Eigen::Index offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    layout.push_back({std::move(name), rows, cols, offset});
    offset += Eigen::Index(rows) * cols;
  };
  int in = config.channels;
  for (std::size_t i = 0; i < config.widths.size(); ++i) {
    const std::string prefix = "conv" + std::to_string(i + 1);
    add(prefix + ".w", config.widths[i], 9 * in);
    add(prefix + ".b", config.widths[i], 1);
    in = config.widths[i];
  }
  const int area = config.encoded_resolution() * config.encoded_resolution();
  add("fc.w", config.feature_dim, config.flatten ? in * area : in);
  add("fc.b", config.feature_dim, 1);
  add("pose.w", config.poseclasses, config.feature_dim);
  add("pose.b", config.poseclasses, 1);
  add("yaw.w", 2, config.feature_dim);
  add("yaw.b", 2, 1);
  add("nv.w", config.nv_classes, config.feature_dim);
  add("nv.b", config.nv_classes, 1);
  return layout;
}

Eigen::Index parameter_count(const std::vector<ParameterBlock>& layout) {
  return layout.empty() ? 0 : layout.back().offset + layout.back().size();
}

Eigen::MatrixXf network_input(const Observation& obs, int resolution) {
  const int w = obs.color.width(), h = obs.color.height();
  if (obs.color.channels() != 3 || obs.depth.width() != w || obs.depth.height() != h || resolution <= 0) {
    throw std::invalid_argument("network_input: inconsistent observation");
  }
  Eigen::MatrixXf out(4, resolution * resolution);
  // box filter with fractional pixel weights
  const double scale_x = double(w) / resolution, scale_y = double(h) / resolution;
  for (int oy = 0; oy < resolution; ++oy) {
    const double y0 = oy * scale_y, y1 = (oy + 1) * scale_y;
    for (int ox = 0; ox < resolution; ++ox) {
      const double x0 = ox * scale_x, x1 = (ox + 1) * scale_x;
      double acc[4] = {0, 0, 0, 0}, total = 0;
      for (int y = int(y0); y < std::min(h, int(std::ceil(y1))); ++y) {
        const double wy = std::min(y1, y + 1.0) - std::max(y0, double(y));
        for (int x = int(x0); x < std::min(w, int(std::ceil(x1))); ++x) {
          const double wt = wy * (std::min(x1, x + 1.0) - std::max(x0, double(x)));
          for (int c = 0; c < 3; ++c) acc[c] += wt * obs.color(x, y, c);
          acc[3] += wt * std::min(1000.0, double(obs.depth(x, y)));
          total += wt;
        }
      }
      const int col = oy * resolution + ox;
      for (int c = 0; c < 3; ++c) out(c, col) = float(acc[c] / total / 255.0);
      out(3, col) = float(acc[3] / total / 1000.0);
    }
  }
  return out;
}

template <typename Scalar>
MatrixX<Scalar> softmax(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Scalar m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp().matrix();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

template MatrixX<float> softmax(const MatrixX<float>&);
template MatrixX<double> softmax(const MatrixX<double>&);

double nv_cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& z, int target) {
  if (target < 0 || target >= z.size()) throw std::out_of_range("nv_cross_entropy: target index");
  return -std::log(std::max(z(target), 1e-12));
}

namespace {

// Column j = (n * ho + oy) * ho + ox; row = tap * channels + c with tap = ky * 3 + kx.
template <typename Scalar>
MatrixX<Scalar> im2col(const MatrixX<Scalar>& x, int channels, int size, int batch) {
  const int out = size / 2;
  MatrixX<Scalar> cols = MatrixX<Scalar>::Zero(9 * channels, Eigen::Index(batch) * out * out);
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        Scalar* dst = cols.data() + ((Eigen::Index(n) * out + oy) * out + ox) * 9 * channels;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= size) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= size) continue;
            const Scalar* src = x.data() + ((Eigen::Index(n) * size + iy) * size + ix) * channels;
            std::memcpy(dst + (ky * 3 + kx) * channels, src, sizeof(Scalar) * channels);
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
MatrixX<Scalar> col2im(const MatrixX<Scalar>& cols, int channels, int size, int batch) {
  const int out = size / 2;
  MatrixX<Scalar> x = MatrixX<Scalar>::Zero(channels, Eigen::Index(batch) * size * size);
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        const Scalar* src = cols.data() + ((Eigen::Index(n) * out + oy) * out + ox) * 9 * channels;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= size) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= size) continue;
            Scalar* dst = x.data() + ((Eigen::Index(n) * size + iy) * size + ix) * channels;
            const Scalar* s = src + (ky * 3 + kx) * channels;
            for (int c = 0; c < channels; ++c) dst[c] += s[c];
          }
        }
      }
    }
  }
  return x;
}

}  // namespace

template <typename Scalar>
struct Network<Scalar>::Cache {
  std::vector<Matrix> cols;     // im2col input of each block
  std::vector<Matrix> outputs;  // post-ReLU output of each block
  Matrix pooled;
  Matrix hidden;
};

template <typename Scalar>
Network<Scalar>::Network(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  layout_ = parameter_layout(config_);
  params_ = Vector::Zero(parameter_count(layout_));
}

template <typename Scalar>
void Network<Scalar>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.setZero();
  for (const auto& b : layout_) {
    if (b.cols == 1 && b.name.ends_with(".b")) continue;
    const bool head = b.name.starts_with("pose.") || b.name.starts_with("yaw.") || b.name.starts_with("nv.");
    std::normal_distribution<double> dist(0.0, std::sqrt((head ? 1.0 : 2.0) / b.cols));
    for (Eigen::Index i = 0; i < b.size(); ++i) params_(b.offset + i) = Scalar(dist(rng));
  }
}

template <typename Scalar>
const ParameterBlock& Network<Scalar>::block(const std::string& name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw std::out_of_range("no parameter block " + name);
}

template <typename Scalar>
Eigen::Map<const MatrixX<Scalar>> Network<Scalar>::view(const ParameterBlock& b) const {
  return Eigen::Map<const Matrix>(params_.data() + b.offset, b.rows, b.cols);
}

template <typename Scalar>
ModelOutput<Scalar> Network<Scalar>::forward(const Matrix& input) const {
  return run(input, nullptr);
}

template <typename Scalar>
std::vector<bool> Network<Scalar>::relu_pattern(const Matrix& input) const {
  Cache cache;
  run(input, &cache);
  std::vector<bool> pattern;
  auto add = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) pattern.push_back(m.data()[i] > Scalar(0));
  };
  for (const auto& out : cache.outputs) add(out);
  add(cache.hidden);
  return pattern;
}

template <typename Scalar>
ModelOutput<Scalar> Network<Scalar>::run(const Matrix& input, Cache* cache) const {
  const int pixels = config_.resolution * config_.resolution;
  if (input.rows() != config_.channels || input.cols() == 0 || input.cols() % pixels != 0) {
    throw std::invalid_argument("forward: input must be channels x (batch * resolution^2)");
  }
  const int batch = static_cast<int>(input.cols() / pixels);

  Matrix x = input;
  int size = config_.resolution, channels = config_.channels;
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    const std::string prefix = "conv" + std::to_string(i + 1);
    Matrix cols = im2col(x, channels, size, batch);
    Matrix y = view(block(prefix + ".w")) * cols;
    y.colwise() += view(block(prefix + ".b")).col(0);
    y = y.cwiseMax(Scalar(0));
    if (cache) cache->cols.push_back(std::move(cols));
    x = std::move(y);
    if (cache) cache->outputs.push_back(x);
    size /= 2;
    channels = config_.widths[i];
  }

  const int area = size * size;
  Matrix pooled;
  if (config_.flatten) {
    pooled = x.reshaped(Eigen::Index(channels) * area, batch);
  } else {
    pooled.resize(channels, batch);
    for (int n = 0; n < batch; ++n) pooled.col(n) = x.middleCols(Eigen::Index(n) * area, area).rowwise().mean();
  }

  Matrix hidden = view(block("fc.w")) * pooled;
  hidden.colwise() += view(block("fc.b")).col(0);
  hidden = hidden.cwiseMax(Scalar(0));

  ModelOutput<Scalar> out;
  auto head = [&](const char* name) {
    Matrix z = view(block(std::string(name) + ".w")) * hidden;
    z.colwise() += view(block(std::string(name) + ".b")).col(0);
    return z;
  };
  out.pose_logits = head("pose");
  out.yaw = head("yaw");
  out.nv_logits = head("nv");
  out.features = hidden;
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename Scalar>
LossTerms Network<Scalar>::loss(const Matrix& input, const Targets& targets, const LossWeights& weights,
                                Vector* gradient) const {
  Cache cache;
  const ModelOutput<Scalar> out = run(input, gradient ? &cache : nullptr);
  const Eigen::Index batch = out.pose_logits.cols();
  if (static_cast<Eigen::Index>(targets.poseclass.size()) != batch ||
      static_cast<Eigen::Index>(targets.yaw_deg.size()) != batch ||
      (!targets.nv.empty() && static_cast<Eigen::Index>(targets.nv.size()) != batch)) {
    throw std::invalid_argument("loss: target count does not match the batch");
  }

  const Matrix p_pose = softmax<Scalar>(out.pose_logits);
  const Matrix p_nv = softmax<Scalar>(out.nv_logits);
  Matrix d_pose = p_pose, d_yaw(2, batch), d_nv = Matrix::Zero(p_nv.rows(), batch);
  LossTerms terms;
  Eigen::Index nv_count = 0;
  for (Eigen::Index n = 0; n < batch; ++n) {
    const int k = targets.poseclass[n];
    if (k < 0 || k >= out.pose_logits.rows()) throw std::out_of_range("loss: poseclass target");
    const Scalar m = out.pose_logits.col(n).maxCoeff();
    const double lse = double(m) + std::log(double((out.pose_logits.col(n).array() - m).exp().sum()));
    terms.pose_class += lse - double(out.pose_logits(k, n));
    d_pose(k, n) -= Scalar(1);

    const double rad = deg2rad(targets.yaw_deg[n]);
    const double ds = double(out.yaw(0, n)) - std::sin(rad), dc = double(out.yaw(1, n)) - std::cos(rad);
    terms.yaw += 0.5 * (ds * ds + dc * dc);
    d_yaw(0, n) = Scalar(ds);
    d_yaw(1, n) = Scalar(dc);

    const int v = targets.nv.empty() ? -1 : targets.nv[n];
    if (v >= 0) {
      if (v >= p_nv.rows()) throw std::out_of_range("loss: nv target");
      terms.nv += nv_cross_entropy(p_nv.col(n).template cast<double>(), v);
      d_nv.col(n) = p_nv.col(n);
      d_nv(v, n) -= Scalar(1);
      ++nv_count;
    }
  }
  terms.pose_class /= double(batch);
  terms.yaw /= double(batch);
  if (nv_count > 0) terms.nv /= double(nv_count);
  terms.total = weights.pose_class * terms.pose_class + weights.yaw * terms.yaw + weights.nv * terms.nv;
  if (!gradient) return terms;

  d_pose *= Scalar(weights.pose_class / double(batch));
  d_yaw *= Scalar(weights.yaw / double(batch));
  if (nv_count > 0) d_nv *= Scalar(weights.nv / double(nv_count));

  Vector& grad = *gradient;
  grad = Vector::Zero(params_.size());
  auto gview = [&](const std::string& name) {
    const ParameterBlock& b = block(name);
    return Eigen::Map<Matrix>(grad.data() + b.offset, b.rows, b.cols);
  };

  Matrix d_hidden = Matrix::Zero(cache.hidden.rows(), batch);
  auto head_backward = [&](const char* name, const Matrix& dz) {
    gview(std::string(name) + ".w").noalias() = dz * cache.hidden.transpose();
    gview(std::string(name) + ".b") = dz.rowwise().sum();
    d_hidden.noalias() += view(block(std::string(name) + ".w")).transpose() * dz;
  };
  head_backward("pose", d_pose);
  head_backward("yaw", d_yaw);
  head_backward("nv", d_nv);
  d_hidden = (cache.hidden.array() > Scalar(0)).select(d_hidden, Scalar(0));

  gview("fc.w").noalias() = d_hidden * cache.pooled.transpose();
  gview("fc.b") = d_hidden.rowwise().sum();
  const Matrix d_pooled = view(block("fc.w")).transpose() * d_hidden;

  const int blocks = static_cast<int>(config_.widths.size());
  const int area = config_.encoded_resolution() * config_.encoded_resolution();
  const int last = config_.widths.back();
  Matrix dx(last, batch * area);
  if (config_.flatten) {
    dx = d_pooled.reshaped(last, batch * area);
  } else {
    for (Eigen::Index n = 0; n < batch; ++n) {
      dx.middleCols(n * area, area) = (d_pooled.col(n) / Scalar(area)).replicate(1, area);
    }
  }
  if (tamper_encoder_gradient) tamper_encoder_gradient(dx);

  int size = config_.encoded_resolution() * 2;
  for (int i = blocks - 1; i >= 0; --i) {
    const std::string prefix = "conv" + std::to_string(i + 1);
    const Matrix dy = (cache.outputs[i].array() > Scalar(0)).select(dx, Scalar(0));
    gview(prefix + ".w").noalias() = dy * cache.cols[i].transpose();
    gview(prefix + ".b") = dy.rowwise().sum();
    if (i > 0) {
      const Matrix dcols = view(block(prefix + ".w")).transpose() * dy;
      dx = col2im(dcols, config_.widths[i - 1], size, static_cast<int>(batch));
    }
    size *= 2;
  }
  return terms;
}

template class Network<float>;
template class Network<double>;

template <typename Scalar>
ObjectPose decode_pose(ShapeKind kind, const ModelOutput<Scalar>& out, Eigen::Index i) {
  Eigen::Index k = 0;
  out.pose_logits.col(i).maxCoeff(&k);
  if (k >= poseclass_count(kind)) throw std::out_of_range("decode_pose: poseclass count mismatch");
  const double yaw = rad2deg(std::atan2(double(out.yaw(0, i)), double(out.yaw(1, i))));
  return ObjectPose{PoseClass{kind, static_cast<int>(k)}, wrap_degrees(yaw)};
}

template <typename Scalar>
int decode_nv(const ModelOutput<Scalar>& out, Eigen::Index i) {
  Eigen::Index v = 0;
  out.nv_logits.col(i).maxCoeff(&v);
  return static_cast<int>(v);
}

template ObjectPose decode_pose(ShapeKind, const ModelOutput<float>&, Eigen::Index);
template ObjectPose decode_pose(ShapeKind, const ModelOutput<double>&, Eigen::Index);
template int decode_nv(const ModelOutput<float>&, Eigen::Index);
template int decode_nv(const ModelOutput<double>&, Eigen::Index);

GradientCheck gradient_check(const Network<double>& net, const Eigen::MatrixXd& input, const Targets& targets,
                             const LossWeights& weights, int samples, double h, std::uint64_t seed) {
  Eigen::VectorXd analytic;
  net.loss(input, targets, weights, &analytic);
  Network<double> probe = net;
  probe.tamper_encoder_gradient = nullptr;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, net.parameters().size() - 1);
  const std::vector<bool> base = probe.relu_pattern(input);
  GradientCheck result;
  while (result.checked < samples) {
    const Eigen::Index i = pick(rng);
    const double original = probe.parameters()(i);
    probe.parameters()(i) = original + h;
    const double up = probe.loss(input, targets, weights, nullptr).total;
    const bool up_smooth = probe.relu_pattern(input) == base;
    probe.parameters()(i) = original - h;
    const double down = probe.loss(input, targets, weights, nullptr).total;
    const bool down_smooth = probe.relu_pattern(input) == base;
    probe.parameters()(i) = original;
    if (!up_smooth || !down_smooth) {
      if (++result.skipped > samples) throw std::runtime_error("gradient check: too many probes straddle a kink");
      continue;
    }
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic(i)), 1e-6});
    const double rel = std::abs(numeric - analytic(i)) / scale;
    if (rel > result.max_relative_error || result.worst_parameter < 0) {
      result.max_relative_error = rel;
      result.worst_parameter = i;
    }
    ++result.checked;
  }
  return result;
}

template <typename Scalar>
void randomize_biases(Network<Scalar>& net, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (const auto& b : net.layout()) {
    if (!b.name.ends_with(".b")) continue;
    for (Eigen::Index i = 0; i < b.size(); ++i) net.parameters()(b.offset + i) = Scalar(dist(rng));
  }
}

template void randomize_biases(Network<float>&, std::uint64_t, double);
template void randomize_biases(Network<double>&, std::uint64_t, double);

ModelConfig reduced_model_config(int poseclasses, int nv_classes) {
  ModelConfig c;
  c.resolution = 16;
  c.widths = {4, 8};
  c.feature_dim = 16;
  c.poseclasses = poseclasses;
  c.nv_classes = nv_classes;
  return c;
}

}  // namespace apnv
