// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "apnv/render.hpp"
#include "apnv/shape.hpp"

namespace apnv {

struct LossWeights {
  double pose_class = 1.0;
  double yaw = 1.0;
  double nv = 1.0;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct ModelConfig {
  int resolution = 64;
  int channels = 4;
  std::vector<int> widths{16, 32, 64, 128};
  int feature_dim = 128;
  int poseclasses = 6;
  int nv_classes = 5;
  LossWeights weights;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 20;
  std::uint64_t seed = 1;
  /// Random RGB channel order and gain per training sample.
  bool color_augment = true;
  /// Feed the whole final feature map to the hidden layer instead of its channel means.
  bool flatten = true;

  /// Throws ConfigError.
  void validate() const;
  /// Spatial size after the stride-2 blocks.
  int encoded_resolution() const { return resolution >> widths.size(); }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// One named parameter matrix inside the flat parameter vector (column-major).
struct ParameterBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index size() const { return Eigen::Index(rows) * cols; }
  friend bool operator==(const ParameterBlock&, const ParameterBlock&) = default;
};

void to_json(nlohmann::json& j, const ParameterBlock& b);
void from_json(const nlohmann::json& j, ParameterBlock& b);

/// conv{i}.w, conv{i}.b, ..., fc.w, fc.b, pose.w, pose.b, yaw.w, yaw.b, nv.w, nv.b.
std::vector<ParameterBlock> parameter_layout(const ModelConfig& config);
Eigen::Index parameter_count(const std::vector<ParameterBlock>& layout);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Network input for one observation: `channels` rows (R, G, B, depth) by
/// resolution^2 pixel columns in row-major pixel order. Color is scaled by 1/255 and
/// depth is clipped to [0, 1 m].
Eigen::MatrixXf network_input(const Observation& obs, int resolution);

template <typename Scalar>
struct ModelOutput {
  MatrixX<Scalar> pose_logits;  ///< poseclasses x batch
  MatrixX<Scalar> yaw;          ///< 2 x batch, rows (sin, cos)
  MatrixX<Scalar> nv_logits;    ///< nv_classes x batch
  MatrixX<Scalar> features;     ///< feature_dim x batch, input of the heads
};

struct Targets {
  std::vector<int> poseclass;
  std::vector<double> yaw_deg;
  std::vector<int> nv;            ///< teaching index, or -1 where the NV loss is masked
};

struct LossTerms {
  double pose_class = 0.0;
  double yaw = 0.0;
  double nv = 0.0;
  double total = 0.0;
};

/// Numerically stable softmax down each column.
template <typename Scalar>
MatrixX<Scalar> softmax(const MatrixX<Scalar>& logits);

/// -sum_j t(j) log max(z(j), 1e-12) for a one-hot target index.
double nv_cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& z, int target);

/// Shared convolutional encoder with poseclass, yaw and next-viewpoint heads.
template <typename Scalar>
class Network {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParameterBlock>& layout() const { return layout_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  /// He-normal weights and zero biases from `seed`.
  void initialize(std::uint64_t seed);

  /// `input` holds `batch` samples side by side: channels x (batch * resolution^2).
  ModelOutput<Scalar> forward(const Matrix& input) const;
  /// Which ReLU units are active (conv blocks, then the hidden layer) for `input`.
  std::vector<bool> relu_pattern(const Matrix& input) const;

  /// Weighted loss of a forward pass; fills `gradient` (same layout as the parameters)
  /// when non-null.
  LossTerms loss(const Matrix& input, const Targets& targets, const LossWeights& weights,
                 Vector* gradient) const;

  const ParameterBlock& block(const std::string& name) const;
  Eigen::Map<const Matrix> view(const ParameterBlock& b) const;

  /// Test hook: transforms the backward signal entering the encoder.
  std::function<void(Matrix&)> tamper_encoder_gradient;

 private:
  struct Cache;
  ModelOutput<Scalar> run(const Matrix& input, Cache* cache) const;

  ModelConfig config_;
  std::vector<ParameterBlock> layout_;
  Vector params_;
};

extern template class Network<float>;
extern template class Network<double>;

/// Poseclass argmax and atan2 yaw of column `i`; ties go to the lowest index.
template <typename Scalar>
ObjectPose decode_pose(ShapeKind kind, const ModelOutput<Scalar>& out, Eigen::Index i = 0);
/// NV argmax of column `i`; ties go to the lowest index.
template <typename Scalar>
int decode_nv(const ModelOutput<Scalar>& out, Eigen::Index i = 0);

struct GradientCheck {
  double max_relative_error = 0.0;
  Eigen::Index worst_parameter = -1;
  int checked = 0;
  /// Probes redrawn because the +-h step switched a ReLU on or off.
  int skipped = 0;
};

/// Central differences with step `h` on `samples` random parameters (seeded) against
/// the analytic gradient of `net.loss`. A probe whose step changes the ReLU pattern
/// straddles a kink and is redrawn, at most `samples` times in total.
GradientCheck gradient_check(const Network<double>& net, const Eigen::MatrixXd& input,
                             const Targets& targets, const LossWeights& weights, int samples = 200,
                             double h = 1e-5, std::uint64_t seed = 1);

/// Gives every bias a value drawn from U(-scale, scale). With zero biases, an all-zero
/// input patch puts a pre-activation exactly on the ReLU kink, where finite differences
/// see half the slope.
template <typename Scalar>
void randomize_biases(Network<Scalar>& net, std::uint64_t seed, double scale = 0.05);

/// The small configuration used for gradient checking (resolution 16, widths 4/8).
ModelConfig reduced_model_config(int poseclasses = 6, int nv_classes = 5);

}  // namespace apnv
