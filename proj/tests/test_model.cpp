// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <random>

#include "apnv/checkpoint.hpp"
#include "apnv/error.hpp"
#include "apnv/model.hpp"
#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace apnv;
using Catch::Approx;

namespace {

Eigen::MatrixXd random_input(const ModelConfig& c, int batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(c.channels, Eigen::Index(batch) * c.resolution * c.resolution);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

Targets random_targets(const ModelConfig& c, int batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Targets t;
  for (int n = 0; n < batch; ++n) {
    t.poseclass.push_back(static_cast<int>(rng() % c.poseclasses));
    t.yaw_deg.push_back(double(rng() % 360));
    t.nv.push_back(n % 3 == 2 ? -1 : static_cast<int>(rng() % c.nv_classes));
  }
  return t;
}

Network<double> checked_network(const ModelConfig& c, std::uint64_t seed) {
  Network<double> net(c);
  net.initialize(seed);
  randomize_biases(net, seed + 1);
  return net;
}

}  // namespace

TEST_CASE("NV cross entropy equals direct summation over a one-hot target") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 7);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = u(rng);
    z /= z.sum();
    const int target = static_cast<int>(rng() % n);
    double direct = 0.0;
    for (int i = 0; i < n; ++i) direct -= (i == target ? 1.0 : 0.0) * std::log(z(i));
    worst = std::max(worst, std::abs(nv_cross_entropy(z, target) - direct));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("NV cross entropy at certainty and at uniform predictions") {
  CHECK(nv_cross_entropy(Eigen::VectorXd::Unit(5, 2), 2) == 0.0);
  for (int n = 1; n <= 8; ++n) {
    const Eigen::VectorXd z = Eigen::VectorXd::Constant(n + 1, 1.0 / (n + 1));
    for (int t = 0; t <= n; ++t) CHECK(std::abs(nv_cross_entropy(z, t) - std::log(n + 1.0)) <= 1e-9);
  }
  CHECK(std::abs(nv_cross_entropy(Eigen::VectorXd::Constant(5, 0.2), 4) - 1.6094379124341003) <= 1e-9);
  CHECK(std::isfinite(nv_cross_entropy(Eigen::VectorXd::Unit(5, 0), 3)));
}

TEST_CASE("softmax columns are distributions even for huge logits") {
  Eigen::MatrixXd logits(3, 2);
  logits << 1000, -5, 1001, 0, 999, 5;
  const Eigen::MatrixXd p = softmax<double>(logits);
  CHECK(p.allFinite());
  CHECK(p.col(0).sum() == Approx(1.0));
  CHECK(p.col(1).sum() == Approx(1.0));
  CHECK(p(1, 0) > p(0, 0));
}

TEST_CASE("parameter layout is contiguous") {
  for (bool flatten : {false, true}) {
    ModelConfig c;
    c.flatten = flatten;
    const auto layout = parameter_layout(c);
    Eigen::Index offset = 0;
    for (const auto& b : layout) {
      CHECK(b.offset == offset);
      offset += b.size();
    }
    CHECK(parameter_count(layout) == offset);
    CHECK(layout.front().name == "conv1.w");
    CHECK(layout.back().name == "nv.b");
    CHECK(Network<float>(c).parameters().size() == offset);
  }
}

TEST_CASE("model configs validate and round trip through JSON") {
  ModelConfig c;
  c.epochs = 3;
  c.widths = {8, 16, 32};
  CHECK(nlohmann::json(c).get<ModelConfig>() == c);
  ModelConfig bad = c;
  bad.resolution = 20;  // not divisible by 2^3
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.learning_rate = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("forward pass sanity") {
  const ModelConfig c = reduced_model_config();
  Network<double> net(c);
  net.initialize(3);

  SECTION("zero input gives finite outputs") {
    const auto out = net.forward(Eigen::MatrixXd::Zero(c.channels, 3 * 256));
    CHECK(out.pose_logits.allFinite());
    CHECK(out.yaw.allFinite());
    CHECK(out.nv_logits.allFinite());
  }
  SECTION("duplicated samples give identical outputs") {
    Eigen::MatrixXd x = random_input(c, 3, 4);
    x.middleCols(2 * 256, 256) = x.middleCols(0, 256);
    const auto out = net.forward(x);
    CHECK(out.pose_logits.col(0) == out.pose_logits.col(2));
    CHECK(out.nv_logits.col(0) == out.nv_logits.col(2));
  }
  SECTION("permuting the batch permutes the outputs") {
    const Eigen::MatrixXd x = random_input(c, 3, 5);
    Eigen::MatrixXd y(x.rows(), x.cols());
    const int order[3] = {2, 0, 1};
    for (int i = 0; i < 3; ++i) y.middleCols(i * 256, 256) = x.middleCols(order[i] * 256, 256);
    const auto a = net.forward(x), b = net.forward(y);
    for (int i = 0; i < 3; ++i) {
      CHECK(b.pose_logits.col(i).isApprox(a.pose_logits.col(order[i]), 1e-12));
      CHECK(b.yaw.col(i).isApprox(a.yaw.col(order[i]), 1e-12));
    }
  }
  SECTION("float and double networks agree") {
    Network<float> f(c);
    f.parameters() = net.parameters().cast<float>();
    const Eigen::MatrixXd x = random_input(c, 2, 6);
    const auto a = net.forward(x);
    const auto b = f.forward(x.cast<float>());
    CHECK((a.pose_logits - b.pose_logits.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
  }
  SECTION("malformed input is rejected") {
    CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(3, 256)), std::invalid_argument);
    CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(4, 250)), std::invalid_argument);
  }
}

TEST_CASE("loss terms add up with the configured weights") {
  const ModelConfig c = reduced_model_config();
  const Network<double> net = checked_network(c, 7);
  const Eigen::MatrixXd x = random_input(c, 4, 8);
  const Targets t = random_targets(c, 4, 9);
  const LossTerms unit = net.loss(x, t, {1, 1, 1}, nullptr);
  const LossTerms nv_only = net.loss(x, t, {0, 0, 2.5}, nullptr);
  CHECK(nv_only.total == 2.5 * unit.nv);
  const LossTerms mixed = net.loss(x, t, {0.5, 2.0, 0.25}, nullptr);
  CHECK(mixed.total == Approx(0.5 * unit.pose_class + 2.0 * unit.yaw + 0.25 * unit.nv).epsilon(1e-14));
}

TEST_CASE("masked NV targets do not contribute") {
  const ModelConfig c = reduced_model_config();
  const Network<double> net = checked_network(c, 7);
  const Eigen::MatrixXd x = random_input(c, 2, 8);
  Targets t{{0, 1}, {10.0, 20.0}, {-1, -1}};
  CHECK(net.loss(x, t, {1, 1, 1}, nullptr).nv == 0.0);
  Eigen::VectorXd g;
  net.loss(x, t, {0, 0, 1}, &g);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decoding heads") {
  ModelOutput<double> out;
  out.pose_logits = Eigen::MatrixXd::Zero(6, 1);
  out.pose_logits(3, 0) = 1.0;
  out.yaw = Eigen::MatrixXd(2, 1);
  out.yaw << 0.0, 1.0;
  out.nv_logits = Eigen::MatrixXd::Zero(5, 1);
  ObjectPose p = decode_pose(ShapeKind::RectangularPrism, out);
  CHECK(p.poseclass.index == 3);
  CHECK(p.yaw_deg == Approx(0.0).margin(1e-12));
  out.yaw << 1.0, 0.0;
  CHECK(decode_pose(ShapeKind::RectangularPrism, out).yaw_deg == Approx(90.0));
  out.yaw << 0.0, -1.0;
  CHECK(decode_pose(ShapeKind::RectangularPrism, out).yaw_deg == Approx(180.0));
  out.yaw << -1.0, 0.0;
  CHECK(decode_pose(ShapeKind::RectangularPrism, out).yaw_deg == Approx(270.0));
  CHECK(decode_nv(out) == 0);
  out.pose_logits(5, 0) = 2.0;
  CHECK_THROWS(decode_pose(ShapeKind::TriangularPrism, out));
}

TEST_CASE("analytic gradients match central differences on the reduced model") {
  for (bool flatten : {false, true}) {
    ModelConfig c = reduced_model_config();
    c.flatten = flatten;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Network<double> net = checked_network(c, seed);
      const GradientCheck g = gradient_check(net, random_input(c, 4, seed + 10), random_targets(c, 4, seed + 20),
                                             c.weights, 200, 1e-5, seed);
      CHECK(g.checked == 200);
      CHECK(g.max_relative_error < 1e-3);
    }
  }
}

TEST_CASE("a corrupted encoder gradient fails the check") {
  const ModelConfig c = reduced_model_config();
  Network<double> net = checked_network(c, 4);
  net.tamper_encoder_gradient = [](Eigen::MatrixXd& dx) { dx *= 0.5; };
  const GradientCheck g = gradient_check(net, random_input(c, 4, 5), random_targets(c, 4, 6), c.weights, 300);
  CHECK(g.max_relative_error > 1e-3);
}

TEST_CASE("zero loss weights give zero gradients") {
  const ModelConfig c = reduced_model_config();
  const Network<double> net = checked_network(c, 5);
  Eigen::VectorXd g;
  net.loss(random_input(c, 3, 1), random_targets(c, 3, 2), {0, 0, 0}, &g);
  CHECK(g.size() == net.parameters().size());
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoints round trip byte for byte") {
  const auto dir = test::scratch_dir("checkpoint");
  ModelConfig c = reduced_model_config(8, 5);
  Network<float> net(c);
  net.initialize(12);
  Checkpoint ck;
  ck.config = c;
  ck.shape = ShapeKind::Cylinder;
  ck.config_digest = "abc";
  ck.seed = 12;
  ck.best_val_pose_success = 0.625;
  ck.epoch = 4;
  ck.layout = net.layout();
  ck.parameters = net.parameters();
  save_checkpoint(dir / "a.apnv", ck);
  const Checkpoint back = load_checkpoint(dir / "a.apnv");
  CHECK(back == ck);
  save_checkpoint(dir / "b.apnv", back);
  CHECK(test::slurp(dir / "a.apnv") == test::slurp(dir / "b.apnv"));
  CHECK(checkpoint_digest(dir / "a.apnv") == checkpoint_digest(dir / "b.apnv"));
  CHECK(back.network().parameters() == net.parameters());

  const std::string bytes = test::slurp(dir / "a.apnv");
  std::ofstream(dir / "trailing.apnv", std::ios::binary) << bytes << 'x';
  CHECK_THROWS_AS(load_checkpoint(dir / "trailing.apnv"), DataError);
  std::ofstream(dir / "short.apnv", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.apnv"), DataError);
  std::ofstream(dir / "magic.apnv", std::ios::binary) << "APNV9" << bytes.substr(5);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.apnv"), DataError);
}
