// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero when any
// criterion fails. The default corpus and trained checkpoints are cached under
// $APNV_ACCEPT_DIR (default ./apnv-acceptance) so a rerun only redoes the cheap parts.
// $APNV_ACCEPT_CORPUS points at an existing default corpus to reuse instead.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "apnv/config.hpp"
#include "apnv/error.hpp"
#include "apnv/eval.hpp"
#include "apnv/geometry.hpp"
#include "apnv/imageproc.hpp"

using namespace apnv;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Line> g_lines;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
  g_lines.push_back({id, name, pass, detail});
  std::cerr << "[acceptance] criterion " << id << ' ' << (pass ? "PASS" : "FAIL") << ": " << detail << '\n';
}

// Runs a criterion body; an exception fails the criterion instead of the whole run.
template <typename F>
void criterion(int id, const std::string& name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    record(id, name, false, std::string("exception: ") + e.what());
  }
}

void progress(const std::string& s) { std::cerr << "[acceptance] " << s << '\n'; }

fs::path accept_dir() {
  const char* env = std::getenv("APNV_ACCEPT_DIR");
  return env && *env ? fs::path(env) : fs::path("apnv-acceptance");
}

bool corpus_matches(const CorpusConfig& c, const CorpusMetadata& meta) {
  return c.ring == meta.ring && c.camera == meta.camera && c.sweep.yaw_step == meta.yaw_step &&
         c.sweep.crop_size == meta.crop_size && c.sweep.edge_threshold == meta.edge_threshold &&
         c.argmax_ring_only == meta.argmax_ring_only && make_products(c) == meta.products;
}

Manifest default_corpus(const RunConfig& config) {
  std::vector<fs::path> candidates;
  if (const char* env = std::getenv("APNV_ACCEPT_CORPUS"); env && *env) candidates.emplace_back(env);
  const fs::path own = accept_dir() / "corpus";
  candidates.push_back(own);
  for (const auto& dir : candidates) {
    if (!fs::exists(dir / kManifestFile)) continue;
    Manifest m = load_manifest(dir, false);
    if (corpus_matches(config.corpus, m.meta)) {
      progress("reusing corpus " + dir.string());
      return m;
    }
    progress("corpus at " + dir.string() + " does not match the default config; ignoring it");
  }
  progress("generating the default corpus under " + own.string());
  fs::remove_all(own);
  Manifest m = build_corpus(config.corpus, own);
  save_run_config(own / "run_config.json", config);
  return m;
}

// ---------------------------------------------------------------------------
// Independent oracles

std::vector<ShapeKind> shapes_in(const CorpusMetadata& meta) {
  std::vector<ShapeKind> out;
  for (const auto& p : meta.products) {
    if (std::find(out.begin(), out.end(), p.kind) == out.end()) out.push_back(p.kind);
  }
  return out;
}

// Non-move poseclass and one-hot NV labels with plain loops over the stored areas and
// edge counts.
struct NaiveLabels {
  std::map<ShapeKind, int> nonmove;
  std::vector<std::vector<int>> one_hot;
};

NaiveLabels naive_labels(const Manifest& m) {
  NaiveLabels out;
  const int views = m.meta.ring.n + 1;
  for (ShapeKind kind : shapes_in(m.meta)) {
    const int classes = poseclass_count(kind);
    std::vector<double> sum(std::size_t(classes * views), 0.0), count(std::size_t(classes * views), 0.0);
    for (const auto& r : m.records) {
      if (m.meta.product(r.product_id).kind != kind) continue;
      sum[std::size_t(r.poseclass * views + r.viewpoint)] += double(r.detection_area);
      count[std::size_t(r.poseclass * views + r.viewpoint)] += 1.0;
    }
    int best = -1;
    double best_score = 0.0;
    for (int k = 0; k < classes; ++k) {
      const double overhead = sum[std::size_t(k * views)] / count[std::size_t(k * views)];
      double score = -1e300;
      for (int i = 1; i < views; ++i) {
        score = std::max(score, sum[std::size_t(k * views + i)] / count[std::size_t(k * views + i)] / overhead);
      }
      if (best < 0 || score < best_score) best = k, best_score = score;
    }
    out.nonmove[kind] = best;
  }
  std::map<std::string, std::vector<long long>> edges;
  auto key = [](const SampleRecord& r) {
    return r.product_id + "|" + std::to_string(r.poseclass) + "|" + std::to_string(std::lround(r.yaw_deg));
  };
  for (const auto& r : m.records) {
    auto& e = edges[key(r)];
    e.resize(std::size_t(views), -1);
    e[std::size_t(r.viewpoint)] = r.edge_count;
  }
  for (const auto& r : m.records) {
    const auto& e = edges.at(key(r));
    int v = 0;
    if (r.poseclass != out.nonmove.at(m.meta.product(r.product_id).kind)) {
      const int first = m.meta.argmax_ring_only ? 1 : 0;
      v = first;
      for (int i = first + 1; i < views; ++i) {
        if (e[std::size_t(i)] > e[std::size_t(v)]) v = i;
      }
    }
    std::vector<int> hot(std::size_t(views), 0);
    hot[std::size_t(v)] = 1;
    out.one_hot.push_back(hot);
  }
  return out;
}

// Edge pixels of a crop inside its mask grown by 2 px: BT.601 gray, 3x3 Sobel, strict
// interior, squared magnitude compared against the squared threshold.
long long naive_edge_count(const Observation& obs, double threshold) {
  const int w = obs.color.width(), h = obs.color.height();
  std::vector<int> gray(std::size_t(w * h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = 0.299 * obs.color(x, y, 0) + 0.587 * obs.color(x, y, 1) + 0.114 * obs.color(x, y, 2);
      gray[std::size_t(y * w + x)] = int(std::lround(v));
    }
  }
  auto g = [&](int x, int y) { return gray[std::size_t(y * w + x)]; };
  auto near_mask = [&](int x, int y) {
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const int u = x + dx, v = y + dy;
        if (u >= 0 && v >= 0 && u < w && v < h && obs.mask(u, v)) return true;
      }
    }
    return false;
  };
  long long n = 0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1)) - (g(x - 1, y - 1) + 2 * g(x - 1, y) + g(x - 1, y + 1));
      const double gy = (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1)) - (g(x - 1, y - 1) + 2 * g(x, y - 1) + g(x + 1, y - 1));
      if (gx * gx + gy * gy >= threshold * threshold && near_mask(x, y)) ++n;
    }
  }
  return n;
}

double quaternion_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Quaterniond qa(a), qb(b);
  const double d = std::min(1.0, std::abs(qa.dot(qb)));
  return 2.0 * std::acos(d) * 180.0 / M_PI;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

// ---------------------------------------------------------------------------
// Criteria

void criterion_labels(const Manifest& m) {
  const auto t0 = Clock::now();
  const NaiveLabels naive = naive_labels(m);
  long long mismatches = 0;
  for (ShapeKind kind : shapes_in(m.meta)) mismatches += m.meta.nonmove_poseclass.at(kind) != naive.nonmove.at(kind);
  for (std::size_t i = 0; i < m.records.size(); ++i) mismatches += m.records[i].nv_label.one_hot != naive.one_hot[i];

  // The dataset module relabels from scratch; its output must equal the oracle too.
  Manifest relabeled = m;
  label_manifest(relabeled);
  for (std::size_t i = 0; i < m.records.size(); ++i) mismatches += relabeled.records[i].nv_label.one_hot != naive.one_hot[i];

  // Stored edge counts against an independent Sobel on a seeded sample of crops.
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<std::size_t> pick(0, m.records.size() - 1);
  int recount_mismatches = 0;
  const int sample = 500;
  for (int s = 0; s < sample; ++s) {
    const SampleRecord& r = m.records[pick(rng)];
    recount_mismatches += naive_edge_count(load_observation(m, r), m.meta.edge_threshold) != r.edge_count;
  }
  const double secs = seconds_since(t0);
  record(1, "labeling oracle", mismatches == 0 && recount_mismatches == 0 && secs < 60.0,
         std::to_string(m.records.size()) + " records, " + std::to_string(mismatches) + " label mismatches, " +
             std::to_string(recount_mismatches) + "/" + std::to_string(sample) + " edge recount mismatches, " +
             fmt("%.1f s", secs));
}

void criterion_nv_loss() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  double worst = 0.0, worst_uniform = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const int n = 1 + int(rng() % 8);
    Eigen::VectorXd z(n + 1);
    for (int i = 0; i <= n; ++i) z(i) = u(rng);
    z /= z.sum();
    const int target = int(rng() % std::uint64_t(n + 1));
    double direct = 0.0;
    for (int i = 0; i <= n; ++i) direct -= (i == target ? 1.0 : 0.0) * std::log(z(i));
    worst = std::max(worst, std::abs(nv_cross_entropy(z, target) - direct));
    const Eigen::VectorXd flat = Eigen::VectorXd::Constant(n + 1, 1.0 / (n + 1));
    worst_uniform = std::max(worst_uniform, std::abs(nv_cross_entropy(flat, target) - std::log(n + 1.0)));
  }
  record(2, "NV loss", worst <= 1e-9 && worst_uniform <= 1e-9,
         "max |L - direct| " + fmt("%.2e", worst) + ", max |L_uniform - ln(n+1)| " + fmt("%.2e", worst_uniform));
}

void criterion_gradient(const Manifest& m) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int checked = 0;
  for (ShapeKind kind : shapes_in(m.meta)) {
    const ModelConfig rc = reduced_model_config(poseclass_count(kind), m.meta.candidates());
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < m.records.size() && picks.size() < 6; i += 331) {
      if (m.meta.product(m.records[i].product_id).kind == kind) picks.push_back(i);
    }
    const Eigen::Index pixels = Eigen::Index(rc.resolution) * rc.resolution;
    Eigen::MatrixXd input(rc.channels, pixels * Eigen::Index(picks.size()));
    for (std::size_t c = 0; c < picks.size(); ++c) {
      input.middleCols(Eigen::Index(c) * pixels, pixels) =
          network_input(load_observation(m, m.records[picks[c]]), rc.resolution).cast<double>();
    }
    Targets targets;
    for (std::size_t i : picks) {
      targets.poseclass.push_back(m.records[i].poseclass);
      targets.yaw_deg.push_back(m.records[i].yaw_deg);
      targets.nv.push_back(m.records[i].nv_label.v);
    }
    Network<double> net(rc);
    net.initialize(17);
    randomize_biases(net, 18);
    const GradientCheck g = gradient_check(net, input, targets, rc.weights, 300, 1e-5, 19);
    worst = std::max(worst, g.max_relative_error);
    checked += g.checked;
  }
  const double secs = seconds_since(t0);
  record(3, "gradient check", worst < 1e-3 && secs < 120.0,
         "max relative error " + fmt("%.2e", worst) + " over " + std::to_string(checked) + " parameters, " +
             fmt("%.1f s", secs));
}

void criterion_rotation() {
  std::mt19937_64 rng(4);
  double worst = 0.0, worst30 = 0.0;
  std::uniform_real_distribution<double> yaw(0.0, 360.0);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Matrix3d a = random_rotation(rng), b = random_rotation(rng);
    worst = std::max(worst, std::abs(angle_error(a, b) - quaternion_angle_deg(a, b)));
    const Eigen::Vector3d axis = random_rotation(rng).col(0);
    const Eigen::Matrix3d c = a * Eigen::AngleAxisd(30.0 * M_PI / 180.0, axis).toRotationMatrix();
    worst30 = std::max(worst30, std::abs(angle_error(c, a) - 30.0));
  }
  record(4, "rotation metric", worst <= 1e-6 && worst30 <= 1e-6,
         "max |err - quaternion oracle| " + fmt("%.2e", worst) + " deg, max |30 deg offset - 30| " +
             fmt("%.2e", worst30) + " deg");
}

void criterion_pipeline(const Manifest& m, const RunConfig& config) {
  const auto& meta = m.meta;
  const auto strategies = config.strategies;
  std::map<std::string, std::pair<int, int>> counts;  // trials, violations
  std::vector<Scene> scenes;
  std::vector<ShapeKind> kinds;
  std::vector<Network<float>> nets;
  for (const auto& p : meta.products) scenes.emplace_back(p, meta.ring, meta.camera);
  for (ShapeKind kind : shapes_in(meta)) {
    kinds.push_back(kind);
    for (int stage : {1, 2}) {
      nets.emplace_back(stage_config(config.model, kind, meta, 1, stage));
      nets.back().initialize(100 + std::uint64_t(stage));
    }
  }
  std::vector<NetworkEstimator> est;
  for (std::size_t i = 0; i < nets.size(); ++i) est.emplace_back(nets[i], kinds[i / 2], meta.ring);
  auto estimator = [&](ShapeKind k, int stage) -> const PoseEstimator& {
    const auto idx = std::size_t(std::find(kinds.begin(), kinds.end(), k) - kinds.begin());
    return est[2 * idx + std::size_t(stage - 1)];
  };

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> yaw(0.0, 360.0);
  for (int t = 0; t < 500; ++t) {
    const std::size_t p = std::size_t(rng() % meta.products.size());
    const ProductSpec& spec = meta.products[p];
    const ObjectPose truth{{spec.kind, int(rng() % std::uint64_t(poseclass_count(spec.kind)))}, yaw(rng)};
    const int label = teaching_label(scenes[p], truth, meta.nonmove_poseclass.at(spec.kind), meta.crop_size,
                                     meta.edge_threshold, meta.argmax_ring_only);
    CaptureCache cache(scenes[p], truth, meta.crop_size);
    for (StrategyKind k : strategies) {
      int captures = 0;
      const Capture counted = [&](int v) {
        ++captures;
        return cache(v);
      };
      auto& c = counts[std::string(to_string(k))];
      ++c.first;
      try {
        const TrialResult r =
            run_pipeline(spec, truth, k, estimator(spec.kind, 1), estimator(spec.kind, 2), meta.ring, counted, label);
        const bool ok = captures <= kMaxRendersPerTrial && r.renders == captures &&
                        (r.viewpoint != 0 || (r.final_pose == r.first && !r.second && captures == 1));
        c.second += !ok;
      } catch (const std::logic_error&) {
        ++c.second;
      }
    }
  }
  bool pass = true;
  std::string detail;
  for (const auto& [name, c] : counts) {
    pass = pass && c.first == 500 && c.second == 0;
    detail += (detail.empty() ? "" : ", ") + name + " " + std::to_string(c.second) + "/" + std::to_string(c.first) +
              " violations";
  }
  record(5, "pipeline contract", pass, detail);
}

// Every numeric column of a curve file must be non-decreasing over 301 rows.
bool curve_file_monotone(const fs::path& path, std::string& why) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return why = path.filename().string() + " empty", false;
  const auto columns = std::size_t(std::count(line.begin(), line.end(), ','));
  std::vector<double> last(columns, -1.0);
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (std::abs(std::stod(cell) - phi_grid(rows)) > 1e-9) return why = "bad phi grid in " + path.string(), false;
    for (std::size_t c = 0; c < columns; ++c) {
      std::getline(ss, cell, ',');
      const double v = std::stod(cell);
      if (v < last[c]) return why = "decrease in " + path.string() + " row " + std::to_string(rows), false;
      last[c] = v;
    }
    ++rows;
  }
  if (rows != kPhiPoints) return why = path.string() + " has " + std::to_string(rows) + " rows", false;
  return true;
}

struct LoocvOutcome {
  EvalReport report;
  fs::path run_dir;
};

LoocvOutcome run_loocv(const Manifest& m, const RunConfig& config) {
  const fs::path run_dir = accept_dir() / "runs" / run_directory_name(config);
  save_run_config(run_dir / "run_config.json", config);
  const fs::path trials_path = run_dir / "trials.jsonl";
  const fs::path done = run_dir / "trials.complete";
  std::vector<TrialResult> trials;
  if (fs::exists(done) && fs::exists(trials_path)) {
    progress("reusing trials " + trials_path.string());
    trials = read_trials(trials_path);
  } else {
    const SampleStore store(m, config.model.resolution);
    LoocvConfig lc;
    lc.model = config.model;
    lc.strategies = config.strategies;
    lc.seeds = config.seeds;
    lc.edge.threshold = m.meta.edge_threshold;
    lc.checkpoint_dir = run_dir / "checkpoints";
    lc.reuse_checkpoints = true;
    trials = loocv(m, store, lc, progress);
    write_trials(trials_path, trials);
    std::ofstream(done) << "ok\n";
  }
  LoocvOutcome out{make_report(trials, m.meta.nonmove_poseclass), run_dir};
  emit_reports(out.report, run_dir);
  return out;
}

void criterion_curves(const LoocvOutcome& o) {
  std::string why;
  bool pass = true;
  int files = 0;
  for (const char* f : {"curves.csv", "nonmove_curves.csv"}) {
    pass = pass && curve_file_monotone(o.run_dir / f, why);
    ++files;
  }
  int curves = 0;
  for (const auto& [name, s] : o.report.by_strategy) {
    pass = pass && s.curve.monotone() && s.curve.rate.size() == std::size_t(kPhiPoints);
    ++curves;
    if (s.nonmove_curve) pass = pass && s.nonmove_curve->monotone(), ++curves;
  }
  record(6, "curve sanity", pass,
         pass ? std::to_string(curves) + " curves in " + std::to_string(files) + " emitted files, 301 points each" : why);
}

double rate_at_30(const EvalReport& r, const std::string& s) { return r.by_strategy.at(s).curve.at(kSuccessPhi); }

void criterion_trend(const EvalReport& r) {
  const double learned = rate_at_30(r, "learned"), edge = rate_at_30(r, "edge"), fixed = rate_at_30(r, "fixed");
  const bool pass = learned >= edge && learned >= fixed && (learned - fixed) * 100.0 >= 3.0;
  record(7, "trend", pass,
         "success@30 fixed " + fmt("%.1f%%", 100 * fixed) + ", edge " + fmt("%.1f%%", 100 * edge) + ", learned " +
             fmt("%.1f%%", 100 * learned) + ", oracle " + fmt("%.1f%%", 100 * rate_at_30(r, "oracle")) +
             ", learned - fixed " + fmt("%+.1f", 100 * (learned - fixed)) + " points");
}

void criterion_oracle(const EvalReport& r) {
  const auto& oracle = r.by_strategy.at("oracle").folds;
  const auto& learned = r.by_strategy.at("learned").folds;
  bool pass = !oracle.empty();
  std::string detail;
  for (const auto& [fold, t] : learned) {
    const Tally& o = oracle.at(fold);
    // exact comparison of successes/trials without division
    const bool ok = o.successes * t.trials >= t.successes * o.trials;
    pass = pass && ok;
    detail += (detail.empty() ? "" : ", ") + std::string("fold ") + std::to_string(fold) + " oracle " +
              fmt("%.1f", 100 * o.rate()) + " vs learned " + fmt("%.1f", 100 * t.rate()) + (ok ? "" : " (FAIL)");
  }
  record(8, "oracle dominance", pass, detail);
}

void criterion_nonmove(const EvalReport& r) {
  const Tally& learned = r.by_strategy.at("learned").nonmove;
  const Tally& fixed = r.by_strategy.at("fixed").nonmove;
  const bool pass = learned.trials > 0 && fixed.trials > 0 && learned.move_rate() < 0.5 &&
                    learned.rate() * 100.0 >= fixed.rate() * 100.0 - 1.0;
  record(9, "non-move subset", pass,
         std::to_string(learned.trials) + " trials, learned move rate " + fmt("%.1f%%", 100 * learned.move_rate()) +
             ", success@30 learned " + fmt("%.1f%%", 100 * learned.rate()) + " vs fixed " +
             fmt("%.1f%%", 100 * fixed.rate()));
}

// Knows the true pose of every crop it was shown during setup.
class PerfectEstimator final : public PoseEstimator {
 public:
  void learn(const Observation& crop, const ObjectPose& truth) { poses_[crop.color.data()] = truth; }
  ObjectPose estimate_pose(const Observation& crop, const Viewpoint&) const override {
    return poses_.at(crop.color.data());
  }
  int estimate_nv(const Observation&) const override { return 0; }

 private:
  std::map<std::vector<std::uint8_t>, ObjectPose> poses_;
};

DisplayConfig display_config(const RunConfig& config, const CorpusMetadata& meta) {
  DisplayConfig dc;
  dc.trials_per_poseclass = config.display_trials_per_poseclass;
  dc.seed = config.display_seed;
  dc.ring = meta.ring;
  dc.camera = meta.camera;
  dc.crop_size = meta.crop_size;
  dc.edge.threshold = meta.edge_threshold;
  dc.argmax_ring_only = meta.argmax_ring_only;
  return dc;
}

// Display table of the trained fold models; writes display_table.csv under `dir`.
DisplayTable learned_display(const Manifest& m, const RunConfig& config, const fs::path& dir) {
  const auto& meta = m.meta;
  const int fold = config.display_fold;
  const std::uint64_t seed = config.seeds.front();
  std::vector<ShapeKind> kinds = shapes_in(meta);
  std::vector<Network<float>> nets;
  nets.reserve(2 * kinds.size());
  for (ShapeKind kind : kinds) {
    const std::string test = loocv_products(meta, kind).at(std::size_t(fold));
    const StageModels models = load_fold_models(config.model, meta, dir / "checkpoints", seed, fold, test);
    nets.push_back(models.stage1.network());
    nets.push_back(models.stage2.network());
  }
  std::vector<NetworkEstimator> est;
  est.reserve(nets.size());
  for (std::size_t i = 0; i < nets.size(); ++i) est.emplace_back(nets[i], kinds[i / 2], meta.ring);
  std::vector<DisplaySubject> subjects;
  for (std::size_t s = 0; s < kinds.size(); ++s) {
    DisplaySubject d;
    d.spec = meta.product(loocv_products(meta, kinds[s]).at(std::size_t(fold)));
    d.stage1 = &est[2 * s];
    d.stage2 = &est[2 * s + 1];
    d.nonmove = meta.nonmove_poseclass.at(kinds[s]);
    subjects.push_back(d);
  }
  DisplayTable table = display_sim(subjects, config.strategies, display_config(config, meta));
  write_display_table(dir / "display_table.csv", table);
  write_trials(dir / "display_trials.jsonl", table.trials);
  return table;
}

void criterion_display(const Manifest& m, const RunConfig& config, const fs::path& run_dir) {
  const DisplayTable table = learned_display(m, config, run_dir);
  bool pass = true;
  std::string detail;
  for (const auto& name : table.strategies) {
    const Tally& t = table.totals.at(name);
    pass = pass && t.trials == 38;
    detail += (detail.empty() ? "" : ", ") + name + " " + std::to_string(t.successes) + "/" + std::to_string(t.trials);
  }
  // Table layout: header with the shapes and a total column, one row per strategy.
  std::ifstream in(run_dir / "display_table.csv");
  std::string header, row;
  std::getline(in, header);
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  std::string expected_header = "strategy";
  for (ShapeKind kind : table.shapes) expected_header += "," + std::string(to_string(kind));
  expected_header += ",total";
  const bool layout_ok = table.shapes.size() == 3 && header == expected_header && rows == int(table.strategies.size());
  pass = pass && layout_ok;

  // All-perfect fixture on the same subjects.
  const auto& meta = m.meta;
  const DisplayConfig dc = display_config(config, meta);
  std::vector<PerfectEstimator> perfect(3);
  std::vector<DisplaySubject> subjects;
  const auto kinds = shapes_in(meta);
  for (std::size_t s = 0; s < kinds.size(); ++s) {
    DisplaySubject d;
    d.spec = meta.product(loocv_products(meta, kinds[s]).at(std::size_t(config.display_fold)));
    d.stage1 = d.stage2 = &perfect[s];
    d.nonmove = meta.nonmove_poseclass.at(kinds[s]);
    subjects.push_back(d);
  }
  for (const auto& [index, truth] : display_poses(subjects, dc)) {
    const Scene scene(subjects[index].spec, dc.ring, dc.camera);
    CaptureCache cache(scene, truth, dc.crop_size);
    for (int v = 0; v <= dc.ring.n; ++v) perfect[index].learn(cache(v), truth);
  }
  const DisplayTable ideal = display_sim(subjects, config.strategies, dc);
  bool perfect_ok = true;
  for (const auto& name : ideal.strategies) {
    perfect_ok = perfect_ok && ideal.totals.at(name).trials == 38 && ideal.totals.at(name).successes == 38;
  }
  record(10, "display simulation", pass && perfect_ok,
         "38 trials per strategy (" + detail + "), layout " + (header == "strategy,rect,cyl,tri,total" ? "ok" : header) +
             ", perfect fixture " + (perfect_ok ? "38/38" : "below 38/38"));
}

// One complete small run: corpus, training, trials, reports and display table.
void determinism_run(const RunConfig& config, const fs::path& root) {
  fs::remove_all(root);
  const Manifest m = build_corpus(config.corpus, root / "corpus");
  save_run_config(root / "corpus" / "run_config.json", config);
  const fs::path run_dir = root / "runs" / run_directory_name(config);
  save_run_config(run_dir / "run_config.json", config);
  const SampleStore store(m, config.model.resolution);
  LoocvConfig lc;
  lc.model = config.model;
  lc.strategies = config.strategies;
  lc.seeds = config.seeds;
  lc.edge.threshold = m.meta.edge_threshold;
  lc.checkpoint_dir = run_dir / "checkpoints";
  const auto trials = loocv(m, store, lc);
  write_trials(run_dir / "trials.jsonl", trials);
  emit_reports(make_report(trials, m.meta.nonmove_poseclass), run_dir);
  learned_display(m, config, run_dir);
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return out;
}

void criterion_determinism() {
  RunConfig config;
  config.corpus.products_per_shape = 2;
  config.corpus.sweep.yaw_step = 60;
  config.corpus.sweep.crop_size = 64;
  config.model.resolution = 32;
  config.model.epochs = 2;
  config.seeds = {7};
  config.validate();
  const fs::path a = accept_dir() / "determinism-a", b = accept_dir() / "determinism-b";
  determinism_run(config, a);
  determinism_run(config, b);
  const auto ta = tree_bytes(a), tb = tree_bytes(b);
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    if (it == tb.end() || it->second != bytes) differing.push_back(name);
  }
  for (const auto& [name, bytes] : tb) {
    if (!ta.count(name)) differing.push_back(name);
  }
  record(11, "determinism", differing.empty() && ta.size() > 100,
         std::to_string(ta.size()) + " artifacts compared, " + std::to_string(differing.size()) + " differ" +
             (differing.empty() ? "" : ", first " + differing.front()));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const RunConfig config;
  fs::create_directories(accept_dir());

  criterion(2, "NV loss", criterion_nv_loss);
  criterion(4, "rotation metric", criterion_rotation);
  criterion(11, "determinism", criterion_determinism);

  Manifest corpus;
  bool have_corpus = false;
  try {
    corpus = default_corpus(config);
    have_corpus = true;
  } catch (const std::exception& e) {
    for (int id : {1, 3, 5, 6, 7, 8, 9, 10}) record(id, "corpus", false, std::string("no corpus: ") + e.what());
  }
  if (have_corpus) {
    criterion(1, "labeling oracle", [&] { criterion_labels(corpus); });
    criterion(3, "gradient check", [&] { criterion_gradient(corpus); });
    criterion(5, "pipeline contract", [&] { criterion_pipeline(corpus, config); });
    std::optional<LoocvOutcome> outcome;
    try {
      outcome = run_loocv(corpus, config);
    } catch (const std::exception& e) {
      for (int id : {6, 7, 8, 9}) record(id, "loocv", false, std::string("loocv failed: ") + e.what());
    }
    if (outcome) {
      criterion(6, "curve sanity", [&] { criterion_curves(*outcome); });
      criterion(7, "trend", [&] { criterion_trend(outcome->report); });
      criterion(8, "oracle dominance", [&] { criterion_oracle(outcome->report); });
      criterion(9, "non-move subset", [&] { criterion_nonmove(outcome->report); });
    }
    criterion(10, "display simulation", [&] {
      criterion_display(corpus, config, accept_dir() / "runs" / run_directory_name(config));
    });
  }

  std::sort(g_lines.begin(), g_lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int failed = 0;
  for (const auto& l : g_lines) {
    std::cout << (l.pass ? "PASS" : "FAIL") << "  [" << l.id << "] " << l.name << ": " << l.detail << '\n';
    failed += !l.pass;
  }
  std::cout << (failed ? "FAILED " : "PASSED ") << (g_lines.size() - std::size_t(failed)) << "/" << g_lines.size()
            << " criteria in " << fmt("%.0f s", seconds_since(t0)) << '\n';
  return failed ? 1 : 0;
}
