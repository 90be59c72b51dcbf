// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "apnv/error.hpp"
#include "apnv/parallel.hpp"

namespace fs = std::filesystem;

namespace apnv {

double success_rate(std::span<const double> errors, double phi) {
  if (errors.empty()) throw std::invalid_argument("success_rate: no errors");
  const auto hits = std::count_if(errors.begin(), errors.end(), [phi](double e) { return e <= phi; });
  return double(hits) / double(errors.size());
}

double phi_grid(int i) { return i / 10.0; }

SuccessCurve SuccessCurve::from_errors(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("success curve: no errors");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  SuccessCurve c;
  for (int i = 0; i < kPhiPoints; ++i) {
    const double phi = phi_grid(i);
    const auto hits = std::upper_bound(sorted.begin(), sorted.end(), phi) - sorted.begin();
    c.phi.push_back(phi);
    c.rate.push_back(double(hits) / double(sorted.size()));
  }
  return c;
}

double SuccessCurve::at(double value) const {
  if (phi.empty()) throw std::logic_error("empty success curve");
  const int i = std::clamp(static_cast<int>(std::lround(value * 10.0)), 0, static_cast<int>(phi.size()) - 1);
  return rate[static_cast<std::size_t>(i)];
}

bool SuccessCurve::monotone() const {
  return std::is_sorted(rate.begin(), rate.end());
}

EvalReport make_report(const std::vector<TrialResult>& trials, const std::map<ShapeKind, int>& nonmove) {
  EvalReport report;
  report.nonmove_poseclass = nonmove;
  std::map<std::string, std::vector<double>> errors, nonmove_errors;
  for (const auto& t : trials) {
    if (!report.by_strategy.count(t.strategy)) report.strategies.push_back(t.strategy);
    StrategyReport& s = report.by_strategy[t.strategy];
    const bool hit = t.error_deg <= kSuccessPhi;
    auto add = [&](Tally& tally) {
      ++tally.trials;
      tally.successes += hit;
      tally.moves += t.moved;
    };
    add(s.overall);
    add(s.folds[t.fold]);
    add(report.per_poseclass[{t.truth.poseclass.kind, t.truth.poseclass.index, t.strategy}]);
    errors[t.strategy].push_back(t.error_deg);
    const auto it = nonmove.find(t.truth.poseclass.kind);
    if (it != nonmove.end() && it->second == t.truth.poseclass.index) {
      add(s.nonmove);
      nonmove_errors[t.strategy].push_back(t.error_deg);
    }
    ++report.trial_count;
  }
  for (auto& [name, s] : report.by_strategy) {
    s.curve = SuccessCurve::from_errors(errors[name]);
    if (!nonmove_errors[name].empty()) s.nonmove_curve = SuccessCurve::from_errors(nonmove_errors[name]);
  }
  return report;
}

std::pair<SuccessCurve, SuccessCurve> nonmove_subset_eval(const EvalReport& report, const std::string& a,
                                                          const std::string& b) {
  auto curve = [&](const std::string& name) {
    const auto it = report.by_strategy.find(name);
    if (it == report.by_strategy.end() || !it->second.nonmove_curve) {
      throw DataError("no non-move subset trials for strategy '" + name + "'");
    }
    return *it->second.nonmove_curve;
  };
  return {curve(a), curve(b)};
}

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_curves(const fs::path& path, const EvalReport& report, bool nonmove) {
  std::ofstream out = open_output(path);
  out << "phi";
  std::vector<const SuccessCurve*> curves;
  for (const auto& name : report.strategies) {
    const StrategyReport& s = report.by_strategy.at(name);
    const SuccessCurve* c = nonmove ? (s.nonmove_curve ? &*s.nonmove_curve : nullptr) : &s.curve;
    if (!c) continue;
    if (!c->monotone()) throw VerificationError("success curve of '" + name + "' is not monotone");
    out << ',' << name;
    curves.push_back(c);
  }
  out << '\n';
  char buf[16];
  for (int i = 0; i < kPhiPoints; ++i) {
    std::snprintf(buf, sizeof(buf), "%.1f", phi_grid(i));
    out << buf;
    for (const auto* c : curves) out << ',' << fixed6(c->rate[static_cast<std::size_t>(i)]);
    out << '\n';
  }
}

nlohmann::json tally_json(const Tally& t) {
  return {{"trials", t.trials}, {"successes", t.successes}, {"success_at_30", t.rate()}, {"move_rate", t.move_rate()}};
}

}  // namespace

void emit_reports(const EvalReport& report, const fs::path& dir) {
  write_curves(dir / "curves.csv", report, false);
  write_curves(dir / "nonmove_curves.csv", report, true);

  std::ofstream table = open_output(dir / "per_poseclass.csv");
  table << "shape,poseclass,strategy,trials,successes,success_rate\n";
  for (const auto& [key, t] : report.per_poseclass) {
    const auto& [kind, pc, name] = key;
    table << to_string(kind) << ',' << pc << ',' << name << ',' << t.trials << ',' << t.successes << ','
          << fixed6(t.rate()) << '\n';
  }

  nlohmann::json summary;
  summary["trial_count"] = report.trial_count;
  summary["phi"] = kSuccessPhi;
  summary["strategy_order"] = report.strategies;
  nlohmann::json nonmove = nlohmann::json::object();
  for (const auto& [kind, p] : report.nonmove_poseclass) nonmove[std::string(to_string(kind))] = p;
  summary["nonmove_poseclass"] = nonmove;
  for (const auto& name : report.strategies) {
    const StrategyReport& s = report.by_strategy.at(name);
    nlohmann::json j = tally_json(s.overall);
    j["success_at_30"] = s.curve.at(kSuccessPhi);
    nlohmann::json folds = nlohmann::json::object();
    for (const auto& [fold, t] : s.folds) folds[std::to_string(fold)] = tally_json(t);
    j["folds"] = folds;
    j["nonmove"] = tally_json(s.nonmove);
    summary["strategies"][name] = j;
  }
  std::ofstream out = open_output(dir / "summary.json");
  out << summary.dump(2) << '\n';
}

std::vector<std::string> loocv_products(const CorpusMetadata& meta, ShapeKind kind) {
  std::vector<std::string> out;
  for (const auto& p : meta.products) {
    if (p.kind == kind && !meta.is_validation(p.id)) out.push_back(p.id);
  }
  return out;
}

namespace {

std::vector<ShapeKind> corpus_shapes(const CorpusMetadata& meta) {
  std::vector<ShapeKind> shapes;
  for (const auto& p : meta.products) {
    if (std::find(shapes.begin(), shapes.end(), p.kind) == shapes.end()) shapes.push_back(p.kind);
  }
  return shapes;
}

}  // namespace

int loocv_fold_count(const CorpusMetadata& meta) {
  int folds = -1;
  for (ShapeKind kind : corpus_shapes(meta)) {
    const int n = static_cast<int>(loocv_products(meta, kind).size());
    if (n < 2) throw DataError("leave-one-out needs at least 2 products of shape " + std::string(to_string(kind)));
    if (folds >= 0 && n != folds) throw DataError("shapes have different product counts");
    folds = n;
  }
  if (folds < 0) throw DataError("corpus has no products");
  return folds;
}

std::vector<std::string> fold_training_products(const CorpusMetadata& meta, int fold) {
  std::vector<std::string> out;
  for (ShapeKind kind : corpus_shapes(meta)) {
    const auto products = loocv_products(meta, kind);
    for (int i = 0; i < static_cast<int>(products.size()); ++i) {
      if (i != fold) out.push_back(products[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

ModelConfig stage_config(const ModelConfig& base, ShapeKind kind, const CorpusMetadata& meta, std::uint64_t seed,
                         int stage) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  ModelConfig config = base;
  config.poseclasses = poseclass_count(kind);
  config.nv_classes = meta.candidates();
  config.seed = seed;
  if (stage == 2) config.weights.nv = 0.0;
  return config;
}

fs::path stage_checkpoint_path(const fs::path& dir, std::uint64_t seed, int fold, const std::string& product,
                               int stage) {
  return dir / ("seed" + std::to_string(seed)) / ("fold" + std::to_string(fold)) /
         (product + ".stage" + std::to_string(stage) + ".apnv");
}

StageModels load_fold_models(const ModelConfig& base, const CorpusMetadata& meta, const fs::path& dir,
                             std::uint64_t seed, int fold, const std::string& test_product) {
  const ShapeKind kind = meta.product(test_product).kind;
  auto load = [&](int stage) {
    const fs::path path = stage_checkpoint_path(dir, seed, fold, test_product, stage);
    if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string());
    Checkpoint c = load_checkpoint(path);
    if (c.config != stage_config(base, kind, meta, seed, stage) || c.shape != kind) {
      throw ConfigError("checkpoint " + path.string() + " was trained with a different config");
    }
    return c;
  };
  return StageModels{load(1), load(2)};
}

StageModels train_fold(const ModelConfig& base, const SampleStore& store, const std::string& test_product,
                       std::uint64_t seed, const std::function<void(const std::string&, const EpochLog&)>& on_epoch) {
  const Manifest& m = store.manifest();
  const ShapeKind kind = m.meta.product(test_product).kind;
  const auto products = loocv_products(m.meta, kind);
  if (products.size() < 2) throw DataError("leave-one-out needs at least 2 products per shape");
  if (std::find(products.begin(), products.end(), test_product) == products.end()) {
    throw DataError("'" + test_product + "' is not a cross-validation product");
  }
  std::vector<std::size_t> train, val;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& r = m.records[i];
    const ProductSpec& p = m.meta.product(r.product_id);
    if (p.kind != kind || r.product_id == test_product) continue;
    (m.meta.is_validation(p.id) ? val : train).push_back(i);
  }
  if (val.empty()) throw DataError("no validation product for shape " + std::string(to_string(kind)));
  for (std::size_t i : train) {
    if (m.records[i].product_id == test_product) throw VerificationError("test product leaked into training");
  }

  auto hook = [&](const char* stage) {
    return EpochCallback([&on_epoch, stage](const EpochLog& e) {
      if (on_epoch) on_epoch(stage, e);
    });
  };
  StageModels models;
  models.stage1 = train_model(stage_config(base, kind, m.meta, seed, 1), kind, store, train, val, hook("stage1")).checkpoint;
  models.stage2 = train_model(stage_config(base, kind, m.meta, seed, 2), kind, store, train, val, hook("stage2")).checkpoint;
  return models;
}

std::vector<TrialResult> run_product_trials(const Manifest& manifest, const ProductSpec& spec,
                                            const StageModels& models, std::span<const StrategyKind> strategies,
                                            const EdgeRule& edge, int fold, std::uint64_t seed, int jobs) {
  const auto& meta = manifest.meta;
  const Scene scene(spec, meta.ring, meta.camera);
  const Network<float> net1 = models.stage1.network(), net2 = models.stage2.network();
  const NetworkEstimator stage1(net1, spec.kind, meta.ring), stage2(net2, spec.kind, meta.ring);

  std::map<std::pair<int, long>, int> labels;
  for (const auto& r : manifest.records) {
    if (r.product_id == spec.id && r.viewpoint == 0) labels[{r.poseclass, std::lround(r.yaw_deg)}] = r.nv_label.v;
  }
  std::vector<ObjectPose> poses;
  for (int k = 0; k < poseclass_count(spec.kind); ++k) {
    for (int y = 0; y < 360; y += meta.yaw_step) poses.push_back({{spec.kind, k}, double(y)});
  }
  std::vector<std::vector<TrialResult>> results(poses.size());
  parallel_for(poses.size(), jobs, [&](std::size_t i) {
    const ObjectPose& truth = poses[i];
    const auto label = labels.find({truth.poseclass.index, std::lround(truth.yaw_deg)});
    if (label == labels.end()) throw DataError("no teaching label for " + spec.id);
    CaptureCache cache(scene, truth, meta.crop_size);
    for (StrategyKind kind : strategies) {
      TrialResult t = run_pipeline(spec, truth, kind, stage1, stage2, meta.ring, std::ref(cache), label->second, edge);
      t.fold = fold;
      t.seed = seed;
      results[i].push_back(std::move(t));
    }
  });
  std::vector<TrialResult> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<TrialResult> loocv(const Manifest& manifest, const SampleStore& store, const LoocvConfig& config,
                               const ProgressFn& progress) {
  const auto& meta = manifest.meta;
  const int fold_count = loocv_fold_count(meta);
  std::vector<int> folds = config.folds;
  if (folds.empty()) {
    for (int f = 0; f < fold_count; ++f) folds.push_back(f);
  }
  for (int f : folds) {
    if (f < 0 || f >= fold_count) throw ConfigError("fold " + std::to_string(f) + " out of range");
  }
  std::vector<TrialResult> trials;
  for (std::uint64_t seed : config.seeds) {
    for (int fold : folds) {
      for (ShapeKind kind : corpus_shapes(meta)) {
        const std::string test = loocv_products(meta, kind)[static_cast<std::size_t>(fold)];
        if (progress) progress("seed " + std::to_string(seed) + " fold " + std::to_string(fold) + " train " + test);
        StageModels models;
        if (config.reuse_checkpoints && config.checkpoint_dir &&
            fs::exists(stage_checkpoint_path(*config.checkpoint_dir, seed, fold, test, 1))) {
          models = load_fold_models(config.model, meta, *config.checkpoint_dir, seed, fold, test);
        } else {
          std::map<std::string, std::vector<EpochLog>> logs;
          models = train_fold(config.model, store, test, seed, [&](const std::string& stage, const EpochLog& e) {
            logs[stage].push_back(e);
          });
          if (config.checkpoint_dir) {
            for (int stage : {1, 2}) {
              const fs::path path = stage_checkpoint_path(*config.checkpoint_dir, seed, fold, test, stage);
              fs::create_directories(path.parent_path());
              save_checkpoint(path, stage == 1 ? models.stage1 : models.stage2);
              write_training_log(fs::path(path).replace_extension(".csv"), logs["stage" + std::to_string(stage)]);
            }
          }
        }
        if (progress) progress("seed " + std::to_string(seed) + " fold " + std::to_string(fold) + " trials " + test);
        auto t = run_product_trials(manifest, meta.product(test), models, config.strategies, config.edge, fold, seed,
                                    config.jobs);
        trials.insert(trials.end(), t.begin(), t.end());
      }
    }
  }
  return trials;
}

std::vector<std::pair<std::size_t, ObjectPose>> display_poses(const std::vector<DisplaySubject>& subjects,
                                                              const DisplayConfig& config) {
  if (config.trials_per_poseclass <= 0) throw ConfigError("display: trials per poseclass must be positive");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> yaw(0.0, 360.0);
  std::vector<std::pair<std::size_t, ObjectPose>> out;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const ShapeKind kind = subjects[s].spec.kind;
    for (int k = 0; k < poseclass_count(kind); ++k) {
      for (int t = 0; t < config.trials_per_poseclass; ++t) out.push_back({s, ObjectPose{{kind, k}, yaw(rng)}});
    }
  }
  return out;
}

DisplayTable display_sim(const std::vector<DisplaySubject>& subjects, std::span<const StrategyKind> strategies,
                         const DisplayConfig& config) {
  DisplayTable table;
  for (StrategyKind k : strategies) table.strategies.emplace_back(to_string(k));
  std::vector<Scene> scenes;
  for (const auto& s : subjects) {
    if (!s.stage1 || !s.stage2) throw std::invalid_argument("display_sim: subject without estimators");
    table.shapes.push_back(s.spec.kind);
    scenes.emplace_back(s.spec, config.ring, config.camera);
  }
  const bool need_oracle = std::find(strategies.begin(), strategies.end(), StrategyKind::OracleNV) != strategies.end();
  for (const auto& [index, truth] : display_poses(subjects, config)) {
    const DisplaySubject& subject = subjects[index];
    const Scene& scene = scenes[index];
    std::optional<int> label;
    if (need_oracle) {
      label = teaching_label(scene, truth, subject.nonmove, config.crop_size, config.edge.threshold,
                             config.argmax_ring_only);
    }
    CaptureCache cache(scene, truth, config.crop_size);
    for (StrategyKind kind : strategies) {
      TrialResult t = run_pipeline(subject.spec, truth, kind, *subject.stage1, *subject.stage2, config.ring,
                                   std::ref(cache), label, config.edge);
      const bool hit = t.error_deg <= config.phi;
      for (Tally* tally : {&table.cells[{t.strategy, subject.spec.kind}], &table.totals[t.strategy]}) {
        ++tally->trials;
        tally->successes += hit;
        tally->moves += t.moved;
      }
      table.trials.push_back(std::move(t));
    }
  }
  return table;
}

std::string format_percent(long long successes, long long trials) {
  if (trials <= 0) throw std::invalid_argument("format_percent: no trials");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * double(successes) / double(trials));
  return buf;
}

void write_display_table(const fs::path& path, const DisplayTable& table) {
  std::ofstream out = open_output(path);
  out << "strategy";
  for (ShapeKind kind : table.shapes) out << ',' << to_string(kind);
  out << ",total\n";
  auto cell = [](const Tally& t) {
    return std::to_string(t.successes) + "/" + std::to_string(t.trials) + " (" + format_percent(t.successes, t.trials) +
           "%)";
  };
  for (const auto& name : table.strategies) {
    out << name;
    for (ShapeKind kind : table.shapes) out << ',' << cell(table.cells.at({name, kind}));
    out << ',' << cell(table.totals.at(name)) << '\n';
  }
}

}  // namespace apnv
