// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apnv/checkpoint.hpp"
#include "apnv/config.hpp"
#include "apnv/digest.hpp"
#include "apnv/error.hpp"
#include "apnv/eval.hpp"
#include "apnv/parallel.hpp"
#include "apnv/train.hpp"

namespace fs = std::filesystem;
using namespace apnv;

namespace {

/// Flags shared by the subcommands; each mirrors a RunConfig key and wins over the file.
struct Overrides {
  std::string config;
  std::optional<std::string> out_root;
  int jobs = 0;
  std::optional<int> products, yaw_step, ring_n, crop_size, epochs, batch_size, resolution;
  std::optional<std::uint64_t> corpus_seed, seed, display_seed;
  std::optional<double> edge_threshold, depth_noise, learning_rate;
  std::optional<bool> argmax_ring_only, color_augment, flatten;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::vector<int>> folds;
  std::optional<std::string> strategies;
  std::optional<int> display_trials, display_fold;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "RunConfig JSON file");
  app->add_option("--out-root", o.out_root, "output root (default: $APNV_OUT_DIR or ./apnv-out)");
  app->add_option("--jobs", o.jobs, "worker threads (default: all cores)");
  app->add_option("--products", o.products, "corpus.products_per_shape");
  app->add_option("--yaw-step", o.yaw_step, "corpus.yaw_step");
  app->add_option("--corpus-seed", o.corpus_seed, "corpus.seed");
  app->add_option("--ring", o.ring_n, "corpus.ring.n");
  app->add_option("--crop-size", o.crop_size, "corpus.crop_size");
  app->add_option("--edge-threshold", o.edge_threshold, "corpus.edge_threshold");
  app->add_option("--depth-noise", o.depth_noise, "corpus.depth_noise_sigma_mm");
  app->add_flag("--argmax-ring-only,!--argmax-all", o.argmax_ring_only, "corpus.argmax_ring_only");
  app->add_option("--epochs", o.epochs, "model.epochs");
  app->add_option("--batch-size", o.batch_size, "model.batch_size");
  app->add_option("--lr", o.learning_rate, "model.learning_rate");
  app->add_option("--resolution", o.resolution, "model.resolution");
  app->add_flag("--color-augment,!--no-color-augment", o.color_augment, "model.color_augment");
  app->add_flag("--flatten,!--no-flatten", o.flatten, "model.flatten");
  app->add_option("--seed", o.seed, "single training seed (seeds = [seed])");
  app->add_option("--seeds", o.seeds, "training seeds")->delimiter(',');
  app->add_option("--folds", o.folds, "folds to run")->delimiter(',');
  app->add_option("--strategies", o.strategies, "comma-separated strategies");
  app->add_option("--display-trials", o.display_trials, "display.trials_per_poseclass");
  app->add_option("--display-seed", o.display_seed, "display.seed");
  app->add_option("--display-fold", o.display_fold, "display.fold");
}

fs::path output_root(const Overrides& o) {
  if (o.out_root) return *o.out_root;
  if (const char* env = std::getenv("APNV_OUT_DIR"); env && *env) return env;
  return "apnv-out";
}

fs::path default_corpus(const Overrides& o) { return output_root(o) / "corpus"; }

/// Config file (or `fallback` when none is given and it exists), then flags.
RunConfig resolve_config(const Overrides& o, const std::optional<fs::path>& fallback = std::nullopt) {
  RunConfig c;
  if (!o.config.empty()) {
    c = load_run_config(o.config);
  } else if (fallback && fs::exists(*fallback)) {
    c = load_run_config(*fallback);
  }
  if (o.products) c.corpus.products_per_shape = *o.products;
  if (o.yaw_step) c.corpus.sweep.yaw_step = *o.yaw_step;
  if (o.corpus_seed) c.corpus.seed = *o.corpus_seed;
  if (o.ring_n) c.corpus.ring.n = *o.ring_n;
  if (o.crop_size) c.corpus.sweep.crop_size = *o.crop_size;
  if (o.edge_threshold) c.corpus.sweep.edge_threshold = *o.edge_threshold;
  if (o.depth_noise) c.corpus.sweep.render.depth_noise_sigma_mm = *o.depth_noise;
  if (o.argmax_ring_only) c.corpus.argmax_ring_only = *o.argmax_ring_only;
  if (o.epochs) c.model.epochs = *o.epochs;
  if (o.batch_size) c.model.batch_size = *o.batch_size;
  if (o.learning_rate) c.model.learning_rate = *o.learning_rate;
  if (o.resolution) c.model.resolution = *o.resolution;
  if (o.color_augment) c.model.color_augment = *o.color_augment;
  if (o.flatten) c.model.flatten = *o.flatten;
  if (o.seeds) c.seeds = *o.seeds;
  if (o.seed) c.seeds = {*o.seed};
  if (o.folds) c.folds = *o.folds;
  if (o.strategies) c.strategies = parse_strategies(*o.strategies);
  if (o.display_trials) c.display_trials_per_poseclass = *o.display_trials;
  if (o.display_seed) c.display_seed = *o.display_seed;
  if (o.display_fold) c.display_fold = *o.display_fold;
  c.validate();
  return c;
}

fs::path manifest_dir(const fs::path& manifest) {
  return fs::is_directory(manifest) ? manifest : manifest.parent_path();
}

/// The corpus settings of `config` must describe the manifest's corpus.
void check_corpus(const RunConfig& config, const CorpusMetadata& meta) {
  const CorpusConfig& c = config.corpus;
  auto mismatch = [](const std::string& what) {
    throw ConfigError("run config does not match the corpus: " + what + " differs");
  };
  if (!(c.ring == meta.ring)) mismatch("ring");
  if (!(c.camera == meta.camera)) mismatch("camera");
  if (c.sweep.yaw_step != meta.yaw_step) mismatch("yaw_step");
  if (c.sweep.crop_size != meta.crop_size) mismatch("crop_size");
  if (c.sweep.edge_threshold != meta.edge_threshold) mismatch("edge_threshold");
  if (c.argmax_ring_only != meta.argmax_ring_only) mismatch("argmax_ring_only");
  if (make_products(c) != meta.products) mismatch("product set");
}

struct Workspace {
  RunConfig config;
  Manifest manifest;
  fs::path run_dir;
};

Workspace open_workspace(const Overrides& o, const std::string& manifest_arg) {
  const fs::path manifest = manifest_arg.empty() ? default_corpus(o) : fs::path(manifest_arg);
  Workspace w;
  w.config = resolve_config(o, manifest_dir(manifest) / "run_config.json");
  w.manifest = load_manifest(manifest, true);
  check_corpus(w.config, w.manifest.meta);
  w.run_dir = output_root(o) / "runs" / run_directory_name(w.config);
  save_run_config(w.run_dir / "run_config.json", w.config);
  return w;
}

void progress(const std::string& line) { std::cerr << "[apnv] " << line << '\n'; }

int cmd_gen(const Overrides& o, const std::string& out) {
  const RunConfig config = resolve_config(o);
  const fs::path root = out.empty() ? default_corpus(o) : fs::path(out);
  CorpusConfig corpus = config.corpus;
  corpus.sweep.jobs = o.jobs;
  const Manifest m = build_corpus(corpus, root);
  save_run_config(root / "run_config.json", config);
  std::cout << "corpus " << root.string() << " records " << m.records.size() << '\n';
  for (const auto& [kind, p] : m.meta.nonmove_poseclass) std::cout << "nonmove " << to_string(kind) << ' ' << p << '\n';
  return 0;
}

int cmd_label(const Overrides& o, const std::string& manifest_arg, bool recount) {
  Manifest m = load_manifest(manifest_arg.empty() ? default_corpus(o) : fs::path(manifest_arg), true);
  if (recount) recompute_edge_counts(m, o.jobs);
  label_manifest(m);
  validate_manifest(m, true);
  write_manifest(m);
  for (const auto& [kind, p] : m.meta.nonmove_poseclass) std::cout << "nonmove " << to_string(kind) << ' ' << p << '\n';
  return 0;
}

std::vector<int> config_folds(const RunConfig& config, const CorpusMetadata& meta) {
  std::vector<int> folds = config.folds;
  if (folds.empty()) {
    for (int f = 0; f < loocv_fold_count(meta); ++f) folds.push_back(f);
  }
  return folds;
}

std::vector<ShapeKind> shapes_of(const CorpusMetadata& meta) {
  std::vector<ShapeKind> shapes;
  for (const auto& p : meta.products) {
    if (std::find(shapes.begin(), shapes.end(), p.kind) == shapes.end()) shapes.push_back(p.kind);
  }
  return shapes;
}

int cmd_train(const Overrides& o, const std::string& manifest_arg) {
  const Workspace w = open_workspace(o, manifest_arg);
  const SampleStore store(w.manifest, w.config.model.resolution, o.jobs);
  const fs::path dir = w.run_dir / "checkpoints";
  for (std::uint64_t seed : w.config.seeds) {
    for (int fold : config_folds(w.config, w.manifest.meta)) {
      for (ShapeKind kind : shapes_of(w.manifest.meta)) {
        const std::string test = loocv_products(w.manifest.meta, kind).at(static_cast<std::size_t>(fold));
        progress("seed " + std::to_string(seed) + " fold " + std::to_string(fold) + " train " + test);
        std::map<std::string, std::vector<EpochLog>> logs;
        const StageModels models = train_fold(w.config.model, store, test, seed,
                                              [&](const std::string& stage, const EpochLog& e) {
                                                logs[stage].push_back(e);
                                              });
        for (int stage : {1, 2}) {
          const fs::path path = stage_checkpoint_path(dir, seed, fold, test, stage);
          save_checkpoint(path, stage == 1 ? models.stage1 : models.stage2);
          write_training_log(fs::path(path).replace_extension(".csv"), logs["stage" + std::to_string(stage)]);
          std::cout << "checkpoint " << path.string() << ' ' << checkpoint_digest(path) << '\n';
        }
      }
    }
  }
  return 0;
}

void print_summary(const EvalReport& report) {
  for (const auto& name : report.strategies) {
    const StrategyReport& s = report.by_strategy.at(name);
    std::cout << name << " success@30=" << format_percent(s.overall.successes, s.overall.trials) << "% trials="
              << s.overall.trials << " nonmove_success@30="
              << (s.nonmove.trials ? format_percent(s.nonmove.successes, s.nonmove.trials) : std::string("n/a"))
              << "% nonmove_move_rate=" << (s.nonmove.trials ? format_percent(s.nonmove.moves, s.nonmove.trials) : "n/a")
              << "%\n";
  }
}

int cmd_eval(const Overrides& o, const std::string& manifest_arg, const std::string& trials_file,
             const std::string& report_dir) {
  if (!trials_file.empty()) {
    // Reports only, from persisted trials.
    const Manifest m = load_manifest(manifest_arg.empty() ? default_corpus(o) : fs::path(manifest_arg), false);
    const auto trials = read_trials(trials_file);
    const EvalReport report = make_report(trials, m.meta.nonmove_poseclass);
    emit_reports(report, report_dir.empty() ? fs::path(trials_file).parent_path() : fs::path(report_dir));
    print_summary(report);
    return 0;
  }
  const Workspace w = open_workspace(o, manifest_arg);
  const SampleStore store(w.manifest, w.config.model.resolution, o.jobs);
  LoocvConfig lc;
  lc.model = w.config.model;
  lc.strategies = w.config.strategies;
  lc.seeds = w.config.seeds;
  lc.edge.threshold = w.manifest.meta.edge_threshold;
  lc.jobs = o.jobs;
  lc.folds = w.config.folds;
  lc.checkpoint_dir = w.run_dir / "checkpoints";
  lc.reuse_checkpoints = true;
  const auto trials = loocv(w.manifest, store, lc, progress);
  write_trials(w.run_dir / "trials.jsonl", trials);
  const EvalReport report = make_report(trials, w.manifest.meta.nonmove_poseclass);
  emit_reports(report, report_dir.empty() ? w.run_dir : fs::path(report_dir));
  print_summary(report);
  std::cout << "run " << w.run_dir.string() << '\n';
  return 0;
}

int cmd_display(const Overrides& o, const std::string& manifest_arg) {
  const Workspace w = open_workspace(o, manifest_arg);
  const CorpusMetadata& meta = w.manifest.meta;
  const std::uint64_t seed = w.config.seeds.front();
  const int fold = w.config.display_fold;
  const fs::path dir = w.run_dir / "checkpoints";
  std::optional<SampleStore> store;

  std::vector<ShapeKind> shapes = shapes_of(meta);
  std::vector<StageModels> models;
  for (ShapeKind kind : shapes) {
    const std::string test = loocv_products(meta, kind).at(static_cast<std::size_t>(fold));
    if (fs::exists(stage_checkpoint_path(dir, seed, fold, test, 1))) {
      models.push_back(load_fold_models(w.config.model, meta, dir, seed, fold, test));
      continue;
    }
    if (!store) store.emplace(w.manifest, w.config.model.resolution, o.jobs);
    progress("seed " + std::to_string(seed) + " fold " + std::to_string(fold) + " train " + test);
    models.push_back(train_fold(w.config.model, *store, test, seed));
    save_checkpoint(stage_checkpoint_path(dir, seed, fold, test, 1), models.back().stage1);
    save_checkpoint(stage_checkpoint_path(dir, seed, fold, test, 2), models.back().stage2);
  }

  std::vector<Network<float>> nets;
  nets.reserve(2 * shapes.size());
  for (const auto& m : models) {
    nets.push_back(m.stage1.network());
    nets.push_back(m.stage2.network());
  }
  std::vector<NetworkEstimator> estimators;
  estimators.reserve(nets.size());
  for (std::size_t i = 0; i < nets.size(); ++i) estimators.emplace_back(nets[i], shapes[i / 2], meta.ring);

  std::vector<DisplaySubject> subjects;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    DisplaySubject d;
    d.spec = meta.product(loocv_products(meta, shapes[s]).at(static_cast<std::size_t>(fold)));
    d.stage1 = &estimators[2 * s];
    d.stage2 = &estimators[2 * s + 1];
    d.nonmove = meta.nonmove_poseclass.at(shapes[s]);
    subjects.push_back(d);
  }
  DisplayConfig dc;
  dc.trials_per_poseclass = w.config.display_trials_per_poseclass;
  dc.seed = w.config.display_seed;
  dc.ring = meta.ring;
  dc.camera = meta.camera;
  dc.crop_size = meta.crop_size;
  dc.edge.threshold = meta.edge_threshold;
  dc.argmax_ring_only = meta.argmax_ring_only;
  const DisplayTable table = display_sim(subjects, w.config.strategies, dc);
  write_display_table(w.run_dir / "display_table.csv", table);
  write_trials(w.run_dir / "display_trials.jsonl", table.trials);
  std::ifstream in(w.run_dir / "display_table.csv");
  std::cout << in.rdbuf();
  return 0;
}

// Labels recomputed with plain loops from the stored detection areas and edge counts.
std::vector<std::string> label_oracle_mismatches(const Manifest& m) {
  std::vector<std::string> problems;
  const int views = m.meta.candidates();
  for (ShapeKind kind : shapes_of(m.meta)) {
    const int classes = poseclass_count(kind);
    std::vector<std::vector<double>> sum(classes, std::vector<double>(views, 0.0));
    std::vector<std::vector<double>> count(classes, std::vector<double>(views, 0.0));
    for (const auto& r : m.records) {
      if (m.meta.product(r.product_id).kind != kind) continue;
      sum[r.poseclass][r.viewpoint] += double(r.detection_area);
      count[r.poseclass][r.viewpoint] += 1.0;
    }
    int nonmove = -1;
    double best = 0.0;
    for (int k = 0; k < classes; ++k) {
      double worst = -1.0;
      for (int v = 1; v < views; ++v) worst = std::max(worst, (sum[k][v] / count[k][v]) / (sum[k][0] / count[k][0]));
      if (nonmove < 0 || worst < best) {
        nonmove = k;
        best = worst;
      }
    }
    if (m.meta.nonmove_poseclass.at(kind) != nonmove) {
      problems.push_back("nonmove poseclass of " + std::string(to_string(kind)));
    }
  }
  std::map<std::tuple<std::string, int, long>, std::vector<long long>> edges;
  for (const auto& r : m.records) {
    auto& e = edges[{r.product_id, r.poseclass, std::lround(r.yaw_deg)}];
    e.resize(static_cast<std::size_t>(views), -1);
    e[static_cast<std::size_t>(r.viewpoint)] = r.edge_count;
  }
  for (const auto& r : m.records) {
    const auto& e = edges.at({r.product_id, r.poseclass, std::lround(r.yaw_deg)});
    int v = 0;
    if (r.poseclass != m.meta.nonmove_poseclass.at(m.meta.product(r.product_id).kind)) {
      v = m.meta.argmax_ring_only ? 1 : 0;
      for (int i = v; i < views; ++i) {
        if (e[static_cast<std::size_t>(i)] > e[static_cast<std::size_t>(v)]) v = i;
      }
    }
    bool ok = r.nv_label.v == v && static_cast<int>(r.nv_label.one_hot.size()) == views;
    for (int i = 0; ok && i < views; ++i) ok = r.nv_label.one_hot[static_cast<std::size_t>(i)] == (i == v);
    if (!ok) problems.push_back("label of " + sample_stem(r.product_id, r.poseclass, r.viewpoint, int(std::lround(r.yaw_deg))));
  }
  return problems;
}

int cmd_verify(const Overrides& o, const std::string& manifest_arg, const std::string& trials_file,
               int gradient_samples) {
  const Manifest m = load_manifest(manifest_arg.empty() ? default_corpus(o) : fs::path(manifest_arg), true);
  validate_manifest(m, true);
  std::vector<std::string> failures;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << (detail.empty() ? "" : " (" + detail + ")") << '\n';
    if (!ok) failures.push_back(name);
  };

  const auto label_problems = label_oracle_mismatches(m);
  report("label-oracle", label_problems.empty(),
         label_problems.empty() ? std::to_string(m.records.size()) + " records"
                                : std::to_string(label_problems.size()) + " mismatches, first " + label_problems.front());

  bool disjoint = true;
  for (int fold = 0; fold < loocv_fold_count(m.meta); ++fold) {
    const auto train = fold_training_products(m.meta, fold);
    for (ShapeKind kind : shapes_of(m.meta)) {
      const std::string test = loocv_products(m.meta, kind)[static_cast<std::size_t>(fold)];
      disjoint = disjoint && std::find(train.begin(), train.end(), test) == train.end();
    }
  }
  report("fold-split-audit", disjoint, "");

  {
    std::vector<std::vector<double>> samples;
    if (!trials_file.empty()) {
      const auto trials = read_trials(trials_file);
      const EvalReport r = make_report(trials, m.meta.nonmove_poseclass);
      for (const auto& [name, s] : r.by_strategy) {
        std::vector<double> curve = s.curve.rate;
        samples.push_back(curve);
        if (s.nonmove_curve) samples.push_back(s.nonmove_curve->rate);
      }
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> err(0.0, 60.0);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> e(50);
      for (auto& x : e) x = err(rng);
      samples.push_back(SuccessCurve::from_errors(e).rate);
    }
    bool ok = true;
    for (const auto& rate : samples) ok = ok && rate.size() == kPhiPoints && std::is_sorted(rate.begin(), rate.end());
    report("curve-monotonicity", ok, std::to_string(samples.size()) + " curves");
  }

  {
    const ModelConfig rc = reduced_model_config(6, m.meta.candidates());
    Network<float> net(rc);
    net.initialize(11);
    Checkpoint c;
    c.config = rc;
    c.config_digest = json_digest(nlohmann::json(rc));
    c.seed = 11;
    c.layout = net.layout();
    c.parameters = net.parameters();
    const fs::path path = fs::temp_directory_path() / ("apnv-verify-" + std::to_string(::getpid()) + ".apnv");
    save_checkpoint(path, c);
    const Checkpoint back = load_checkpoint(path);
    const std::string d1 = checkpoint_digest(path);
    save_checkpoint(path, back);
    const bool ok = back == c && checkpoint_digest(path) == d1;
    fs::remove(path);
    report("checkpoint-round-trip", ok, "");
  }

  {
    const ShapeKind kind = m.meta.products.front().kind;
    const ModelConfig rc = reduced_model_config(poseclass_count(kind), m.meta.candidates());
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < m.records.size() && picks.size() < 6; i += 97) {
      if (m.meta.product(m.records[i].product_id).kind == kind) picks.push_back(i);
    }
    const Eigen::Index pixels = Eigen::Index(rc.resolution) * rc.resolution;
    Eigen::MatrixXd input(rc.channels, pixels * static_cast<Eigen::Index>(picks.size()));
    for (std::size_t c = 0; c < picks.size(); ++c) {
      input.middleCols(static_cast<Eigen::Index>(c) * pixels, pixels) =
          network_input(load_observation(m, m.records[picks[c]]), rc.resolution).cast<double>();
    }
    const Targets targets = make_targets(m, picks, true);
    Network<double> net(rc);
    net.initialize(5);
    randomize_biases(net, 6);
    const GradientCheck g = gradient_check(net, input, targets, rc.weights, gradient_samples);
    report("gradient-check", g.max_relative_error < 1e-3,
           "max relative error " + std::to_string(g.max_relative_error) + " over " + std::to_string(g.checked));
  }

  if (!failures.empty()) throw VerificationError(std::to_string(failures.size()) + " check(s) failed, first " + failures.front());
  return 0;
}

int fail(const char* category, const std::string& message, int code) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::cerr << "error: category=" << category << " message=" << flat << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-viewpoint pose estimation simulator"};
  app.require_subcommand(1);
  Overrides o;
  std::string manifest, out, trials, report_dir;
  bool recount = false;
  int gradient_samples = 200;

  auto* gen = app.add_subcommand("gen", "render the corpus and write its manifest");
  add_common(gen, o);
  gen->add_option("--out", out, "corpus directory (default: <root>/corpus)");

  auto* label = app.add_subcommand("label", "recompute non-move poseclasses and NV labels");
  add_common(label, o);
  label->add_option("--manifest", manifest, "manifest file or corpus directory");
  label->add_flag("--recount", recount, "recount edges from the stored crops first");

  auto* train = app.add_subcommand("train", "train stage-1 and stage-2 models per fold");
  add_common(train, o);
  train->add_option("--manifest", manifest, "manifest file or corpus directory");

  auto* eval = app.add_subcommand("eval", "leave-one-out trials and reports");
  add_common(eval, o);
  eval->add_option("--manifest", manifest, "manifest file or corpus directory");
  eval->add_option("--trials", trials, "rebuild reports from a trials.jsonl instead of running");
  eval->add_option("--report-dir", report_dir, "where reports go (default: the run directory)");

  auto* display = app.add_subcommand("display-sim", "the per-shape display table");
  add_common(display, o);
  display->add_option("--manifest", manifest, "manifest file or corpus directory");

  auto* verify = app.add_subcommand("verify", "oracle and invariant audits");
  add_common(verify, o);
  verify->add_option("--manifest", manifest, "manifest file or corpus directory");
  verify->add_option("--trials", trials, "also check curves rebuilt from these trials");
  verify->add_option("--gradient-samples", gradient_samples, "parameters probed by the gradient check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), 2);
  }

  try {
    if (*gen) return cmd_gen(o, out);
    if (*label) return cmd_label(o, manifest, recount);
    if (*train) return cmd_train(o, manifest);
    if (*eval) return cmd_eval(o, manifest, trials, report_dir);
    if (*display) return cmd_display(o, manifest);
    if (*verify) return cmd_verify(o, manifest, trials, gradient_samples);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const DataError& e) {
    return fail("data", e.what(), 3);
  } catch (const VerificationError& e) {
    return fail("verification", e.what(), 4);
  } catch (const TrainingError& e) {
    return fail("training", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
