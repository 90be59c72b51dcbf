// Copyright (c) 2026 The apnv Authors
// SPDX-License-Identifier: Apache-2.0

#include "apnv/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

#include "apnv/error.hpp"
#include "apnv/imageproc.hpp"
#include "apnv/netpbm.hpp"
#include "apnv/parallel.hpp"

namespace fs = std::filesystem;

namespace apnv {

NVLabel NVLabel::of(int v, int candidates) {
  if (v < 0 || v >= candidates) throw std::out_of_range("NVLabel: index outside the candidates");
  NVLabel label;
  label.one_hot.assign(static_cast<std::size_t>(candidates), 0);
  label.one_hot[static_cast<std::size_t>(v)] = 1;
  label.v = v;
  return label;
}

bool NVLabel::valid() const {
  if (v < 0 || v >= static_cast<int>(one_hot.size())) return false;
  int ones = 0;
  for (std::size_t i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] != 0 && one_hot[i] != 1) return false;
    ones += one_hot[i];
  }
  return ones == 1 && one_hot[static_cast<std::size_t>(v)] == 1;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw DataError("unknown split '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const SampleRecord& r) {
  j = nlohmann::json{{"product_id", r.product_id},
                     {"poseclass", r.poseclass},
                     {"yaw", r.yaw_deg},
                     {"viewpoint", r.viewpoint},
                     {"color", r.color},
                     {"depth", r.depth},
                     {"mask", r.mask},
                     {"nv_label", {{"one_hot", r.nv_label.one_hot}, {"v", r.nv_label.v}}},
                     {"split", std::string(to_string(r.split))},
                     {"detection_area", r.detection_area},
                     {"edge_count", r.edge_count}};
}

void from_json(const nlohmann::json& j, SampleRecord& r) {
  r.product_id = j.at("product_id").get<std::string>();
  r.poseclass = j.at("poseclass").get<int>();
  r.yaw_deg = j.at("yaw").get<double>();
  r.viewpoint = j.at("viewpoint").get<int>();
  r.color = j.at("color").get<std::string>();
  r.depth = j.at("depth").get<std::string>();
  r.mask = j.at("mask").get<std::string>();
  r.nv_label.one_hot = j.at("nv_label").at("one_hot").get<std::vector<int>>();
  r.nv_label.v = j.at("nv_label").at("v").get<int>();
  r.split = split_from_string(j.at("split").get<std::string>());
  r.detection_area = j.at("detection_area").get<long long>();
  r.edge_count = j.at("edge_count").get<long long>();
}

const ProductSpec& CorpusMetadata::product(const std::string& id) const {
  for (const auto& p : products) {
    if (p.id == id) return p;
  }
  throw DataError("unknown product '" + id + "'");
}

bool CorpusMetadata::is_validation(const std::string& id) const {
  return std::find(validation_products.begin(), validation_products.end(), id) !=
         validation_products.end();
}

void to_json(nlohmann::json& j, const CorpusMetadata& m) {
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& [kind, table] : m.area_tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index k = 0; k < table.rows(); ++k) {
      std::vector<double> row(table.cols());
      for (Eigen::Index i = 0; i < table.cols(); ++i) row[i] = table(k, i);
      rows.push_back(row);
    }
    tables[std::string(to_string(kind))] = rows;
  }
  nlohmann::json nonmove = nlohmann::json::object();
  for (const auto& [kind, p] : m.nonmove_poseclass) nonmove[std::string(to_string(kind))] = p;
  j = nlohmann::json{{"format", "apnv-corpus"},
                     {"ring", m.ring},
                     {"camera", m.camera},
                     {"products", m.products},
                     {"validation_products", m.validation_products},
                     {"yaw_step", m.yaw_step},
                     {"crop_size", m.crop_size},
                     {"edge_threshold", m.edge_threshold},
                     {"argmax_ring_only", m.argmax_ring_only},
                     {"area_tables", tables},
                     {"nonmove_poseclass", nonmove}};
}

void from_json(const nlohmann::json& j, CorpusMetadata& m) {
  if (j.value("format", "") != "apnv-corpus") throw DataError("manifest: missing corpus metadata line");
  m.ring = j.at("ring").get<ViewpointRing>();
  m.camera = j.at("camera").get<CameraIntrinsics>();
  m.products = j.at("products").get<std::vector<ProductSpec>>();
  m.validation_products = j.at("validation_products").get<std::vector<std::string>>();
  m.yaw_step = j.at("yaw_step").get<int>();
  m.crop_size = j.at("crop_size").get<int>();
  m.edge_threshold = j.at("edge_threshold").get<double>();
  m.argmax_ring_only = j.at("argmax_ring_only").get<bool>();
  m.area_tables.clear();
  for (const auto& [name, rows] : j.at("area_tables").items()) {
    const auto data = rows.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd table(static_cast<Eigen::Index>(data.size()),
                          data.empty() ? 0 : static_cast<Eigen::Index>(data[0].size()));
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (data[k].size() != static_cast<std::size_t>(table.cols())) throw DataError("ragged area table");
      for (std::size_t i = 0; i < data[k].size(); ++i) table(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = data[k][i];
    }
    m.area_tables[shape_kind_from_string(name)] = table;
  }
  m.nonmove_poseclass.clear();
  for (const auto& [name, p] : j.at("nonmove_poseclass").items()) {
    m.nonmove_poseclass[shape_kind_from_string(name)] = p.get<int>();
  }
}

std::string sample_stem(const std::string& product, int poseclass, int viewpoint, int yaw) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", yaw);
  return product + "/" + std::to_string(poseclass) + "/" + std::to_string(viewpoint) + "/" + buf;
}

std::vector<SampleRecord> capture_sweep(const ProductSpec& spec, const ViewpointRing& ring,
                                        const CameraIntrinsics& cam, const SweepOptions& options,
                                        const fs::path& root) {
  if (options.yaw_step <= 0 || 360 % options.yaw_step != 0) {
    throw ConfigError("yaw step must be a positive divisor of 360");
  }
  const Scene scene(spec, ring, cam, options.render);
  const int classes = poseclass_count(spec.kind);
  const int views = ring.n + 1;
  const int yaws = 360 / options.yaw_step;

  for (int k = 0; k < classes; ++k) {
    for (int v = 0; v < views; ++v) {
      std::error_code ec;
      fs::create_directories(root / spec.id / std::to_string(k) / std::to_string(v), ec);
      if (ec) throw DataError("cannot create directories under " + root.string() + ": " + ec.message());
    }
  }

  std::vector<SampleRecord> records(static_cast<std::size_t>(classes) * views * yaws);
  parallel_for(records.size(), options.jobs, [&](std::size_t idx) {
    const int k = static_cast<int>(idx / (views * yaws));
    const int v = static_cast<int>(idx / yaws % views);
    const int yaw = static_cast<int>(idx % yaws) * options.yaw_step;
    const ObjectPose pose{{spec.kind, k}, static_cast<double>(yaw)};
    Observation full;
    try {
      full = scene.render(pose, v);
    } catch (const std::runtime_error& e) {
      throw DataError("capture " + spec.id + " poseclass " + std::to_string(k) + " viewpoint " +
                      std::to_string(v) + " yaw " + std::to_string(yaw) + ": " + e.what());
    }
    const Observation crop = crop_to_object(full, options.crop_size);

    SampleRecord& r = records[idx];
    r.product_id = spec.id;
    r.poseclass = k;
    r.yaw_deg = yaw;
    r.viewpoint = v;
    const std::string stem = sample_stem(spec.id, k, v, yaw);
    r.color = stem + ".color.ppm";
    r.depth = stem + ".depth.pgm";
    r.mask = stem + ".mask.pgm";
    r.detection_area = detection_rect_area(full);
    r.edge_count = edge_count(crop, options.edge_threshold);
    r.nv_label = NVLabel::of(0, views);

    ImageU8 mask255 = crop.mask;
    for (auto& m : mask255.data()) m = m ? 255 : 0;
    write_ppm(root / r.color, crop.color);
    write_pgm(root / r.depth, crop.depth);
    write_pgm(root / r.mask, mask255);
  });
  return records;
}

int nonmove_poseclass(const Eigen::MatrixXd& areas) {
  if (areas.rows() < 1 || areas.cols() < 2) throw DataError("area table needs poseclasses and ring viewpoints");
  int best = -1;
  double best_ratio = 0.0;
  for (Eigen::Index k = 0; k < areas.rows(); ++k) {
    if (!(areas(k, 0) > 0.0)) throw DataError("area table: overhead area must be positive");
    if (!areas.row(k).allFinite()) throw DataError("area table: missing entries");
    const double ratio = areas.row(k).tail(areas.cols() - 1).maxCoeff() / areas(k, 0);
    if (best < 0 || ratio < best_ratio) {
      best = static_cast<int>(k);
      best_ratio = ratio;
    }
  }
  return best;
}

NVLabel nv_teacher(std::span<const long long> edge_counts, int nonmove, int poseclass,
                   const LabelOptions& options) {
  if (static_cast<int>(edge_counts.size()) != options.candidates) {
    throw DataError("nv_teacher: expected " + std::to_string(options.candidates) + " edge counts, got " +
                    std::to_string(edge_counts.size()));
  }
  for (long long e : edge_counts) {
    if (e < 0) throw DataError("nv_teacher: negative edge count");
  }
  if (poseclass == nonmove) return NVLabel::of(0, options.candidates);
  const int first = options.argmax_ring_only ? 1 : 0;
  int v = first;
  for (int i = first + 1; i < options.candidates; ++i) {
    if (edge_counts[static_cast<std::size_t>(i)] > edge_counts[static_cast<std::size_t>(v)]) v = i;
  }
  return NVLabel::of(v, options.candidates);
}

Eigen::MatrixXd area_table(const Manifest& manifest, ShapeKind kind) {
  const int classes = poseclass_count(kind);
  const int views = manifest.meta.candidates();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(classes, views);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(classes, views);
  for (const auto& r : manifest.records) {
    if (manifest.meta.product(r.product_id).kind != kind) continue;
    sum(r.poseclass, r.viewpoint) += static_cast<double>(r.detection_area);
    count(r.poseclass, r.viewpoint) += 1.0;
  }
  if ((count.array() == 0.0).any()) throw DataError("area table: some (poseclass, viewpoint) cells have no samples");
  return sum.cwiseQuotient(count);
}

void label_manifest(Manifest& manifest) {
  auto& meta = manifest.meta;
  std::set<ShapeKind> kinds;
  for (const auto& p : meta.products) kinds.insert(p.kind);
  meta.area_tables.clear();
  meta.nonmove_poseclass.clear();
  for (ShapeKind kind : kinds) {
    meta.area_tables[kind] = area_table(manifest, kind);
    meta.nonmove_poseclass[kind] = nonmove_poseclass(meta.area_tables[kind]);
  }

  using Key = std::tuple<std::string, int, long>;
  std::map<Key, std::vector<long long>> edges;
  const int views = meta.candidates();
  for (const auto& r : manifest.records) {
    auto& e = edges[{r.product_id, r.poseclass, std::lround(r.yaw_deg)}];
    if (e.empty()) e.assign(static_cast<std::size_t>(views), -1);
    e.at(static_cast<std::size_t>(r.viewpoint)) = r.edge_count;
  }
  std::map<Key, NVLabel> labels;
  const LabelOptions options{views, meta.argmax_ring_only};
  for (const auto& [key, e] : edges) {
    if (std::find(e.begin(), e.end(), -1) != e.end()) {
      throw DataError("labeling: missing viewpoint for " + std::get<0>(key) + " poseclass " +
                      std::to_string(std::get<1>(key)) + " yaw " + std::to_string(std::get<2>(key)));
    }
    const ShapeKind kind = meta.product(std::get<0>(key)).kind;
    labels[key] = nv_teacher(e, meta.nonmove_poseclass.at(kind), std::get<1>(key), options);
  }
  for (auto& r : manifest.records) r.nv_label = labels.at({r.product_id, r.poseclass, std::lround(r.yaw_deg)});
}

Observation load_observation(const Manifest& manifest, const SampleRecord& record) {
  Observation obs;
  obs.color = read_ppm(manifest.root / record.color);
  obs.depth = read_pgm16(manifest.root / record.depth);
  obs.mask = read_pgm8(manifest.root / record.mask);
  for (auto& m : obs.mask.data()) m = m ? 1 : 0;
  obs.rect = nonzero_bounds(obs.mask);
  return obs;
}

void recompute_edge_counts(Manifest& manifest, int jobs) {
  parallel_for(manifest.records.size(), jobs, [&](std::size_t i) {
    auto& r = manifest.records[i];
    Observation obs;
    obs.color = read_ppm(manifest.root / r.color);
    obs.mask = read_pgm8(manifest.root / r.mask);
    for (auto& m : obs.mask.data()) m = m ? 1 : 0;
    r.edge_count = edge_count(obs, manifest.meta.edge_threshold);
  });
}

void validate_manifest(const Manifest& manifest, bool check_files) {
  const auto& meta = manifest.meta;
  if (meta.yaw_step <= 0 || 360 % meta.yaw_step != 0) throw DataError("manifest: yaw step must divide 360");
  std::set<std::string> ids;
  for (const auto& p : meta.products) {
    try {
      p.validate();
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
    if (!ids.insert(p.id).second) throw DataError("manifest: duplicate product id '" + p.id + "'");
  }
  for (const auto& v : meta.validation_products) {
    if (!ids.count(v)) throw DataError("manifest: unknown validation product '" + v + "'");
  }

  std::map<std::tuple<std::string, int, int>, int> cells;
  const int views = meta.candidates();
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    const std::string where = "manifest record " + std::to_string(i + 1) + ": ";
    if (!ids.count(r.product_id)) throw DataError(where + "unknown product '" + r.product_id + "'");
    const ShapeKind kind = meta.product(r.product_id).kind;
    if (r.poseclass < 0 || r.poseclass >= poseclass_count(kind)) throw DataError(where + "poseclass out of range");
    if (!(r.yaw_deg >= 0.0 && r.yaw_deg < 360.0)) throw DataError(where + "yaw must lie in [0, 360)");
    if (r.viewpoint < 0 || r.viewpoint >= views) throw DataError(where + "viewpoint out of range");
    if (!r.nv_label.valid() || static_cast<int>(r.nv_label.one_hot.size()) != views) {
      throw DataError(where + "nv_label is not a one-hot vector over the candidates");
    }
    if (r.detection_area <= 0 || r.edge_count < 0) throw DataError(where + "bad detection area or edge count");
    if (check_files) {
      for (const auto* path : {&r.color, &r.depth, &r.mask}) {
        if (!fs::exists(manifest.root / *path)) throw DataError(where + "missing file " + (manifest.root / *path).string());
      }
    }
    ++cells[{r.product_id, r.poseclass, r.viewpoint}];
  }
  for (const auto& p : meta.products) {
    for (int k = 0; k < poseclass_count(p.kind); ++k) {
      for (int v = 0; v < views; ++v) {
        const auto it = cells.find({p.id, k, v});
        const int n = it == cells.end() ? 0 : it->second;
        if (n != meta.yaw_count()) {
          throw DataError("manifest: " + p.id + " poseclass " + std::to_string(k) + " viewpoint " +
                          std::to_string(v) + " has " + std::to_string(n) + " records, expected " +
                          std::to_string(meta.yaw_count()));
        }
      }
    }
  }
}

void write_manifest(const Manifest& manifest) {
  std::error_code ec;
  fs::create_directories(manifest.root, ec);
  const fs::path path = manifest.root / kManifestFile;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json(manifest.meta).dump() << '\n';
  for (const auto& r : manifest.records) out << nlohmann::json(r).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

Manifest load_manifest(const fs::path& path, bool check_files) {
  const fs::path file = fs::is_directory(path) ? path / kManifestFile : path;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read manifest " + file.string());
  Manifest m;
  m.root = file.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (line_no == 1) {
        m.meta = j.get<CorpusMetadata>();
      } else {
        m.records.push_back(j.get<SampleRecord>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const ConfigError& e) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw DataError("empty manifest " + file.string());
  validate_manifest(m, check_files);
  return m;
}

namespace {

struct BaseShape {
  ShapeKind kind;
  const char* prefix;
  std::vector<double> dims;
};

const std::vector<BaseShape>& base_shapes() {
  static const std::vector<BaseShape> shapes = {
      {ShapeKind::RectangularPrism, "rect", {0.070, 0.045, 0.130}},
      {ShapeKind::Cylinder, "cyl", {0.033, 0.120}},
      {ShapeKind::TriangularPrism, "tri", {0.070, 0.060, 0.150}},
  };
  return shapes;
}

}  // namespace

std::vector<ProductSpec> make_products(const CorpusConfig& config) {
  if (config.products_per_shape < 1) throw ConfigError("need at least one product per shape");
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> jitter(0.88, 1.12);
  std::vector<ProductSpec> out;
  for (const auto& base : base_shapes()) {
    const int count = config.products_per_shape + (config.validation_product ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      ProductSpec p;
      const bool val = config.validation_product && i == config.products_per_shape;
      p.id = std::string(base.prefix) + "-" + (val ? std::string("val") : std::to_string(i));
      p.kind = base.kind;
      for (double d : base.dims) p.dimensions.push_back(std::round(d * jitter(rng) * 1e4) / 1e4);
      p.texture_seed = rng();
      out.push_back(std::move(p));
    }
  }
  return out;
}

Manifest build_corpus(const CorpusConfig& config, const fs::path& root) {
  Manifest m;
  m.root = root;
  m.meta.ring = config.ring;
  m.meta.camera = config.camera;
  m.meta.products = make_products(config);
  m.meta.yaw_step = config.sweep.yaw_step;
  m.meta.crop_size = config.sweep.crop_size;
  m.meta.edge_threshold = config.sweep.edge_threshold;
  m.meta.argmax_ring_only = config.argmax_ring_only;
  for (const auto& p : m.meta.products) {
    if (p.id.ends_with("-val")) m.meta.validation_products.push_back(p.id);
  }
  for (const auto& p : m.meta.products) {
    auto records = capture_sweep(p, config.ring, config.camera, config.sweep, root);
    for (auto& r : records) r.split = m.meta.is_validation(p.id) ? Split::Val : Split::Train;
    m.records.insert(m.records.end(), records.begin(), records.end());
  }
  label_manifest(m);
  validate_manifest(m, true);
  write_manifest(m);
  return m;
}

}  // namespace apnv
