#include "ammasi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ammasi/errors.hpp"
#include "ammasi/format.hpp"
#include "ammasi/rng.hpp"
#include "json.hpp"

namespace ammasi::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<double> kStudySigmaGrid = {0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5};

void RunConfig::validate() const {
  model.validate();
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(critical_t > 0.0)) throw ConfigError("critical_t must be positive");
  if (grid_mx < 1 || grid_my < 1) throw ConfigError("grid cell counts must be positive");
  if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
    throw ConfigError("val_fraction must be in (0, 1)");
  if (knn.n_geo < 1 || knn.n_sim < 1) throw ConfigError("knn sizes must be >= 1");
}

namespace {

std::vector<double> default_beta_grid() {
  std::vector<double> grid;
  for (int i = 2; i <= 20; ++i) grid.push_back(0.005 * i);  // 0.01 .. 0.10
  return grid;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }

  RunConfig cfg;
  cfg.houses_path = j.value("houses", "");
  cfg.pois_path = j.value("pois", "");
  cfg.roads_path = j.value("roads", "");
  cfg.out_dir = j.value("out_dir", "out");
  cfg.beta = j.value("beta", cfg.beta);
  cfg.critical_t = j.value("critical_t", cfg.critical_t);
  if (j.contains("beta_grid")) cfg.beta_grid = j["beta_grid"].get<std::vector<double>>();
  cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);

  if (j.contains("seed")) {
    cfg.model.seed = j["seed"].get<std::uint64_t>();
    cfg.synth.seed = cfg.model.seed;
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    cfg.model.embed_dim = m.value("embed_dim", cfg.model.embed_dim);
    cfg.model.head_dim = m.value("head_dim", cfg.model.head_dim);
    cfg.model.heads = m.value("heads", cfg.model.heads);
    cfg.model.sigma_g = m.value("sigma_g", cfg.model.sigma_g);
    cfg.model.sigma_s = m.value("sigma_s", cfg.model.sigma_s);
    if (m.contains("mask_direction"))
      cfg.model.mask_direction =
          model::mask_direction_from_string(m["mask_direction"].get<std::string>());
    if (m.contains("location_mode"))
      cfg.model.location_mode =
          model::location_mode_from_string(m["location_mode"].get<std::string>());
    cfg.model.use_poi = m.value("use_poi", cfg.model.use_poi);
    cfg.model.batch_size = m.value("batch_size", cfg.model.batch_size);
    cfg.model.lr0 = m.value("lr0", cfg.model.lr0);
    cfg.model.early_stop_patience =
        m.value("early_stop_patience", cfg.model.early_stop_patience);
    cfg.model.lr_reduce_patience =
        m.value("lr_reduce_patience", cfg.model.lr_reduce_patience);
    cfg.model.lr_reduce_factor = m.value("lr_reduce_factor", cfg.model.lr_reduce_factor);
    cfg.model.max_epochs = m.value("max_epochs", cfg.model.max_epochs);
    if (m.contains("seed")) cfg.model.seed = m["seed"].get<std::uint64_t>();
  }

  if (j.contains("knn")) {
    const json& k = j["knn"];
    cfg.knn.n_geo = k.value("n_geo", cfg.knn.n_geo);
    cfg.knn.n_sim = k.value("n_sim", cfg.knn.n_sim);
    cfg.knn.knn_include_poi = k.value("include_poi", cfg.knn.knn_include_poi);
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    cfg.grid_mx = g.value("mx", cfg.grid_mx);
    cfg.grid_my = g.value("my", cfg.grid_my);
    if (g.contains("bbox")) {
      const auto b = g["bbox"].get<std::vector<double>>();
      if (b.size() != 4) throw ConfigError("grid.bbox must have 4 entries");
      cfg.grid_bbox = std::array<double, 4>{b[0], b[1], b[2], b[3]};
    }
  }

  if (j.contains("node2vec")) {
    const json& n = j["node2vec"];
    cfg.node2vec.walks_per_node = n.value("walks_per_node", cfg.node2vec.walks_per_node);
    cfg.node2vec.walk_len = n.value("walk_len", cfg.node2vec.walk_len);
    cfg.node2vec.window = n.value("window", cfg.node2vec.window);
    cfg.node2vec.negatives = n.value("negatives", cfg.node2vec.negatives);
    cfg.node2vec.epochs = n.value("epochs", cfg.node2vec.epochs);
    cfg.node2vec.lr = n.value("lr", cfg.node2vec.lr);
  }

  if (j.contains("synth")) {
    const json& s = j["synth"];
    cfg.synth.n_houses = s.value("n_houses", cfg.synth.n_houses);
    cfg.synth.n_poi_types = s.value("n_poi_types", cfg.synth.n_poi_types);
    cfg.synth.n_attrs = s.value("n_attrs", cfg.synth.n_attrs);
    cfg.synth.n_roads = s.value("n_roads", cfg.synth.n_roads);
    cfg.synth.grid_mx = s.value("grid_mx", cfg.synth.grid_mx);
    cfg.synth.grid_my = s.value("grid_my", cfg.synth.grid_my);
    cfg.synth.poi_signal = s.value("poi_signal", cfg.synth.poi_signal);
    cfg.synth.areal_signal = s.value("areal_signal", cfg.synth.areal_signal);
    cfg.synth.neighbor_signal = s.value("neighbor_signal", cfg.synth.neighbor_signal);
    cfg.synth.beta_star = s.value("beta_star", cfg.synth.beta_star);
    cfg.synth.noise_sigma = s.value("noise_sigma", cfg.synth.noise_sigma);
    if (s.contains("seed")) cfg.synth.seed = s["seed"].get<std::uint64_t>();
  }

  if (j.contains("region")) apply_region_preset(cfg, j["region"].get<std::string>());
  return cfg;
}

void apply_region_preset(RunConfig& cfg, const std::string& region) {
  cfg.region = region;
  if (region == "custom" || region.empty()) return;
  // Published per-region constants: proximity beta and the sigma_S the
  // sigma_G study holds fixed.
  if (region == "fc") {
    cfg.beta = 0.045;
    cfg.model.sigma_s = 0.02;
  } else if (region == "kc") {
    cfg.beta = 0.035;
    cfg.model.sigma_s = 0.05;
  } else if (region == "sp") {
    cfg.beta = 0.020;
    cfg.model.sigma_s = 0.05;
  } else if (region == "poa") {
    cfg.beta = 0.025;
    cfg.model.sigma_s = 0.02;
  } else {
    throw ConfigError("unknown region preset: " + region +
                      " (expected fc, kc, sp, poa, or custom)");
  }
}

ArtifactPaths ArtifactPaths::in(const std::string& out_dir) {
  auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  ArtifactPaths p;
  p.houses = at("houses.csv");
  p.pois = at("pois.geojson");
  p.roads = at("roads.geojson");
  p.truth = at("truth.json");
  p.poi_features = at("poi_features.csv");
  p.beta_sweep = at("beta_sweep.csv");
  p.poi_coefficients = at("poi_coefficients.csv");
  p.areal_embedding = at("areal_embedding.csv");
  p.knn_train = at("knn_train.csv");
  p.knn_val = at("knn_val.csv");
  p.checkpoint = at("model.ckpt");
  p.history = at("history.csv");
  p.metrics = at("metrics.csv");
  p.sigma_sweep = at("sigma_sweep.csv");
  return p;
}

void split_indices(std::size_t n, double val_fraction, std::uint64_t seed,
                   std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
  if (n < 2) throw DataError("need at least 2 houses to split");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(n));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  val_idx.assign(order.begin(), order.begin() + n_val);
  train_idx.assign(order.begin() + n_val, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

LoadedData load_inputs(const RunConfig& cfg, bool need_pois, bool need_roads) {
  if (cfg.houses_path.empty()) throw ConfigError("houses path is not configured");
  LoadedData d;
  d.houses = data::load_houses(cfg.houses_path);
  if (need_pois) {
    if (cfg.pois_path.empty()) throw ConfigError("pois path is not configured");
    for (auto& [type, geo] : data::load_poi_geojson(cfg.pois_path)) {
      d.poi_types.push_back(type);
      d.poi_geoms.push_back(std::move(geo));
    }
    if (d.poi_geoms.empty()) throw DataError(cfg.pois_path + ": no POI features");
  }
  if (need_roads) {
    if (cfg.roads_path.empty()) throw ConfigError("roads path is not configured");
    d.roads = data::load_road_geojson(cfg.roads_path);
  }
  split_indices(d.houses.size(), cfg.val_fraction, cfg.model.seed, d.train_idx, d.val_idx);

  if (cfg.grid_bbox) {
    const auto& b = *cfg.grid_bbox;
    d.grid = geom::make_grid(b[0], b[1], b[2], b[3], cfg.grid_mx, cfg.grid_my);
  } else {
    // Default bbox: training houses padded by 1% of the extent per side.
    double min_lon = d.houses[d.train_idx[0]].lon, max_lon = min_lon;
    double min_lat = d.houses[d.train_idx[0]].lat, max_lat = min_lat;
    for (std::size_t g : d.train_idx) {
      min_lon = std::min(min_lon, d.houses[g].lon);
      max_lon = std::max(max_lon, d.houses[g].lon);
      min_lat = std::min(min_lat, d.houses[g].lat);
      max_lat = std::max(max_lat, d.houses[g].lat);
    }
    const double pad_x = std::max((max_lon - min_lon) * 0.01, 1e-9);
    const double pad_y = std::max((max_lat - min_lat) * 0.01, 1e-9);
    d.grid = geom::make_grid(min_lon - pad_x, min_lat - pad_y, max_lon + pad_x,
                             max_lat + pad_y, cfg.grid_mx, cfg.grid_my);
  }
  return d;
}

// ---- artifact IO ------------------------------------------------------------

void save_embedding_table(const std::string& path, const areal::AreaEmbeddingTable& t) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding table: " + path);
  out << t.m << ' ' << t.dim << ' ' << t.source << "\n";
  for (int c = 0; c < t.m; ++c) {
    const auto row = t.row(c);
    for (int j = 0; j < t.dim; ++j) out << (j ? "," : "") << fmt_g17(row[j]);
    out << "\n";
  }
}

areal::AreaEmbeddingTable load_embedding_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding table: " + path);
  areal::AreaEmbeddingTable t;
  std::string header;
  if (!std::getline(in, header)) throw DataError(path + ": empty embedding table");
  std::istringstream hs(header);
  if (!(hs >> t.m >> t.dim >> t.source) || t.m < 1 || t.dim < 1)
    throw DataError(path + ": malformed embedding table header");
  t.vectors.assign(static_cast<std::size_t>(t.m) * t.dim, 0.0);
  std::string line;
  for (int c = 0; c < t.m; ++c) {
    if (!std::getline(in, line)) throw DataError(path + ": truncated embedding table");
    std::stringstream ls(line);
    std::string cell;
    for (int j = 0; j < t.dim; ++j) {
      if (!std::getline(ls, cell, ','))
        throw DataError(path + ": short row " + std::to_string(c));
      t.vectors[static_cast<std::size_t>(c) * t.dim + j] = std::stod(cell);
    }
  }
  return t;
}

void save_prox_csv(const std::string& path, const std::vector<data::HouseRecord>& houses,
                   const std::vector<std::string>& poi_types,
                   const std::vector<std::vector<double>>& prox) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write proximity CSV: " + path);
  out << "id";
  for (const auto& t : poi_types) out << ',' << t;
  out << "\n";
  for (std::size_t i = 0; i < houses.size(); ++i) {
    out << houses[i].id;
    for (double v : prox[i]) out << ',' << fmt_g17(v);
    out << "\n";
  }
}

std::vector<std::vector<double>> load_prox_csv(const std::string& path,
                                               std::size_t expect_rows) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open proximity CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty proximity CSV");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // id
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    rows.push_back(std::move(vals));
  }
  if (rows.size() != expect_rows)
    throw DataError(path + ": row count " + std::to_string(rows.size()) +
                    " != houses " + std::to_string(expect_rows));
  return rows;
}

void save_history_csv(const std::string& path,
                      const std::vector<model::EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history CSV: " + path);
  out << "epoch,lr,train_male,val_male\n";
  for (const auto& e : history)
    out << e.epoch << ',' << fmt_g17(e.lr) << ',' << fmt_g17(e.train_male) << ','
        << fmt_g17(e.val_male) << "\n";
}

void save_metrics_csv(const std::string& path, const metrics::MetricTriple& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics CSV: " + path);
  out << "male,rmse,mdape\n";
  out << fmt_g17(m.male) << ',' << fmt_g17(m.rmse) << ',' << fmt_g17(m.mdape) << "\n";
}

namespace {

void save_knn_csv(const std::string& path, const std::vector<data::HouseRecord>& houses,
                  std::span<const std::size_t> split,
                  const std::vector<knn::ReferenceSet>& refs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write knn CSV: " + path);
  const std::size_t n_geo = refs.empty() ? 0 : refs[0].g_idx.size();
  const std::size_t n_sim = refs.empty() ? 0 : refs[0].s_idx.size();
  out << "id";
  for (std::size_t j = 1; j <= n_geo; ++j) out << ",g_idx_" << j << ",g_dist_" << j;
  for (std::size_t j = 1; j <= n_sim; ++j) out << ",s_idx_" << j << ",s_dist_" << j;
  out << "\n";
  for (std::size_t i = 0; i < split.size(); ++i) {
    out << houses[split[i]].id;
    for (std::size_t j = 0; j < n_geo; ++j)
      out << ',' << refs[i].g_idx[j] << ',' << fmt_g17(refs[i].g_dist[j]);
    for (std::size_t j = 0; j < n_sim; ++j)
      out << ',' << refs[i].s_idx[j] << ',' << fmt_g17(refs[i].s_dist[j]);
    out << "\n";
  }
}

std::vector<std::vector<double>> prox_values(const std::vector<poi::ProximityVector>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.values);
  return out;
}

std::vector<geom::GeoPoint> house_locs(const std::vector<data::HouseRecord>& houses) {
  std::vector<geom::GeoPoint> locs;
  locs.reserve(houses.size());
  for (const auto& h : houses) locs.push_back({h.lon, h.lat});
  return locs;
}

// Loads cached proximity features when the file exists, else computes them.
std::vector<std::vector<double>> get_prox(const RunConfig& cfg, const LoadedData& d,
                                          const ArtifactPaths& paths) {
  if (fs::exists(paths.poi_features))
    return load_prox_csv(paths.poi_features, d.houses.size());
  if (d.poi_geoms.empty())
    throw ConfigError("proximity features needed: run extract-poi or configure pois");
  return prox_values(poi::proximity_matrix(house_locs(d.houses), d.poi_geoms, cfg.beta));
}

areal::AreaEmbeddingTable build_table(const RunConfig& cfg, const LoadedData& d,
                                      model::LocationMode mode) {
  if (mode == model::LocationMode::kSinusoidal)
    return areal::sinusoidal_pe(d.grid, cfg.model.embed_dim);
  if (mode == model::LocationMode::kNode2Vec) {
    const areal::AdjacencyMatrix adj = areal::build_adjacency(d.roads, d.grid);
    const auto walks = areal::random_walks(adj, cfg.node2vec.walks_per_node,
                                           cfg.node2vec.walk_len, cfg.model.seed);
    return areal::train_node2vec(walks, d.grid.cell_count(), cfg.model.embed_dim,
                                 cfg.node2vec, cfg.model.seed);
  }
  throw ConfigError("location mode '" + model::to_string(mode) +
                    "' has no areal embedding table");
}

// Cached table if compatible, else a fresh build (bit-identical either way).
areal::AreaEmbeddingTable get_table(const RunConfig& cfg, const LoadedData& d,
                                    const ArtifactPaths& paths,
                                    model::LocationMode mode) {
  if (fs::exists(paths.areal_embedding)) {
    areal::AreaEmbeddingTable t = load_embedding_table(paths.areal_embedding);
    if (t.source == model::to_string(mode) && t.m == d.grid.cell_count() &&
        t.dim == cfg.model.embed_dim)
      return t;
  }
  return build_table(cfg, d, mode);
}

}  // namespace

// ---- stages -----------------------------------------------------------------

void run_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const synth::SyntheticFixture fx = synth::gen_synthetic(cfg.synth);

  data::save_houses(paths.houses, fx.houses);
  data::save_poi_geojson(paths.pois, fx.poi_types, fx.poi_geoms);
  data::save_road_geojson(paths.roads, fx.roads);

  json truth{{"base_log_price", fx.truth.base_log_price},
             {"beta_star", fx.truth.beta_star},
             {"noise_sigma", fx.truth.noise_sigma},
             {"attr_coefs", fx.truth.attr_coefs},
             {"poi_coefs", fx.truth.poi_coefs},
             {"attr_component", fx.truth.attr_component},
             {"poi_component", fx.truth.poi_component},
             {"areal_component", fx.truth.areal_component},
             {"neighbor_component", fx.truth.neighbor_component},
             {"noise", fx.truth.noise}};
  std::ofstream out(paths.truth);
  if (!out) throw DataError("cannot write truth file: " + paths.truth);
  out << truth.dump(2) << "\n";
}

void run_extract_poi(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const LoadedData d = load_inputs(cfg, /*need_pois=*/true, /*need_roads=*/false);
  const auto prox = poi::proximity_matrix(house_locs(d.houses), d.poi_geoms, cfg.beta);
  save_prox_csv(paths.poi_features, d.houses, d.poi_types, prox_values(prox));
}

poi::BetaSweepResult run_beta_sweep(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const LoadedData d = load_inputs(cfg, true, false);

  std::vector<double> log_prices;
  log_prices.reserve(d.houses.size());
  for (const auto& h : d.houses) log_prices.push_back(std::log(h.price));

  const std::vector<double> grid =
      cfg.beta_grid.empty() ? default_beta_grid() : cfg.beta_grid;
  const poi::BetaSweepResult result = poi::beta_sweep(
      house_locs(d.houses), log_prices, d.poi_geoms, grid, cfg.critical_t);

  std::ofstream out(paths.beta_sweep);
  if (!out) throw DataError("cannot write beta sweep CSV: " + paths.beta_sweep);
  out << "beta,r_squared\n";
  for (const auto& p : result.points)
    out << fmt_g17(p.beta) << ',' << fmt_g17(p.r_squared) << "\n";
  return result;
}

void run_poi_coefficients(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const LoadedData d = load_inputs(cfg, true, false);

  const auto prox = prox_values(
      poi::proximity_matrix(house_locs(d.houses), d.poi_geoms, cfg.beta));
  std::vector<double> log_prices;
  log_prices.reserve(d.houses.size());
  for (const auto& h : d.houses) log_prices.push_back(std::log(h.price));

  const poi::OlsReport report = poi::ols_fit(prox, log_prices, cfg.critical_t);

  std::ofstream out(paths.poi_coefficients);
  if (!out) throw DataError("cannot write coefficients CSV: " + paths.poi_coefficients);
  out << "poi_type,coefficient,t_stat,significant\n";
  for (std::size_t t = 0; t < d.poi_types.size(); ++t)
    out << d.poi_types[t] << ',' << fmt_g17(report.coefficients[t]) << ','
        << fmt_g17(report.t_stats[t]) << ',' << (report.significant[t] ? 1 : 0) << "\n";
  out << "_intercept," << fmt_g17(report.coefficients.back()) << ','
      << fmt_g17(report.t_stats.back()) << ',' << (report.significant.back() ? 1 : 0)
      << "\n";
}

void run_build_areal(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const bool node2vec = cfg.model.location_mode == model::LocationMode::kNode2Vec;
  if (!node2vec && cfg.model.location_mode != model::LocationMode::kSinusoidal)
    throw ConfigError("build-areal requires location_mode sinusoidal or node2vec");
  const LoadedData d = load_inputs(cfg, false, node2vec);
  save_embedding_table(paths.areal_embedding, build_table(cfg, d, cfg.model.location_mode));
}

void run_build_knn(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const LoadedData d = load_inputs(cfg, cfg.knn.knn_include_poi, false);

  // The reference sets depend only on locations and similarity columns, so
  // assembly runs without the areal table or POI concatenation.
  model::AmmasiConfig knn_cfg = cfg.model;
  knn_cfg.location_mode = model::LocationMode::kNone;
  knn_cfg.use_poi = false;

  std::vector<std::vector<double>> prox;
  if (cfg.knn.knn_include_poi) prox = get_prox(cfg, d, paths);
  const model::AssembledData a =
      model::assemble(d.houses, d.train_idx, d.val_idx,
                      cfg.knn.knn_include_poi ? &prox : nullptr, nullptr, nullptr,
                      knn_cfg, cfg.knn);
  save_knn_csv(paths.knn_train, d.houses, d.train_idx, a.train_refs);
  save_knn_csv(paths.knn_val, d.houses, d.val_idx, a.val_refs);
}

namespace {

model::AssembledData assemble_for(const RunConfig& cfg, const LoadedData& d,
                                  const ArtifactPaths& paths,
                                  std::vector<std::vector<double>>& prox_storage,
                                  areal::AreaEmbeddingTable& table_storage) {
  const bool needs_prox = cfg.model.use_poi || cfg.knn.knn_include_poi;
  const std::vector<std::vector<double>>* prox = nullptr;
  if (needs_prox) {
    prox_storage = get_prox(cfg, d, paths);
    prox = &prox_storage;
  }
  const areal::AreaEmbeddingTable* table = nullptr;
  if (cfg.model.location_mode == model::LocationMode::kSinusoidal ||
      cfg.model.location_mode == model::LocationMode::kNode2Vec) {
    table_storage = get_table(cfg, d, paths, cfg.model.location_mode);
    table = &table_storage;
  }
  return model::assemble(d.houses, d.train_idx, d.val_idx, prox, table, &d.grid,
                         cfg.model, cfg.knn);
}

}  // namespace

model::TrainResult run_train(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const bool need_roads = cfg.model.location_mode == model::LocationMode::kNode2Vec &&
                          !fs::exists(paths.areal_embedding);
  const LoadedData d = load_inputs(
      cfg, (cfg.model.use_poi || cfg.knn.knn_include_poi) && !fs::exists(paths.poi_features),
      need_roads);

  std::vector<std::vector<double>> prox_storage;
  areal::AreaEmbeddingTable table_storage;
  const model::AssembledData a = assemble_for(cfg, d, paths, prox_storage, table_storage);

  model::TrainResult result = model::train(a.train, a.val, cfg.model);
  model::save_checkpoint(paths.checkpoint, result.params, cfg.model, a.feature_width);
  save_history_csv(paths.history, result.history);
  return result;
}

metrics::MetricTriple run_evaluate(const RunConfig& cfg, const std::string& split) {
  cfg.validate();
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);
  const model::Checkpoint ckpt = model::load_checkpoint(paths.checkpoint);

  RunConfig eval_cfg = cfg;
  eval_cfg.model = ckpt.cfg;  // the checkpoint knows the architecture it was trained with

  const bool need_roads = eval_cfg.model.location_mode == model::LocationMode::kNode2Vec &&
                          !fs::exists(paths.areal_embedding);
  const LoadedData d = load_inputs(
      eval_cfg,
      (eval_cfg.model.use_poi || eval_cfg.knn.knn_include_poi) &&
          !fs::exists(paths.poi_features),
      need_roads);

  std::vector<std::vector<double>> prox_storage;
  areal::AreaEmbeddingTable table_storage;
  const model::AssembledData a =
      assemble_for(eval_cfg, d, paths, prox_storage, table_storage);
  if (a.feature_width != ckpt.feature_width)
    throw ConfigError("checkpoint feature width " + std::to_string(ckpt.feature_width) +
                      " does not match assembled width " + std::to_string(a.feature_width));

  const auto& set = split == "train" ? a.train : a.val;
  if (split != "train" && split != "val")
    throw ConfigError("evaluate split must be train or val, got " + split);
  const metrics::MetricTriple m = model::evaluate(ckpt.params, set, eval_cfg.model);
  save_metrics_csv(paths.metrics, m);
  return m;
}

std::vector<model::SweepCell> run_sigma_sweep(const RunConfig& cfg,
                                              const SigmaSweepArgs& args) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const ArtifactPaths paths = ArtifactPaths::in(cfg.out_dir);

  model::SweepRequest request;
  const std::vector<double>& gs =
      args.sigma_g_values.empty() ? kStudySigmaGrid : args.sigma_g_values;
  const std::vector<double> ss = args.sigma_s_values.empty()
                                     ? std::vector<double>{cfg.model.sigma_s}
                                     : args.sigma_s_values;
  for (double g : gs)
    for (double s : ss) request.sigma_grid.emplace_back(g, s);

  if (args.cells.empty()) {
    for (auto mode : {model::LocationMode::kNone, model::LocationMode::kLatLonConcat,
                      model::LocationMode::kSinusoidal, model::LocationMode::kNode2Vec})
      for (bool poi_flag : {false, true})
        request.ablation_cells.emplace_back(mode, poi_flag);
  } else {
    for (const auto& token : args.cells) {
      const auto comma = token.find(',');
      if (comma == std::string::npos)
        throw ConfigError("ablation cell must look like 'A,P' or '-,-': " + token);
      const model::LocationMode mode =
          model::location_mode_from_string(token.substr(0, comma));
      const std::string poi_part = token.substr(comma + 1);
      bool poi_flag = false;
      if (poi_part == "P" || poi_part == "p") poi_flag = true;
      else if (poi_part != "-") throw ConfigError("POI flag must be 'P' or '-': " + token);
      request.ablation_cells.emplace_back(mode, poi_flag);
    }
  }

  bool any_poi = cfg.knn.knn_include_poi;
  bool any_sin = false, any_n2v = false;
  for (const auto& [mode, poi_flag] : request.ablation_cells) {
    any_poi = any_poi || poi_flag;
    any_sin = any_sin || mode == model::LocationMode::kSinusoidal;
    any_n2v = any_n2v || mode == model::LocationMode::kNode2Vec;
  }

  const LoadedData d =
      load_inputs(cfg, any_poi && !fs::exists(paths.poi_features), any_n2v);

  std::vector<std::vector<double>> prox;
  if (any_poi) prox = get_prox(cfg, d, paths);
  areal::AreaEmbeddingTable n2v_table, sin_table;
  if (any_n2v) n2v_table = get_table(cfg, d, paths, model::LocationMode::kNode2Vec);
  if (any_sin) sin_table = areal::sinusoidal_pe(d.grid, cfg.model.embed_dim);

  const std::vector<model::SweepCell> cells = model::sigma_sweep(
      d.houses, d.train_idx, d.val_idx, any_poi ? &prox : nullptr,
      any_n2v ? &n2v_table : nullptr, any_sin ? &sin_table : nullptr, &d.grid,
      cfg.model, cfg.knn, request);

  std::ofstream out(paths.sigma_sweep);
  if (!out) throw DataError("cannot write sigma sweep CSV: " + paths.sigma_sweep);
  out << "sigma_g,sigma_s,location_mode,use_poi,val_male,val_rmse,val_mdape\n";
  for (const auto& c : cells)
    out << fmt_g17(c.sigma_g) << ',' << fmt_g17(c.sigma_s) << ','
        << model::to_string(c.location_mode) << ',' << (c.use_poi ? 1 : 0) << ','
        << fmt_g17(c.val_metrics.male) << ',' << fmt_g17(c.val_metrics.rmse) << ','
        << fmt_g17(c.val_metrics.mdape) << "\n";
  return cells;
}

}  // namespace ammasi::pipeline
