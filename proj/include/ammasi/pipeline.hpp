#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ammasi/areal.hpp"
#include "ammasi/dataset.hpp"
#include "ammasi/metrics.hpp"
#include "ammasi/model.hpp"
#include "ammasi/poi.hpp"
#include "ammasi/synthetic.hpp"

namespace ammasi::pipeline {

/// Full batch-run configuration. Loaded from a JSON file; region presets and
/// CLI flags override individual fields.
struct RunConfig {
  std::string houses_path, pois_path, roads_path;
  std::string out_dir = "out";
  std::string region = "custom";
  double beta = 0.03;  // Gaussian proximity scale
  double critical_t = 1.96;
  std::vector<double> beta_grid;  // filled with 0.005..0.10 when empty
  model::AmmasiConfig model;
  model::AssemblyOptions knn;
  int grid_mx = 100, grid_my = 100;
  std::optional<std::array<double, 4>> grid_bbox;  // min_lon,min_lat,max_lon,max_lat
  areal::Node2VecConfig node2vec;
  double val_fraction = 0.1;
  synth::SyntheticSpec synth;

  void validate() const;  // throws ConfigError
};

RunConfig load_run_config(const std::string& path);

/// fc / kc / sp / poa bundle the published beta and sigma_s values; custom
/// leaves the config untouched.
void apply_region_preset(RunConfig& cfg, const std::string& region);

/// Artifact names under cfg.out_dir.
struct ArtifactPaths {
  std::string houses, pois, roads, truth;
  std::string poi_features, beta_sweep, poi_coefficients;
  std::string areal_embedding;
  std::string knn_train, knn_val;
  std::string checkpoint, history, metrics, sigma_sweep;

  static ArtifactPaths in(const std::string& out_dir);
};

/// Houses + geometries + the seeded train/val split + the grid, shared by
/// every stage.
struct LoadedData {
  std::vector<data::HouseRecord> houses;
  std::vector<std::string> poi_types;
  std::vector<geom::Geometry> poi_geoms;
  std::vector<geom::Geometry> roads;
  std::vector<std::size_t> train_idx, val_idx;
  geom::ArealGrid grid;
};

LoadedData load_inputs(const RunConfig& cfg, bool need_pois, bool need_roads);

/// Deterministic split: seeded shuffle, floor(val_fraction * n) validation
/// rows (at least 1), both sides sorted ascending.
void split_indices(std::size_t n, double val_fraction, std::uint64_t seed,
                   std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx);

// ---- stages (each writes its artifacts under out_dir) ----------------------

void run_synth(const RunConfig& cfg);
void run_extract_poi(const RunConfig& cfg);
poi::BetaSweepResult run_beta_sweep(const RunConfig& cfg);
void run_poi_coefficients(const RunConfig& cfg);
void run_build_areal(const RunConfig& cfg);
void run_build_knn(const RunConfig& cfg);
model::TrainResult run_train(const RunConfig& cfg);
metrics::MetricTriple run_evaluate(const RunConfig& cfg, const std::string& split);

struct SigmaSweepArgs {
  std::vector<double> sigma_g_values;  // empty -> published study grid
  std::vector<double> sigma_s_values;  // empty -> configured sigma_s
  std::vector<std::string> cells;      // "A,P" style; empty -> all 8
};

std::vector<model::SweepCell> run_sigma_sweep(const RunConfig& cfg,
                                              const SigmaSweepArgs& args);

// ---- artifact IO ------------------------------------------------------------

void save_embedding_table(const std::string& path, const areal::AreaEmbeddingTable& t);
areal::AreaEmbeddingTable load_embedding_table(const std::string& path);

void save_prox_csv(const std::string& path, const std::vector<data::HouseRecord>& houses,
                   const std::vector<std::string>& poi_types,
                   const std::vector<std::vector<double>>& prox);
std::vector<std::vector<double>> load_prox_csv(const std::string& path,
                                               std::size_t expect_rows);

void save_history_csv(const std::string& path,
                      const std::vector<model::EpochStats>& history);
void save_metrics_csv(const std::string& path, const metrics::MetricTriple& m);

/// The sigma_G x sigma_S grid the published study scans.
extern const std::vector<double> kStudySigmaGrid;

}  // namespace ammasi::pipeline
