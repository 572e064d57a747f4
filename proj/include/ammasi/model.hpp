#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ammasi/areal.hpp"
#include "ammasi/dataset.hpp"
#include "ammasi/knn.hpp"
#include "ammasi/metrics.hpp"
#include "ammasi/nn.hpp"

namespace ammasi::model {

enum class LocationMode { kNone, kLatLonConcat, kSinusoidal, kNode2Vec };

std::string to_string(LocationMode mode);
LocationMode location_mode_from_string(const std::string& s);
std::string to_string(nn::MaskDirection dir);
nn::MaskDirection mask_direction_from_string(const std::string& s);

struct AmmasiConfig {
  int embed_dim = 64;  // D
  int head_dim = 8;    // d
  int heads = 8;       // K; heads * head_dim must equal embed_dim
  double sigma_g = 0.05;
  double sigma_s = 0.05;
  nn::MaskDirection mask_direction = nn::MaskDirection::kBelow;
  LocationMode location_mode = LocationMode::kNode2Vec;
  bool use_poi = true;
  int batch_size = 250;
  double lr0 = 0.008;
  int early_stop_patience = 10;
  int lr_reduce_patience = 5;
  double lr_reduce_factor = 0.1;
  int max_epochs = 1000;
  std::uint64_t seed = 42;

  void validate() const;  // throws ConfigError
};

/// All trainable tensors: house feature embedding, two attention branches,
/// and the 4D -> 1 output head. The areal table is a frozen lookup, not a
/// parameter.
struct ModelParams {
  nn::Fc2Params house;
  nn::MhaParams geo_branch;
  nn::MhaParams sim_branch;
  nn::Fc2Params head;

  static ModelParams init(std::size_t feat_width, const AmmasiConfig& cfg, Rng& rng);
  static ModelParams zeros_like(const ModelParams& other);

  /// Visits every tensor as (name, values). Order is fixed and documented by
  /// the checkpoint format.
  void visit(const std::function<void(const std::string&, std::vector<double>&)>& fn);
  void visit(const std::function<void(const std::string&, const std::vector<double>&)>& fn) const;

  std::size_t value_count() const;
  std::vector<double> to_vector() const;
  void from_vector(std::span<const double> flat);
};

/// One house resolved for the network: scaled query features, reference f*
/// rows (scaled features + scaled log price) with their distances, the
/// house's areal vector, and targets.
struct HouseInputs {
  nn::Tensor2 features;  // 1 x F
  nn::Tensor2 geo_refs;  // N_G x (F+1)
  std::vector<double> geo_dists;
  nn::Tensor2 sim_refs;  // N_S x (F+1)
  std::vector<double> sim_dists;
  std::vector<double> areal;  // D; zeros unless an embedding table is active
  double price = 0.0;
  double log_price = 0.0;
};

struct ForwardCache {
  nn::Fc2Cache house_cache;
  nn::MhaCache geo_cache, sim_cache;
  nn::Fc2Cache head_cache;
  nn::Tensor2 concat;  // 1 x 4D
  bool geo_fallback = false, sim_fallback = false;
};

/// Predicted log price: head([emb_f | Output_G | Output_S | areal]).
double forward(const HouseInputs& in, const ModelParams& params, const AmmasiConfig& cfg,
               ForwardCache* cache = nullptr);

/// Accumulates d(pred)/d(theta) * dpred into grads.
void backward(double dpred, const ForwardCache& cache, const ModelParams& params,
              ModelParams& grads);

/// Mean |log y_i - pred_log_i|; the subgradient at zero residual is 0.
/// Throws std::invalid_argument on non-positive prices.
double loss_male(std::span<const double> pred_log, std::span<const double> y);

struct EpochStats {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_male = 0.0;
  double val_male = 0.0;
};

struct TrainResult {
  ModelParams params;  // best validation snapshot
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_male = 0.0;
  long all_masked_events = 0;  // attention fallbacks seen during training
};

/// Mini-batch Adam on the MALE loss with the plateau protocol: after
/// lr_reduce_patience epochs without a new best validation MALE the learning
/// rate is multiplied by lr_reduce_factor; after early_stop_patience the run
/// stops and the best-validation parameters are returned. lr0 = 0 freezes the
/// parameters (protocol testing).
TrainResult train(const std::vector<HouseInputs>& train_set,
                  const std::vector<HouseInputs>& val_set, const AmmasiConfig& cfg);

metrics::MetricTriple evaluate(const ModelParams& params,
                               const std::vector<HouseInputs>& set,
                               const AmmasiConfig& cfg);

/// ---- dataset resolution ------------------------------------------------

struct AssemblyOptions {
  std::size_t n_geo = 20;
  std::size_t n_sim = 20;
  bool knn_include_poi = false;
};

/// Everything assemble() derives from the raw split, kept for export and for
/// resolving extra evaluation rows later.
struct AssembledData {
  std::vector<HouseInputs> train, val;
  std::vector<knn::ReferenceSet> train_refs, val_refs;  // global house indices
  knn::FeatureScaler model_scaler;                      // over model feature columns
  knn::FeatureScaler knn_scaler;                        // over similarity columns
  double log_price_mean = 0.0, log_price_std = 1.0;
  std::size_t feature_width = 0;
};

/// Resolves houses into model inputs: z-scores feature columns with training
/// statistics, builds geographic and feature-similar reference sets against
/// the training split only, and attaches areal vectors. `prox` is required
/// when cfg.use_poi or options.knn_include_poi is set; `areal_table` when
/// location_mode is sinusoidal or node2vec.
AssembledData assemble(std::span<const data::HouseRecord> houses,
                       std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> val_idx,
                       const std::vector<std::vector<double>>* prox,
                       const areal::AreaEmbeddingTable* areal_table,
                       const geom::ArealGrid* grid, const AmmasiConfig& cfg,
                       const AssemblyOptions& options);

/// ---- sigma / ablation sweep ---------------------------------------------

struct SweepCell {
  double sigma_g = 0.0, sigma_s = 0.0;
  LocationMode location_mode = LocationMode::kNone;
  bool use_poi = false;
  metrics::MetricTriple val_metrics;
  double best_val_male = 0.0;
};

struct SweepRequest {
  std::vector<std::pair<double, double>> sigma_grid;            // (sigma_g, sigma_s)
  std::vector<std::pair<LocationMode, bool>> ablation_cells;    // (location, use_poi)
};

/// Trains one model per (sigma pair x ablation cell) and reports validation
/// metrics. Assembly is shared across sigma values within an ablation cell.
std::vector<SweepCell> sigma_sweep(std::span<const data::HouseRecord> houses,
                                   std::span<const std::size_t> train_idx,
                                   std::span<const std::size_t> val_idx,
                                   const std::vector<std::vector<double>>* prox,
                                   const areal::AreaEmbeddingTable* node2vec_table,
                                   const areal::AreaEmbeddingTable* sinusoidal_table,
                                   const geom::ArealGrid* grid, const AmmasiConfig& base,
                                   const AssemblyOptions& options,
                                   const SweepRequest& request);

/// ---- checkpoint ----------------------------------------------------------

/// Single binary blob: magic, JSON config header (model config + feature
/// width), then named little-endian f64 tensor sections.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const AmmasiConfig& cfg, std::size_t feature_width);

struct Checkpoint {
  ModelParams params;
  AmmasiConfig cfg;
  std::size_t feature_width = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ammasi::model
