#include "ammasi/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ammasi/errors.hpp"
#include "json.hpp"

namespace ammasi::model {

using nlohmann::json;

std::string to_string(LocationMode mode) {
  switch (mode) {
    case LocationMode::kNone: return "none";
    case LocationMode::kLatLonConcat: return "latlon";
    case LocationMode::kSinusoidal: return "sinusoidal";
    case LocationMode::kNode2Vec: return "node2vec";
  }
  return "none";
}

LocationMode location_mode_from_string(const std::string& s) {
  if (s == "none" || s == "-") return LocationMode::kNone;
  if (s == "latlon" || s == "L") return LocationMode::kLatLonConcat;
  if (s == "sinusoidal" || s == "S") return LocationMode::kSinusoidal;
  if (s == "node2vec" || s == "A") return LocationMode::kNode2Vec;
  throw ConfigError("unknown location mode: " + s);
}

std::string to_string(nn::MaskDirection dir) {
  return dir == nn::MaskDirection::kBelow ? "below" : "above";
}

nn::MaskDirection mask_direction_from_string(const std::string& s) {
  if (s == "below") return nn::MaskDirection::kBelow;
  if (s == "above") return nn::MaskDirection::kAbove;
  throw ConfigError("unknown mask direction: " + s);
}

void AmmasiConfig::validate() const {
  if (embed_dim < 1 || head_dim < 1 || heads < 1)
    throw ConfigError("embed_dim, head_dim, and heads must be positive");
  if (heads * head_dim != embed_dim)
    throw ConfigError("heads * head_dim must equal embed_dim (" +
                      std::to_string(heads) + " * " + std::to_string(head_dim) +
                      " != " + std::to_string(embed_dim) + ")");
  if (!(sigma_g > 0.0) || !(sigma_s > 0.0))
    throw ConfigError("sigma_g and sigma_s must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr0 < 0.0) throw ConfigError("lr0 must be >= 0");
  if (early_stop_patience < 1 || lr_reduce_patience < 1)
    throw ConfigError("patience values must be >= 1");
  if (!(lr_reduce_factor > 0.0) || lr_reduce_factor >= 1.0)
    throw ConfigError("lr_reduce_factor must be in (0, 1)");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

ModelParams ModelParams::init(std::size_t feat_width, const AmmasiConfig& cfg, Rng& rng) {
  cfg.validate();
  if (feat_width == 0) throw ConfigError("feature width must be >= 1");
  const std::size_t D = cfg.embed_dim;
  const std::size_t d = cfg.head_dim;

  ModelParams p;
  p.house = nn::Fc2Params::init(feat_width, D, D, rng);
  for (auto* branch : {&p.geo_branch, &p.sim_branch}) {
    branch->head_dim = d;
    branch->heads.clear();
    for (int h = 0; h < cfg.heads; ++h) {
      nn::HeadParams head;
      head.query = nn::Fc2Params::init(feat_width, d, d, rng);
      head.key = nn::Fc2Params::init(feat_width + 1, d, d, rng);
      head.value = nn::Fc2Params::init(feat_width + 1, d, d, rng);
      branch->heads.push_back(std::move(head));
    }
  }
  p.head = nn::Fc2Params::init(4 * D, D, 1, rng);
  return p;
}

namespace {

nn::Fc2Params fc2_zeros_like(const nn::Fc2Params& o) {
  return nn::Fc2Params::zeros(o.w1.rows, o.w1.cols, o.w2.cols);
}

}  // namespace

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p;
  p.house = fc2_zeros_like(other.house);
  for (auto [dst, src] : {std::pair{&p.geo_branch, &other.geo_branch},
                          std::pair{&p.sim_branch, &other.sim_branch}}) {
    dst->head_dim = src->head_dim;
    for (const auto& head : src->heads) {
      nn::HeadParams z;
      z.query = fc2_zeros_like(head.query);
      z.key = fc2_zeros_like(head.key);
      z.value = fc2_zeros_like(head.value);
      dst->heads.push_back(std::move(z));
    }
  }
  p.head = fc2_zeros_like(other.head);
  return p;
}

namespace {

template <typename Self, typename Fn>
void visit_impl(Self& self, Fn&& fn) {
  auto fc2 = [&](const std::string& prefix, auto& p) {
    fn(prefix + ".w1", p.w1.data);
    fn(prefix + ".b1", p.b1);
    fn(prefix + ".w2", p.w2.data);
    fn(prefix + ".b2", p.b2);
  };
  fc2("house", self.house);
  auto branch = [&](const char* name, auto& b) {
    for (std::size_t h = 0; h < b.heads.size(); ++h) {
      const std::string base = std::string(name) + ".h" + std::to_string(h);
      fc2(base + ".query", b.heads[h].query);
      fc2(base + ".key", b.heads[h].key);
      fc2(base + ".value", b.heads[h].value);
    }
  };
  branch("geo", self.geo_branch);
  branch("sim", self.sim_branch);
  fc2("head", self.head);
}

}  // namespace

void ModelParams::visit(
    const std::function<void(const std::string&, std::vector<double>&)>& fn) {
  visit_impl(*this, fn);
}

void ModelParams::visit(
    const std::function<void(const std::string&, const std::vector<double>&)>& fn) const {
  visit_impl(*this, fn);
}

std::size_t ModelParams::value_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const std::vector<double>& v) { n += v.size(); });
  return n;
}

std::vector<double> ModelParams::to_vector() const {
  std::vector<double> flat;
  flat.reserve(value_count());
  visit([&](const std::string&, const std::vector<double>& v) {
    flat.insert(flat.end(), v.begin(), v.end());
  });
  return flat;
}

void ModelParams::from_vector(std::span<const double> flat) {
  std::size_t pos = 0;
  visit([&](const std::string&, std::vector<double>& v) {
    if (pos + v.size() > flat.size())
      throw std::invalid_argument("ModelParams::from_vector: flat vector too short");
    std::copy(flat.begin() + pos, flat.begin() + pos + v.size(), v.begin());
    pos += v.size();
  });
  if (pos != flat.size())
    throw std::invalid_argument("ModelParams::from_vector: flat vector too long");
}

double forward(const HouseInputs& in, const ModelParams& params, const AmmasiConfig& cfg,
               ForwardCache* cache) {
  const std::size_t D = cfg.embed_dim;
  if (in.areal.size() != D)
    throw std::invalid_argument("forward: areal vector width != embed_dim");

  ForwardCache local;
  ForwardCache* fc = cache ? cache : &local;

  const nn::Tensor2 emb_f =
      nn::fc2_forward(in.features, params.house, cache ? &fc->house_cache : nullptr);
  const nn::Tensor2 out_g =
      nn::masked_mha(in.features, in.geo_refs, in.geo_dists, cfg.sigma_g,
                     params.geo_branch, cfg.mask_direction,
                     cache ? &fc->geo_cache : nullptr, &fc->geo_fallback);
  const nn::Tensor2 out_s =
      nn::masked_mha(in.features, in.sim_refs, in.sim_dists, cfg.sigma_s,
                     params.sim_branch, cfg.mask_direction,
                     cache ? &fc->sim_cache : nullptr, &fc->sim_fallback);
  if (emb_f.cols != D || out_g.cols != D || out_s.cols != D)
    throw std::invalid_argument("forward: branch output width != embed_dim");

  nn::Tensor2 concat(1, 4 * D);
  std::copy(emb_f.data.begin(), emb_f.data.end(), concat.data.begin());
  std::copy(out_g.data.begin(), out_g.data.end(), concat.data.begin() + D);
  std::copy(out_s.data.begin(), out_s.data.end(), concat.data.begin() + 2 * D);
  std::copy(in.areal.begin(), in.areal.end(), concat.data.begin() + 3 * D);

  const nn::Tensor2 pred =
      nn::fc2_forward(concat, params.head, cache ? &fc->head_cache : nullptr);
  if (cache) cache->concat = std::move(concat);
  return pred.at(0, 0);
}

void backward(double dpred, const ForwardCache& cache, const ModelParams& params,
              ModelParams& grads) {
  const std::size_t D = cache.concat.cols / 4;
  nn::Tensor2 dy(1, 1);
  dy.at(0, 0) = dpred;
  nn::Tensor2 dconcat(1, 4 * D);
  nn::fc2_backward(dy, cache.head_cache, params.head, grads.head, &dconcat);

  nn::Tensor2 demb(1, D), dout_g(1, D), dout_s(1, D);
  std::copy(dconcat.data.begin(), dconcat.data.begin() + D, demb.data.begin());
  std::copy(dconcat.data.begin() + D, dconcat.data.begin() + 2 * D, dout_g.data.begin());
  std::copy(dconcat.data.begin() + 2 * D, dconcat.data.begin() + 3 * D,
            dout_s.data.begin());
  // the areal slot is a frozen lookup; its slice of dconcat is dropped

  nn::fc2_backward(demb, cache.house_cache, params.house, grads.house);
  nn::masked_mha_backward(dout_g, cache.geo_cache, params.geo_branch, grads.geo_branch);
  nn::masked_mha_backward(dout_s, cache.sim_cache, params.sim_branch, grads.sim_branch);
}

double loss_male(std::span<const double> pred_log, std::span<const double> y) {
  if (y.empty() || pred_log.size() != y.size())
    throw std::invalid_argument("loss_male: length mismatch or empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0))
      throw std::invalid_argument("loss_male: prices must be positive");
    sum += std::fabs(std::log(y[i]) - pred_log[i]);
  }
  return sum / static_cast<double>(y.size());
}

namespace {

double male_over(const std::vector<HouseInputs>& set, const ModelParams& params,
                 const AmmasiConfig& cfg, long* fallbacks = nullptr) {
  double sum = 0.0;
  for (const auto& in : set) {
    ForwardCache cache;
    const double pred = forward(in, params, cfg, &cache);
    if (fallbacks && (cache.geo_fallback || cache.sim_fallback)) ++(*fallbacks);
    sum += std::fabs(in.log_price - pred);
  }
  return sum / static_cast<double>(set.size());
}

}  // namespace

TrainResult train(const std::vector<HouseInputs>& train_set,
                  const std::vector<HouseInputs>& val_set, const AmmasiConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train: empty split");

  Rng init_rng = Rng::stream(cfg.seed, "init");
  ModelParams params = ModelParams::init(train_set[0].features.cols, cfg, init_rng);
  std::vector<double> params_flat = params.to_vector();
  nn::AdamState adam;
  std::int64_t step = 0;

  TrainResult result;
  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  double lr = cfg.lr0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double epoch_lr = lr;
    Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);

      ModelParams grads = ModelParams::zeros_like(params);
      for (std::size_t k = start; k < stop; ++k) {
        const HouseInputs& in = train_set[order[k]];
        ForwardCache cache;
        const double pred = forward(in, params, cfg, &cache);
        if (cache.geo_fallback || cache.sim_fallback) ++result.all_masked_events;
        const double resid = in.log_price - pred;
        const double dpred = resid > 0.0 ? -inv_batch : (resid < 0.0 ? inv_batch : 0.0);
        if (dpred != 0.0) backward(dpred, cache, params, grads);
      }
      if (epoch_lr > 0.0) {
        const std::vector<double> grads_flat = grads.to_vector();
        ++step;
        nn::adam_step(params_flat, grads_flat, adam, epoch_lr, step);
        params.from_vector(params_flat);
      }
    }

    const double train_male = male_over(train_set, params, cfg, &result.all_masked_events);
    const double val_male = male_over(val_set, params, cfg, &result.all_masked_events);
    result.history.push_back(EpochStats{epoch, epoch_lr, train_male, val_male});

    if (val_male < best_val) {
      best_val = val_male;
      result.best_epoch = epoch;
      result.best_val_male = val_male;
      result.params = params;
      stagnant = 0;
    } else {
      ++stagnant;
    }
    if (stagnant >= cfg.early_stop_patience) break;
    if (stagnant > 0 && stagnant % cfg.lr_reduce_patience == 0)
      lr *= cfg.lr_reduce_factor;
  }
  return result;
}

metrics::MetricTriple evaluate(const ModelParams& params,
                               const std::vector<HouseInputs>& set,
                               const AmmasiConfig& cfg) {
  std::vector<double> y, yhat;
  y.reserve(set.size());
  yhat.reserve(set.size());
  for (const auto& in : set) {
    y.push_back(in.price);
    yhat.push_back(std::exp(forward(in, params, cfg)));
  }
  return metrics::all(y, yhat);
}

namespace {

std::vector<double> model_feature_row(const data::HouseRecord& house,
                                      const std::vector<double>* prox_row,
                                      const AmmasiConfig& cfg) {
  std::vector<double> row = house.attrs;
  if (cfg.use_poi) {
    if (!prox_row)
      throw std::invalid_argument("assemble: use_poi set but no proximity features");
    row.insert(row.end(), prox_row->begin(), prox_row->end());
  }
  if (cfg.location_mode == LocationMode::kLatLonConcat) {
    row.push_back(house.lon);
    row.push_back(house.lat);
  }
  return row;
}

std::vector<double> knn_feature_row(const data::HouseRecord& house,
                                    const std::vector<double>* prox_row,
                                    const AssemblyOptions& options) {
  std::vector<double> row = house.attrs;
  if (options.knn_include_poi) {
    if (!prox_row)
      throw std::invalid_argument("assemble: knn_include_poi set but no proximity features");
    row.insert(row.end(), prox_row->begin(), prox_row->end());
  }
  return row;
}

}  // namespace

AssembledData assemble(std::span<const data::HouseRecord> houses,
                       std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> val_idx,
                       const std::vector<std::vector<double>>* prox,
                       const areal::AreaEmbeddingTable* areal_table,
                       const geom::ArealGrid* grid, const AmmasiConfig& cfg,
                       const AssemblyOptions& options) {
  cfg.validate();
  if (train_idx.empty()) throw std::invalid_argument("assemble: empty training split");
  if ((cfg.use_poi || options.knn_include_poi) &&
      (!prox || prox->size() != houses.size()))
    throw std::invalid_argument("assemble: proximity features missing or wrong length");
  const bool needs_table = cfg.location_mode == LocationMode::kSinusoidal ||
                           cfg.location_mode == LocationMode::kNode2Vec;
  if (needs_table) {
    if (!areal_table || !grid)
      throw std::invalid_argument("assemble: location mode needs an areal table and grid");
    if (areal_table->dim != cfg.embed_dim)
      throw ConfigError("areal table dim " + std::to_string(areal_table->dim) +
                        " != embed_dim " + std::to_string(cfg.embed_dim));
  }

  AssembledData out;

  auto prox_row = [&](std::size_t g) -> const std::vector<double>* {
    return prox ? &(*prox)[g] : nullptr;
  };

  // Scalers and f* pool from the training split only.
  std::vector<std::vector<double>> train_model_rows, train_knn_rows;
  std::vector<geom::GeoPoint> train_locs;
  train_model_rows.reserve(train_idx.size());
  train_knn_rows.reserve(train_idx.size());
  train_locs.reserve(train_idx.size());
  double log_sum = 0.0;
  for (std::size_t g : train_idx) {
    const auto& h = houses[g];
    if (!(h.price > 0.0))
      throw std::invalid_argument("assemble: non-positive price for house " + h.id);
    train_model_rows.push_back(model_feature_row(h, prox_row(g), cfg));
    train_knn_rows.push_back(knn_feature_row(h, prox_row(g), options));
    train_locs.push_back(geom::GeoPoint{h.lon, h.lat});
    log_sum += std::log(h.price);
  }
  out.model_scaler = knn::FeatureScaler::fit(train_model_rows);
  out.knn_scaler = knn::FeatureScaler::fit(train_knn_rows);
  out.feature_width = train_model_rows[0].size();

  out.log_price_mean = log_sum / static_cast<double>(train_idx.size());
  double log_var = 0.0;
  for (std::size_t g : train_idx) {
    const double d = std::log(houses[g].price) - out.log_price_mean;
    log_var += d * d;
  }
  out.log_price_std = std::sqrt(log_var / static_cast<double>(train_idx.size()));
  if (out.log_price_std < 1e-12) out.log_price_std = 1.0;

  std::vector<std::vector<double>> knn_scaled(train_idx.size());
  std::vector<std::vector<double>> fstar(train_idx.size());
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    knn_scaled[i] = out.knn_scaler.transform(train_knn_rows[i]);
    fstar[i] = out.model_scaler.transform(train_model_rows[i]);
    fstar[i].push_back((std::log(houses[train_idx[i]].price) - out.log_price_mean) /
                       out.log_price_std);
  }

  std::vector<std::size_t> local_of(houses.size(), knn::kNoExclude);
  for (std::size_t i = 0; i < train_idx.size(); ++i) local_of[train_idx[i]] = i;

  const std::size_t D = cfg.embed_dim;
  auto resolve = [&](std::size_t g) {
    const auto& h = houses[g];
    HouseInputs in;
    const std::vector<double> feat = out.model_scaler.transform(
        model_feature_row(h, prox_row(g), cfg));
    in.features = nn::Tensor2(1, feat.size());
    std::copy(feat.begin(), feat.end(), in.features.data.begin());

    const std::size_t self = local_of[g];
    auto [gi, gd] = knn::geo_knn(train_locs, geom::GeoPoint{h.lon, h.lat},
                                 options.n_geo, self);
    auto [si, sd] = knn::feat_knn(knn_scaled, out.knn_scaler,
                                  knn_feature_row(h, prox_row(g), options),
                                  options.n_sim, self);

    knn::ReferenceSet refs;
    refs.g_dist = gd;
    refs.s_dist = sd;
    for (std::size_t j : gi) refs.g_idx.push_back(train_idx[j]);
    for (std::size_t j : si) refs.s_idx.push_back(train_idx[j]);

    in.geo_refs = nn::Tensor2(gi.size(), fstar[0].size());
    for (std::size_t r = 0; r < gi.size(); ++r)
      std::copy(fstar[gi[r]].begin(), fstar[gi[r]].end(), in.geo_refs.row(r).begin());
    in.geo_dists = gd;
    in.sim_refs = nn::Tensor2(si.size(), fstar[0].size());
    for (std::size_t r = 0; r < si.size(); ++r)
      std::copy(fstar[si[r]].begin(), fstar[si[r]].end(), in.sim_refs.row(r).begin());
    in.sim_dists = sd;

    in.areal.assign(D, 0.0);
    if (needs_table) {
      const int cell = geom::assign_cell(geom::GeoPoint{h.lon, h.lat}, *grid);
      const auto row = areal_table->row(cell);
      std::copy(row.begin(), row.end(), in.areal.begin());
    }
    in.price = h.price;
    in.log_price = std::log(h.price);
    return std::make_pair(std::move(in), std::move(refs));
  };

  for (std::size_t g : train_idx) {
    auto [in, refs] = resolve(g);
    out.train.push_back(std::move(in));
    out.train_refs.push_back(std::move(refs));
  }
  for (std::size_t g : val_idx) {
    auto [in, refs] = resolve(g);
    out.val.push_back(std::move(in));
    out.val_refs.push_back(std::move(refs));
  }
  return out;
}

std::vector<SweepCell> sigma_sweep(std::span<const data::HouseRecord> houses,
                                   std::span<const std::size_t> train_idx,
                                   std::span<const std::size_t> val_idx,
                                   const std::vector<std::vector<double>>* prox,
                                   const areal::AreaEmbeddingTable* node2vec_table,
                                   const areal::AreaEmbeddingTable* sinusoidal_table,
                                   const geom::ArealGrid* grid, const AmmasiConfig& base,
                                   const AssemblyOptions& options,
                                   const SweepRequest& request) {
  if (request.sigma_grid.empty() || request.ablation_cells.empty())
    throw std::invalid_argument("sigma_sweep: empty grid or cell list");

  std::vector<SweepCell> table;
  for (const auto& [mode, use_poi] : request.ablation_cells) {
    AmmasiConfig cfg = base;
    cfg.location_mode = mode;
    cfg.use_poi = use_poi;
    const areal::AreaEmbeddingTable* areal_table = nullptr;
    if (mode == LocationMode::kNode2Vec) areal_table = node2vec_table;
    if (mode == LocationMode::kSinusoidal) areal_table = sinusoidal_table;

    const AssembledData data =
        assemble(houses, train_idx, val_idx, prox, areal_table, grid, cfg, options);
    for (const auto& [sigma_g, sigma_s] : request.sigma_grid) {
      cfg.sigma_g = sigma_g;
      cfg.sigma_s = sigma_s;
      const TrainResult run = train(data.train, data.val, cfg);
      SweepCell cell;
      cell.sigma_g = sigma_g;
      cell.sigma_s = sigma_s;
      cell.location_mode = mode;
      cell.use_poi = use_poi;
      cell.val_metrics = evaluate(run.params, data.val, cfg);
      cell.best_val_male = run.best_val_male;
      table.push_back(cell);
    }
  }
  return table;
}

// ---- checkpoint -----------------------------------------------------------

namespace {

constexpr char kMagic[] = "AMMASICKPT1\n";

json config_to_json(const AmmasiConfig& cfg) {
  return json{{"embed_dim", cfg.embed_dim},
              {"head_dim", cfg.head_dim},
              {"heads", cfg.heads},
              {"sigma_g", cfg.sigma_g},
              {"sigma_s", cfg.sigma_s},
              {"mask_direction", to_string(cfg.mask_direction)},
              {"location_mode", to_string(cfg.location_mode)},
              {"use_poi", cfg.use_poi},
              {"batch_size", cfg.batch_size},
              {"lr0", cfg.lr0},
              {"early_stop_patience", cfg.early_stop_patience},
              {"lr_reduce_patience", cfg.lr_reduce_patience},
              {"lr_reduce_factor", cfg.lr_reduce_factor},
              {"max_epochs", cfg.max_epochs},
              {"seed", cfg.seed}};
}

AmmasiConfig config_from_json(const json& j) {
  AmmasiConfig cfg;
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.head_dim = j.at("head_dim").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.sigma_g = j.at("sigma_g").get<double>();
  cfg.sigma_s = j.at("sigma_s").get<double>();
  cfg.mask_direction = mask_direction_from_string(j.at("mask_direction").get<std::string>());
  cfg.location_mode = location_mode_from_string(j.at("location_mode").get<std::string>());
  cfg.use_poi = j.at("use_poi").get<bool>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.lr0 = j.at("lr0").get<double>();
  cfg.early_stop_patience = j.at("early_stop_patience").get<int>();
  cfg.lr_reduce_patience = j.at("lr_reduce_patience").get<int>();
  cfg.lr_reduce_factor = j.at("lr_reduce_factor").get<double>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const AmmasiConfig& cfg, std::size_t feature_width) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic) - 1);

  const std::string header =
      json{{"model", config_to_json(cfg)}, {"feature_width", feature_width}}.dump();
  write_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::uint32_t count = 0;
  params.visit([&](const std::string&, const std::vector<double>&) { ++count; });
  write_u32(out, count);
  params.visit([&](const std::string& name, const std::vector<double>& v) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  });
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw DataError(path + " is not an AMMASI checkpoint");

  const std::uint32_t header_len = read_u32(in);
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  json j;
  try {
    j = json::parse(header);
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.cfg = config_from_json(j.at("model"));
  ckpt.feature_width = j.at("feature_width").get<std::size_t>();
  Rng dummy(0);
  ckpt.params = ModelParams::init(ckpt.feature_width, ckpt.cfg, dummy);

  const std::uint32_t count = read_u32(in);
  std::size_t expected = 0;
  ckpt.params.visit([&](const std::string&, std::vector<double>&) { ++expected; });
  if (count != expected)
    throw DataError("checkpoint tensor count mismatch: " + std::to_string(count));

  ckpt.params.visit([&](const std::string& name, std::vector<double>& v) {
    const std::uint32_t name_len = read_u32(in);
    std::string stored(name_len, '\0');
    in.read(stored.data(), name_len);
    if (stored != name)
      throw DataError("checkpoint tensor order mismatch: expected " + name + ", found " +
                      stored);
    const std::uint64_t n = read_u64(in);
    if (n != v.size())
      throw DataError("checkpoint tensor size mismatch for " + name);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  });
  if (!in) throw DataError("truncated checkpoint: " + path);
  return ckpt;
}

}  // namespace ammasi::model
