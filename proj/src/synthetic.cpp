#include "ammasi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ammasi/poi.hpp"
#include "ammasi/rng.hpp"

namespace ammasi::synth {

namespace {

// Low-frequency random field: a handful of plane waves over the unit square.
struct SmoothField {
  std::vector<double> ax, ay, phase, amp;

  static SmoothField make(Rng& rng, int waves = 4) {
    SmoothField f;
    for (int w = 0; w < waves; ++w) {
      f.ax.push_back(rng.uniform(0.5, 3.0) * 6.283185307179586);
      f.ay.push_back(rng.uniform(0.5, 3.0) * 6.283185307179586);
      f.phase.push_back(rng.uniform(0.0, 6.283185307179586));
      f.amp.push_back(rng.uniform(0.5, 1.0));
    }
    return f;
  }

  double operator()(double x, double y) const {
    double v = 0.0;
    for (std::size_t w = 0; w < ax.size(); ++w)
      v += amp[w] * std::sin(ax[w] * x + ay[w] * y + phase[w]);
    return v;
  }
};

// Rescales values to zero mean and exactly `target_std`; leaves a (near-)
// constant component as zeros.
void normalize_component(std::vector<double>& v, double target_std) {
  if (v.empty() || target_std == 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (var < 1e-18) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  const double scale = target_std / std::sqrt(var);
  for (double& x : v) x = (x - mean) * scale;
}

}  // namespace

SyntheticFixture gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n_houses < 50)
    throw std::invalid_argument("gen_synthetic: need at least 50 houses");
  if (spec.n_poi_types < 1 || spec.n_attrs < 1)
    throw std::invalid_argument("gen_synthetic: need at least one POI type and attribute");

  SyntheticFixture fx;
  fx.grid = geom::make_grid(0.0, 0.0, 1.0, 1.0, spec.grid_mx, spec.grid_my);

  // POI polygons: 2-4 axis-aligned squares per type.
  Rng poi_rng = Rng::stream(spec.seed, "synth-poi");
  for (int t = 0; t < spec.n_poi_types; ++t) {
    geom::Geometry g;
    g.kind = geom::GeomKind::kMulti;
    const int count = 2 + static_cast<int>(poi_rng.index(3));
    for (int c = 0; c < count; ++c) {
      const double cx = poi_rng.uniform(0.05, 0.95);
      const double cy = poi_rng.uniform(0.05, 0.95);
      const double half = poi_rng.uniform(0.01, 0.03);
      g.parts.push_back({{cx - half, cy - half},
                         {cx + half, cy - half},
                         {cx + half, cy + half},
                         {cx - half, cy + half}});
    }
    fx.poi_geoms.push_back(std::move(g));
    fx.poi_types.push_back("poi_type_" + std::to_string(t + 1));
  }

  // Roads: short random polylines.
  Rng road_rng = Rng::stream(spec.seed, "synth-roads");
  for (int r = 0; r < spec.n_roads; ++r) {
    geom::Geometry road;
    road.kind = geom::GeomKind::kPolyline;
    std::vector<geom::GeoPoint> part;
    double x = road_rng.uniform(0.0, 1.0);
    double y = road_rng.uniform(0.0, 1.0);
    part.push_back({x, y});
    const int segments = 2 + static_cast<int>(road_rng.index(3));
    double angle = road_rng.uniform(0.0, 6.283185307179586);
    for (int s = 0; s < segments; ++s) {
      angle += road_rng.uniform(-0.8, 0.8);
      const double len = road_rng.uniform(0.05, 0.15);
      x = std::clamp(x + len * std::cos(angle), 0.0, 1.0);
      y = std::clamp(y + len * std::sin(angle), 0.0, 1.0);
      part.push_back({x, y});
    }
    road.parts.push_back(std::move(part));
    fx.roads.push_back(std::move(road));
  }

  // Houses: uniform locations, standard-normal attributes.
  Rng house_rng = Rng::stream(spec.seed, "synth-houses");
  fx.houses.resize(spec.n_houses);
  for (int i = 0; i < spec.n_houses; ++i) {
    data::HouseRecord& h = fx.houses[i];
    h.id = "h" + std::to_string(i);
    h.lon = house_rng.uniform(0.0, 1.0);
    h.lat = house_rng.uniform(0.0, 1.0);
    h.attrs.resize(spec.n_attrs);
    for (int j = 0; j < spec.n_attrs; ++j) h.attrs[j] = house_rng.normal();
  }

  SyntheticTruth& truth = fx.truth;
  truth.beta_star = spec.beta_star;
  truth.noise_sigma = spec.noise_sigma;

  Rng coef_rng = Rng::stream(spec.seed, "synth-coefs");
  truth.attr_coefs.resize(spec.n_attrs);
  for (double& c : truth.attr_coefs) c = coef_rng.normal();
  truth.poi_coefs.resize(spec.n_poi_types);
  for (double& c : truth.poi_coefs) c = coef_rng.normal();

  const int n = spec.n_houses;
  truth.attr_component.resize(n);
  truth.poi_component.resize(n);
  truth.areal_component.resize(n);
  truth.neighbor_component.resize(n);
  truth.noise.resize(n);

  std::vector<geom::GeoPoint> locs(n);
  for (int i = 0; i < n; ++i) locs[i] = {fx.houses[i].lon, fx.houses[i].lat};
  const auto prox = poi::proximity_matrix(locs, fx.poi_geoms, spec.beta_star);

  Rng field_rng = Rng::stream(spec.seed, "synth-fields");
  const SmoothField areal_field = SmoothField::make(field_rng);
  const SmoothField neighbor_field = SmoothField::make(field_rng);

  Rng noise_rng = Rng::stream(spec.seed, "synth-noise");
  for (int i = 0; i < n; ++i) {
    double attr_sum = 0.0;
    for (int j = 0; j < spec.n_attrs; ++j)
      attr_sum += truth.attr_coefs[j] * fx.houses[i].attrs[j];
    truth.attr_component[i] = attr_sum;

    double poi_sum = 0.0;
    for (int t = 0; t < spec.n_poi_types; ++t)
      poi_sum += truth.poi_coefs[t] * prox[i].values[t];
    truth.poi_component[i] = poi_sum;

    // The areal effect is constant within a cell (evaluated at cell centers);
    // the neighbor effect varies smoothly with the exact location.
    const int cell = geom::assign_cell(locs[i], fx.grid);
    const int ix = cell % fx.grid.mx;
    const int iy = cell / fx.grid.mx;
    const double cx = fx.grid.min_lon + (ix + 0.5) * fx.grid.cell_width();
    const double cy = fx.grid.min_lat + (iy + 0.5) * fx.grid.cell_height();
    truth.areal_component[i] = areal_field(cx, cy);
    truth.neighbor_component[i] = neighbor_field(locs[i].lon, locs[i].lat);
    truth.noise[i] = noise_rng.normal(0.0, spec.noise_sigma);
  }

  normalize_component(truth.attr_component, 0.1);
  normalize_component(truth.poi_component, spec.poi_signal);
  normalize_component(truth.areal_component, spec.areal_signal);
  normalize_component(truth.neighbor_component, spec.neighbor_signal);

  for (int i = 0; i < n; ++i) {
    const double log_price = truth.base_log_price + truth.attr_component[i] +
                             truth.poi_component[i] + truth.areal_component[i] +
                             truth.neighbor_component[i] + truth.noise[i];
    fx.houses[i].price = std::exp(log_price);
  }
  return fx;
}

}  // namespace ammasi::synth
