#pragma once

#include <span>
#include <vector>

#include "ammasi/geometry.hpp"

namespace ammasi::poi {

/// One Gaussian proximity per POI type: exp(-Dist^2 / (2 beta^2)), in (0,1].
struct ProximityVector {
  std::vector<double> values;
  double beta = 0.0;
};

/// Linear-regression report. Coefficient order follows the design columns,
/// intercept last. significant[k] <=> |t_stats[k]| > critical_t.
struct OlsReport {
  std::vector<double> coefficients;
  std::vector<double> t_stats;
  std::vector<bool> significant;
  double r_squared = 0.0;  // unclamped; 0 when the targets have zero variance
};

struct BetaSweepPoint {
  double beta = 0.0;
  double r_squared = 0.0;
};

struct BetaSweepResult {
  std::vector<BetaSweepPoint> points;
  double best_beta = 0.0;  // smallest beta among R^2 ties
};

/// Proximity of one house to each POI-type union geometry.
/// Throws std::invalid_argument when beta <= 0 or the geometry list is empty.
ProximityVector proximity_vector(const geom::GeoPoint& house,
                                 std::span<const geom::Geometry> poi_geoms,
                                 double beta);

/// Proximity matrix for a batch of houses, one row per house (parallel over
/// houses, capped by AMMASI_THREADS).
std::vector<ProximityVector> proximity_matrix(std::span<const geom::GeoPoint> houses,
                                              std::span<const geom::Geometry> poi_geoms,
                                              double beta);

/// OLS of y on X with an intercept column appended internally. t statistics
/// come from sigma^2 (X^T X)^-1; rank deficiency raises std::invalid_argument
/// naming the dependent columns.
OlsReport ols_fit(const std::vector<std::vector<double>>& design,
                  std::span<const double> y, double critical_t = 1.96);

/// For each beta, regresses targets on the proximity matrix (house attributes
/// excluded) and records in-sample R^2. Callers pass prices or log prices as
/// `targets`; the pipeline uses log prices.
BetaSweepResult beta_sweep(std::span<const geom::GeoPoint> houses,
                           std::span<const double> targets,
                           std::span<const geom::Geometry> poi_geoms,
                           std::span<const double> beta_grid,
                           double critical_t = 1.96);

}  // namespace ammasi::poi
