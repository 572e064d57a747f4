#include "ammasi/poi.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ammasi/parallel.hpp"

namespace ammasi::poi {

ProximityVector proximity_vector(const geom::GeoPoint& house,
                                 std::span<const geom::Geometry> poi_geoms,
                                 double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (poi_geoms.empty()) throw std::invalid_argument("no POI geometries given");
  ProximityVector out;
  out.beta = beta;
  out.values.reserve(poi_geoms.size());
  for (const auto& g : poi_geoms) {
    const double d = geom::dist_point_to_geometry(house, g);
    out.values.push_back(std::exp(-(d * d) / (2.0 * beta * beta)));
  }
  return out;
}

std::vector<ProximityVector> proximity_matrix(std::span<const geom::GeoPoint> houses,
                                              std::span<const geom::Geometry> poi_geoms,
                                              double beta) {
  std::vector<ProximityVector> rows(houses.size());
  parallel_for(houses.size(), [&](std::size_t i) {
    rows[i] = proximity_vector(houses[i], poi_geoms, beta);
  });
  return rows;
}

OlsReport ols_fit(const std::vector<std::vector<double>>& design,
                  std::span<const double> y, double critical_t) {
  const std::size_t n = design.size();
  if (n == 0) throw std::invalid_argument("ols_fit: empty design matrix");
  const std::size_t k = design[0].size();
  const std::size_t p = k + 1;  // + intercept
  if (n <= p)
    throw std::invalid_argument("ols_fit: need more rows than columns (n=" +
                                std::to_string(n) + ", p=" + std::to_string(p) + ")");
  if (y.size() != n) throw std::invalid_argument("ols_fit: y length mismatch");

  Eigen::MatrixXd X(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    if (design[i].size() != k)
      throw std::invalid_argument("ols_fit: ragged design matrix at row " +
                                  std::to_string(i));
    for (std::size_t j = 0; j < k; ++j) X(i, j) = design[i][j];
    X(i, k) = 1.0;
  }
  Eigen::VectorXd yv(n);
  for (std::size_t i = 0; i < n; ++i) yv(i) = y[i];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p)) {
    // The permutation puts the dependent columns after the first `rank` ones.
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < static_cast<Eigen::Index>(p); ++j) {
      if (!cols.empty()) cols += ", ";
      const Eigen::Index orig = perm(j);
      cols += orig == static_cast<Eigen::Index>(k) ? std::string("intercept")
                                                   : std::to_string(orig);
    }
    throw std::invalid_argument("ols_fit: singular design matrix; collinear columns: " + cols);
  }

  const Eigen::VectorXd beta = qr.solve(yv);
  const Eigen::VectorXd resid = yv - X * beta;
  const double ssr = resid.squaredNorm();
  const double mean_y = yv.mean();
  const double sst = (yv.array() - mean_y).square().sum();

  const double sigma2 = ssr / static_cast<double>(n - p);
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();

  OlsReport report;
  report.coefficients.resize(p);
  report.t_stats.resize(p);
  report.significant.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    report.coefficients[j] = beta(j);
    const double se = std::sqrt(std::max(sigma2 * xtx_inv(j, j), 0.0));
    report.t_stats[j] = se > 0.0 ? beta(j) / se
                                 : (beta(j) == 0.0 ? 0.0
                                                   : std::numeric_limits<double>::infinity());
    report.significant[j] = std::fabs(report.t_stats[j]) > critical_t;
  }
  report.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
  return report;
}

BetaSweepResult beta_sweep(std::span<const geom::GeoPoint> houses,
                           std::span<const double> targets,
                           std::span<const geom::Geometry> poi_geoms,
                           std::span<const double> beta_grid,
                           double critical_t) {
  if (beta_grid.empty()) throw std::invalid_argument("beta_sweep: empty beta grid");
  if (houses.size() < poi_geoms.size() + 2)
    throw std::invalid_argument("beta_sweep: need at least N_P + 2 houses");
  if (targets.size() != houses.size())
    throw std::invalid_argument("beta_sweep: target length mismatch");

  // Distances do not depend on beta; compute once and re-kernel per beta.
  std::vector<std::vector<double>> dists(houses.size(),
                                         std::vector<double>(poi_geoms.size()));
  parallel_for(houses.size(), [&](std::size_t i) {
    for (std::size_t t = 0; t < poi_geoms.size(); ++t)
      dists[i][t] = geom::dist_point_to_geometry(houses[i], poi_geoms[t]);
  });

  BetaSweepResult result;
  double best_r2 = -std::numeric_limits<double>::infinity();
  for (double beta : beta_grid) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta_sweep: beta must be positive");
    std::vector<std::vector<double>> design(houses.size(),
                                            std::vector<double>(poi_geoms.size()));
    for (std::size_t i = 0; i < houses.size(); ++i)
      for (std::size_t t = 0; t < poi_geoms.size(); ++t)
        design[i][t] = std::exp(-(dists[i][t] * dists[i][t]) / (2.0 * beta * beta));
    const OlsReport fit = ols_fit(design, targets, critical_t);
    result.points.push_back(BetaSweepPoint{beta, fit.r_squared});
    if (fit.r_squared > best_r2 ||
        (fit.r_squared == best_r2 && beta < result.best_beta)) {
      best_r2 = fit.r_squared;
      result.best_beta = beta;
    }
  }
  return result;
}

}  // namespace ammasi::poi
