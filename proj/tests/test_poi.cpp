#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "ammasi/poi.hpp"
#include "ammasi/rng.hpp"
#include "doctest.h"

using namespace ammasi;
using geom::GeoPoint;
using geom::Geometry;
using geom::GeomKind;

namespace {

Geometry square_at(double cx, double cy, double half) {
  Geometry g;
  g.kind = GeomKind::kPolygon;
  g.parts = {{{cx - half, cy - half},
              {cx + half, cy - half},
              {cx + half, cy + half},
              {cx - half, cy + half}}};
  return g;
}

Geometry vertical_segment(double x) {
  Geometry g;
  g.kind = GeomKind::kPolyline;
  g.parts = {{{x, -10.0}, {x, 10.0}}};
  return g;
}

// Plain normal-equations solver, independent of the production QR route.
std::vector<double> normal_equations_fit(const std::vector<std::vector<double>>& design,
                                         const std::vector<double>& y) {
  const std::size_t n = design.size();
  const std::size_t p = design[0].size() + 1;
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  auto cell = [&](std::size_t i, std::size_t j) {
    return j < p - 1 ? design[i][j] : 1.0;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < p; ++c) a[r][c] += cell(i, r) * cell(i, c);
      a[r][p] += cell(i, r) * y[i];
    }
  for (std::size_t col = 0; col < p; ++col) {  // Gaussian elimination, partial pivot
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> beta(p);
  for (std::size_t r = 0; r < p; ++r) beta[r] = a[r][p] / a[r][r];
  return beta;
}

}  // namespace

TEST_CASE("gaussian proximity") {
  SUBCASE("distance zero gives proximity one") {
    const std::vector<Geometry> geoms{square_at(0, 0, 1)};
    const auto p = poi::proximity_vector({0, 0}, geoms, 0.05);
    CHECK(p.values[0] == 1.0);
  }

  SUBCASE("distance beta gives exp(-1/2)") {
    const std::vector<Geometry> geoms{vertical_segment(0.0)};
    const double beta = 0.037;
    const auto p = poi::proximity_vector({beta, 0}, geoms, beta);
    CHECK(p.values[0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(p.values[0] == doctest::Approx(0.606531).epsilon(1e-6));
  }

  SUBCASE("published FC beta at twice its scale") {
    const std::vector<Geometry> geoms{vertical_segment(0.0)};
    const auto p = poi::proximity_vector({0.045 * 2.0, 0}, geoms, 0.045);
    CHECK(p.values[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(p.values[0] == doctest::Approx(0.135335).epsilon(1e-6));
  }

  SUBCASE("monotone in distance, entries in (0, 1]") {
    const std::vector<Geometry> geoms{vertical_segment(0.0)};
    double prev = 2.0;
    for (double x : {0.0, 0.01, 0.05, 0.2, 1.0}) {
      const auto p = poi::proximity_vector({x, 0}, geoms, 0.05);
      CHECK(p.values[0] > 0.0);
      CHECK(p.values[0] <= 1.0);
      CHECK(p.values[0] < prev + 1e-15);
      prev = p.values[0];
    }
  }

  SUBCASE("joint rescaling of distances and beta is a no-op") {
    Rng rng(88);
    for (int trial = 0; trial < 10; ++trial) {
      const double x = rng.uniform(0.01, 0.5);
      const double beta = rng.uniform(0.01, 0.1);
      const double c = rng.uniform(0.1, 10.0);
      const std::vector<Geometry> base{vertical_segment(0.0)};
      const auto a = poi::proximity_vector({x, 0}, base, beta);
      const auto b = poi::proximity_vector({c * x, 0}, base, c * beta);
      CHECK(std::fabs(a.values[0] - b.values[0]) < 1e-12);
    }
  }

  SUBCASE("errors") {
    const std::vector<Geometry> geoms{vertical_segment(0.0)};
    CHECK_THROWS_AS(poi::proximity_vector({0, 0}, geoms, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(poi::proximity_vector({0, 0}, geoms, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(poi::proximity_vector({0, 0}, std::vector<Geometry>{}, 0.1),
                    std::invalid_argument);
  }
}

TEST_CASE("ols_fit") {
  SUBCASE("exact linear data") {
    std::vector<std::vector<double>> design;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
      design.push_back({static_cast<double>(i)});
      y.push_back(2.0 * i + 1.0);
    }
    const auto fit = poi::ols_fit(design, y);
    CHECK(fit.coefficients[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(fit.coefficients[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.significant[0]);
  }

  SUBCASE("pure noise: coefficients match the normal-equations oracle") {
    Rng rng(17);
    std::vector<std::vector<double>> design;
    std::vector<double> y;
    for (int i = 0; i < 200; ++i) {
      design.push_back({rng.normal(), rng.normal(), rng.normal()});
      y.push_back(rng.normal());
    }
    const auto fit = poi::ols_fit(design, y);
    const auto oracle = normal_equations_fit(design, y);
    for (std::size_t j = 0; j < oracle.size(); ++j)
      CHECK(fit.coefficients[j] == doctest::Approx(oracle[j]).epsilon(1e-8));

    int significant = 0;
    for (std::size_t j = 0; j + 1 < fit.significant.size(); ++j)
      significant += fit.significant[j] ? 1 : 0;
    CHECK(significant <= 1);  // at the 5% level, mostly none
  }

  SUBCASE("residuals are orthogonal to the design") {
    Rng rng(29);
    std::vector<std::vector<double>> design;
    std::vector<double> y;
    const std::size_t n = 150;
    for (std::size_t i = 0; i < n; ++i) {
      design.push_back({rng.normal(), rng.normal()});
      y.push_back(1.5 * design.back()[0] + rng.normal());
    }
    const auto fit = poi::ols_fit(design, y);
    for (std::size_t j = 0; j < 3; ++j) {  // columns + intercept
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double fitted = fit.coefficients[0] * design[i][0] +
                              fit.coefficients[1] * design[i][1] + fit.coefficients[2];
        const double xij = j < 2 ? design[i][j] : 1.0;
        dot += xij * (y[i] - fitted);
      }
      CHECK(std::fabs(dot) < 1e-8 * static_cast<double>(n));
    }
  }

  SUBCASE("duplicated column is rejected and named") {
    std::vector<std::vector<double>> design;
    std::vector<double> y;
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      const double v = rng.normal();
      design.push_back({v, rng.normal(), v});
      y.push_back(rng.normal());
    }
    CHECK_THROWS_WITH_AS(poi::ols_fit(design, y),
                         doctest::Contains("collinear columns"), std::invalid_argument);
  }

  SUBCASE("needs more rows than columns") {
    CHECK_THROWS_AS(poi::ols_fit({{1.0}, {2.0}}, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("beta sweep") {
  // One POI type per vertical line; houses spread on the x axis so distances
  // are exact and the planted kernel is recoverable.
  Rng rng(41);
  std::vector<Geometry> geoms{vertical_segment(0.0), vertical_segment(0.6)};
  std::vector<GeoPoint> houses;
  for (int i = 0; i < 300; ++i) houses.push_back({rng.uniform(0.0, 1.0), rng.uniform(0, 1)});

  std::vector<double> grid;
  for (int i = 2; i <= 20; ++i) grid.push_back(0.005 * i);

  SUBCASE("recovers the generating beta") {
    const double beta_star = 0.03;
    std::vector<double> y;
    for (const auto& h : houses) {
      const auto p = poi::proximity_vector(h, geoms, beta_star);
      y.push_back(3.0 * p.values[0] + 1.5 * p.values[1] + rng.normal(0.0, 0.01));
    }
    const auto sweep = poi::beta_sweep(houses, y, geoms, grid);
    CHECK(sweep.best_beta == doctest::Approx(beta_star).epsilon(1e-12));
    CHECK(sweep.points.size() == grid.size());
  }

  SUBCASE("constant prices give zero R^2 everywhere") {
    const std::vector<double> y(houses.size(), 5.0);
    const auto sweep = poi::beta_sweep(houses, y, geoms, grid);
    for (const auto& p : sweep.points) CHECK(p.r_squared == 0.0);
  }

  SUBCASE("R^2 is invariant to affine rescaling of targets") {
    std::vector<double> y;
    for (const auto& h : houses) {
      const auto p = poi::proximity_vector(h, geoms, 0.04);
      y.push_back(2.0 * p.values[0] + rng.normal(0.0, 0.05));
    }
    std::vector<double> y2(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y2[i] = 100.0 * y[i] - 7.0;
    const auto a = poi::beta_sweep(houses, y, geoms, grid);
    const auto b = poi::beta_sweep(houses, y2, geoms, grid);
    CHECK(a.best_beta == b.best_beta);
    for (std::size_t i = 0; i < a.points.size(); ++i)
      CHECK(a.points[i].r_squared == doctest::Approx(b.points[i].r_squared).epsilon(1e-9));
  }

  SUBCASE("errors") {
    std::vector<double> y(houses.size(), 1.0);
    CHECK_THROWS_AS(poi::beta_sweep(houses, y, geoms, std::vector<double>{}),
                    std::invalid_argument);
    const std::vector<GeoPoint> few(houses.begin(), houses.begin() + 3);
    const std::vector<double> few_y(3, 1.0);
    CHECK_THROWS_AS(poi::beta_sweep(few, few_y, geoms, grid), std::invalid_argument);
  }
}
