#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "ammasi/knn.hpp"
#include "ammasi/rng.hpp"
#include "doctest.h"

using namespace ammasi;
using geom::GeoPoint;

namespace {

// Full-sort brute force, kept separate from the partial-sort production path.
std::vector<std::size_t> brute_force_geo(const std::vector<GeoPoint>& train,
                                         const GeoPoint& q, std::size_t k,
                                         std::size_t exclude) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (i == exclude) continue;
    all.emplace_back(std::hypot(train[i].lon - q.lon, train[i].lat - q.lat), i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < k; ++i) idx.push_back(all[i].second);
  return idx;
}

}  // namespace

TEST_CASE("geographic knn") {
  SUBCASE("nearest on a line") {
    const std::vector<GeoPoint> train{{0, 0}, {1, 0}, {2, 0}};
    const auto [idx, dist] = knn::geo_knn(train, {0.4, 0}, 2);
    CHECK(idx == std::vector<std::size_t>{0, 1});
    CHECK(dist[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(dist[1] == doctest::Approx(0.6).epsilon(1e-12));
  }

  SUBCASE("self exclusion") {
    std::vector<GeoPoint> train;
    Rng rng(1);
    for (int i = 0; i < 10; ++i) train.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    const auto [idx, dist] = knn::geo_knn(train, train[7], 1, 7);
    CHECK(idx[0] != 7);
    CHECK(dist[0] > 0.0);
  }

  SUBCASE("matches brute force on 500 random houses") {
    Rng rng(909);
    std::vector<GeoPoint> train;
    for (int i = 0; i < 500; ++i) train.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    for (int trial = 0; trial < 25; ++trial) {
      const GeoPoint q{rng.uniform(0, 1), rng.uniform(0, 1)};
      const auto [idx, dist] = knn::geo_knn(train, q, 20);
      CHECK(idx == brute_force_geo(train, q, 20, knn::kNoExclude));
      CHECK(std::is_sorted(dist.begin(), dist.end()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double re =
            std::hypot(train[idx[j]].lon - q.lon, train[idx[j]].lat - q.lat);
        CHECK(std::fabs(re - dist[j]) < 1e-12);
      }
    }
  }

  SUBCASE("ties break toward the lower index") {
    const std::vector<GeoPoint> train{{1, 0}, {-1, 0}, {0, 1}};
    const auto [idx, dist] = knn::geo_knn(train, {0, 0}, 3);
    CHECK(idx == std::vector<std::size_t>{0, 1, 2});
  }

  SUBCASE("translation invariance") {
    Rng rng(55);
    std::vector<GeoPoint> train;
    for (int i = 0; i < 60; ++i) train.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    const GeoPoint q{0.3, 0.7};
    const auto base = knn::geo_knn(train, q, 10).first;
    std::vector<GeoPoint> moved = train;
    for (auto& p : moved) {
      p.lon += 123.0;
      p.lat -= 45.0;
    }
    const auto shifted = knn::geo_knn(moved, {q.lon + 123.0, q.lat - 45.0}, 10).first;
    CHECK(base == shifted);
  }

  SUBCASE("k too large is rejected") {
    const std::vector<GeoPoint> train{{0, 0}, {1, 0}};
    CHECK_THROWS_AS(knn::geo_knn(train, {0, 0}, 3), std::invalid_argument);
    CHECK_THROWS_AS(knn::geo_knn(train, train[0], 2, 0), std::invalid_argument);
  }
}

TEST_CASE("feature knn") {
  auto make_rows = [](const std::vector<std::vector<double>>& raw,
                      const knn::FeatureScaler& s) {
    std::vector<std::vector<double>> scaled;
    for (const auto& r : raw) scaled.push_back(s.transform(r));
    return scaled;
  };

  SUBCASE("identical feature vectors rank first at distance zero") {
    const std::vector<std::vector<double>> raw{{1, 2}, {5, 5}, {1, 2}, {9, 0}};
    const auto scaler = knn::FeatureScaler::fit(raw);
    const auto scaled = make_rows(raw, scaler);
    const auto [idx, dist] = knn::feat_knn(scaled, scaler, std::vector<double>{1, 2}, 2);
    CHECK(idx[0] == 0);
    CHECK(dist[0] == 0.0);
    CHECK(idx[1] == 2);
    CHECK(dist[1] == 0.0);
  }

  SUBCASE("one-training-std difference has distance one") {
    // Column std is exactly 2 here; a query offset of 2 in that column is one
    // z-score unit away from the matching row.
    const std::vector<std::vector<double>> raw{{0, 7}, {4, 7}, {0, 7}, {4, 7}};
    const auto scaler = knn::FeatureScaler::fit(raw);
    const auto scaled = make_rows(raw, scaler);
    const auto [idx2, dist2] = knn::feat_knn(scaled, scaler, std::vector<double>{6, 7}, 1);
    CHECK(dist2[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(idx2[0] == 1);  // tie with row 3 breaks toward the lower index
  }

  SUBCASE("matches brute force on 500 random houses") {
    Rng rng(808);
    std::vector<std::vector<double>> raw;
    for (int i = 0; i < 500; ++i)
      raw.push_back({rng.normal(), rng.normal(5, 3), rng.normal(-2, 0.5)});
    const auto scaler = knn::FeatureScaler::fit(raw);
    const auto scaled = make_rows(raw, scaler);

    for (int trial = 0; trial < 25; ++trial) {
      const std::vector<double> q{rng.normal(), rng.normal(5, 3), rng.normal(-2, 0.5)};
      const auto [idx, dist] = knn::feat_knn(scaled, scaler, q, 20);

      const auto qs = scaler.transform(q);
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t i = 0; i < scaled.size(); ++i) {
        double d2 = 0;
        for (std::size_t j = 0; j < qs.size(); ++j)
          d2 += (scaled[i][j] - qs[j]) * (scaled[i][j] - qs[j]);
        all.emplace_back(std::sqrt(d2), i);
      }
      std::sort(all.begin(), all.end());
      for (std::size_t j = 0; j < 20; ++j) CHECK(idx[j] == all[j].second);
      CHECK(std::is_sorted(dist.begin(), dist.end()));
    }
  }

  SUBCASE("affine rescaling of a raw column leaves neighbors unchanged") {
    Rng rng(505);
    std::vector<std::vector<double>> raw;
    for (int i = 0; i < 80; ++i) raw.push_back({rng.normal(), rng.normal(), rng.normal()});
    const std::vector<double> q{0.1, -0.2, 0.3};

    const auto scaler_a = knn::FeatureScaler::fit(raw);
    const auto idx_a = knn::feat_knn(make_rows(raw, scaler_a), scaler_a, q, 10).first;

    std::vector<std::vector<double>> rescaled = raw;
    for (auto& r : rescaled) r[1] = 42.0 * r[1] - 3.0;
    std::vector<double> q2 = q;
    q2[1] = 42.0 * q2[1] - 3.0;
    const auto scaler_b = knn::FeatureScaler::fit(rescaled);
    const auto idx_b = knn::feat_knn(make_rows(rescaled, scaler_b), scaler_b, q2, 10).first;
    CHECK(idx_a == idx_b);
  }

  SUBCASE("constant columns are neutral") {
    const std::vector<std::vector<double>> raw{{1, 5}, {2, 5}, {3, 5}};
    const auto scaler = knn::FeatureScaler::fit(raw);
    const auto scaled = make_rows(raw, scaler);
    const auto [idx, dist] = knn::feat_knn(scaled, scaler, std::vector<double>{2, 5}, 1);
    CHECK(idx[0] == 1);
    CHECK(dist[0] == 0.0);
  }
}
