#include "ammasi/knn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ammasi::knn {

namespace {

// Selects the k smallest (dist, idx) pairs. Ties on distance break toward
// the lower index via the pair ordering.
std::pair<std::vector<std::size_t>, std::vector<double>> select_k(
    std::vector<std::pair<double, std::size_t>>& cand, std::size_t k,
    const char* what) {
  if (k == 0) throw std::invalid_argument(std::string(what) + ": k must be >= 1");
  if (k > cand.size())
    throw std::invalid_argument(std::string(what) + ": k=" + std::to_string(k) +
                                " exceeds " + std::to_string(cand.size()) +
                                " candidates");
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
  std::pair<std::vector<std::size_t>, std::vector<double>> out;
  out.first.reserve(k);
  out.second.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.first.push_back(cand[i].second);
    out.second.push_back(cand[i].first);
  }
  return out;
}

}  // namespace

FeatureScaler FeatureScaler::fit(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw std::invalid_argument("FeatureScaler: no rows");
  const std::size_t dim = rows[0].size();
  FeatureScaler s;
  s.mean.assign(dim, 0.0);
  s.stdev.assign(dim, 0.0);
  for (const auto& r : rows) {
    if (r.size() != dim) throw std::invalid_argument("FeatureScaler: ragged rows");
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] += r[j];
  }
  for (std::size_t j = 0; j < dim; ++j) s.mean[j] /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = r[j] - s.mean[j];
      s.stdev[j] += d * d;
    }
  for (std::size_t j = 0; j < dim; ++j) {
    s.stdev[j] = std::sqrt(s.stdev[j] / static_cast<double>(rows.size()));
    if (s.stdev[j] < 1e-12) s.stdev[j] = 1.0;  // constant column -> z-score 0
  }
  return s;
}

std::vector<double> FeatureScaler::transform(std::span<const double> row) const {
  if (row.size() != mean.size())
    throw std::invalid_argument("FeatureScaler: row width " + std::to_string(row.size()) +
                                " != fitted width " + std::to_string(mean.size()));
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / stdev[j];
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<double>> geo_knn(
    std::span<const geom::GeoPoint> train, const geom::GeoPoint& query,
    std::size_t n_g, std::size_t exclude) {
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (i == exclude) continue;
    const double dx = train[i].lon - query.lon;
    const double dy = train[i].lat - query.lat;
    cand.emplace_back(std::sqrt(dx * dx + dy * dy), i);
  }
  return select_k(cand, n_g, "geo_knn");
}

std::pair<std::vector<std::size_t>, std::vector<double>> feat_knn(
    std::span<const std::vector<double>> train_scaled, const FeatureScaler& scaler,
    std::span<const double> query_raw, std::size_t n_s, std::size_t exclude) {
  const std::vector<double> q = scaler.transform(query_raw);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(train_scaled.size());
  for (std::size_t i = 0; i < train_scaled.size(); ++i) {
    if (i == exclude) continue;
    double d2 = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double d = train_scaled[i][j] - q[j];
      d2 += d * d;
    }
    cand.emplace_back(std::sqrt(d2), i);
  }
  return select_k(cand, n_s, "feat_knn");
}

}  // namespace ammasi::knn
