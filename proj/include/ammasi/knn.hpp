#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ammasi/geometry.hpp"

namespace ammasi::knn {

inline constexpr std::size_t kNoExclude = static_cast<std::size_t>(-1);

/// Per-house reference lists into the training split: geographic neighbors
/// (g) by planar lon/lat distance and feature-similar houses (s) by Euclidean
/// distance over z-scored attributes. Distances are sorted ascending; ties
/// break toward the lower index; a training house never references itself.
struct ReferenceSet {
  std::vector<std::size_t> g_idx;
  std::vector<double> g_dist;
  std::vector<std::size_t> s_idx;
  std::vector<double> s_dist;
};

/// Column means / stds taken from the training split. Constant columns get
/// std 1 so their z-scores collapse to 0.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stdev;

  static FeatureScaler fit(std::span<const std::vector<double>> rows);
  std::vector<double> transform(std::span<const double> row) const;
};

/// Exact k nearest by planar Euclidean distance on (lon, lat). exclude is a
/// training index to skip (pass the query's own index when it is a training
/// house). Throws std::invalid_argument when k exceeds the candidate count.
std::pair<std::vector<std::size_t>, std::vector<double>> geo_knn(
    std::span<const geom::GeoPoint> train, const geom::GeoPoint& query,
    std::size_t n_g, std::size_t exclude = kNoExclude);

/// Exact k nearest by Euclidean distance over scaler-transformed feature
/// rows. `train_scaled` must already be transformed; `query_raw` is
/// transformed here.
std::pair<std::vector<std::size_t>, std::vector<double>> feat_knn(
    std::span<const std::vector<double>> train_scaled, const FeatureScaler& scaler,
    std::span<const double> query_raw, std::size_t n_s,
    std::size_t exclude = kNoExclude);

}  // namespace ammasi::knn
