#pragma once

#include <span>

namespace ammasi::metrics {

struct MetricTriple {
  double male = 0.0;   // mean absolute log error (natural log)
  double rmse = 0.0;   // price units
  double mdape = 0.0;  // percent
};

/// Mean |log y - log yhat|. Both vectors must be positive, equal length >= 1.
double male(std::span<const double> y, std::span<const double> yhat);

/// Root mean squared error. Vectors must be non-empty and equal length.
double rmse(std::span<const double> y, std::span<const double> yhat);

/// Median of |y - yhat| / |y|, reported x100. Even-length median is the mean
/// of the two central order statistics. Targets must be non-zero.
double mdape(std::span<const double> y, std::span<const double> yhat);

MetricTriple all(std::span<const double> y, std::span<const double> yhat);

}  // namespace ammasi::metrics
