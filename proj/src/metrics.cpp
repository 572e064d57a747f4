#include "ammasi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ammasi::metrics {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) throw std::invalid_argument("metric input is empty");
  if (y.size() != yhat.size())
    throw std::invalid_argument("metric inputs differ in length: " +
                                std::to_string(y.size()) + " vs " +
                                std::to_string(yhat.size()));
}

}  // namespace

double male(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0) || !(yhat[i] > 0.0))
      throw std::invalid_argument("male requires positive prices (entry " +
                                  std::to_string(i) + ")");
    sum += std::fabs(std::log(y[i]) - std::log(yhat[i]));
  }
  return sum / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

double mdape(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  std::vector<double> rel(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0)
      throw std::invalid_argument("mdape requires non-zero targets (entry " +
                                  std::to_string(i) + ")");
    rel[i] = std::fabs(y[i] - yhat[i]) / std::fabs(y[i]);
  }
  std::sort(rel.begin(), rel.end());
  const std::size_t n = rel.size();
  const double med =
      (n % 2 == 1) ? rel[n / 2] : 0.5 * (rel[n / 2 - 1] + rel[n / 2]);
  return 100.0 * med;
}

MetricTriple all(std::span<const double> y, std::span<const double> yhat) {
  return MetricTriple{male(y, yhat), rmse(y, yhat), mdape(y, yhat)};
}

}  // namespace ammasi::metrics
