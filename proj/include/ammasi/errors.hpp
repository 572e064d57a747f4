#pragma once

#include <stdexcept>
#include <string>

namespace ammasi {

/// Bad run configuration (unknown mode, inconsistent dims, ...). CLI exit 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent input data (CSV row, GeoJSON feature). CLI exit 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ammasi
