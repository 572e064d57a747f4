#pragma once

#include <cstdio>
#include <string>

namespace ammasi {

/// Shortest round-trip decimal for a double; all numeric artifacts use this
/// so that re-reading a file reproduces the exact bits.
inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ammasi
