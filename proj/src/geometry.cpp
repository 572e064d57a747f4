#include "ammasi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace ammasi::geom {

namespace {

double sq(double x) { return x * x; }

double dist_point_to_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double dx = b.lon - a.lon;
  const double dy = b.lat - a.lat;
  const double len2 = sq(dx) + sq(dy);
  if (len2 == 0.0) return std::sqrt(sq(p.lon - a.lon) + sq(p.lat - a.lat));
  double t = ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::sqrt(sq(p.lon - (a.lon + t * dx)) + sq(p.lat - (a.lat + t * dy)));
}

// Even-odd rule over the implicitly closed ring.
bool point_in_ring(const GeoPoint& p, const std::vector<GeoPoint>& ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const GeoPoint& a = ring[i];
    const GeoPoint& b = ring[j];
    const bool crosses = (a.lat > p.lat) != (b.lat > p.lat);
    if (crosses) {
      const double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

double dist_to_part(const GeoPoint& p, const std::vector<GeoPoint>& part, bool closed) {
  if (part.size() == 1)
    return std::sqrt(sq(p.lon - part[0].lon) + sq(p.lat - part[0].lat));
  double best = dist_point_to_segment(p, part[0], part[1]);
  for (std::size_t i = 1; i + 1 < part.size(); ++i)
    best = std::min(best, dist_point_to_segment(p, part[i], part[i + 1]));
  if (closed && part.size() >= 3)
    best = std::min(best, dist_point_to_segment(p, part.back(), part.front()));
  return best;
}

}  // namespace

ArealGrid make_grid(double min_lon, double min_lat, double max_lon, double max_lat,
                    int mx, int my) {
  if (!(max_lon > min_lon) || !(max_lat > min_lat))
    throw std::invalid_argument("grid bbox must have positive extent");
  if (mx < 1 || my < 1) throw std::invalid_argument("grid cell counts must be positive");
  return ArealGrid{min_lon, min_lat, max_lon, max_lat, mx, my};
}

double dist_point_to_geometry(const GeoPoint& p, const Geometry& g) {
  if (g.empty()) throw std::invalid_argument("empty geometry");
  const bool polygonal = g.kind != GeomKind::kPolyline;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& part : g.parts) {
    if (part.empty()) continue;
    if (polygonal && part.size() >= 3 && point_in_ring(p, part)) return 0.0;
    best = std::min(best, dist_to_part(p, part, polygonal));
  }
  return best;
}

int assign_cell(const GeoPoint& p, const ArealGrid& grid) {
  const double fx = (p.lon - grid.min_lon) / grid.cell_width();
  const double fy = (p.lat - grid.min_lat) / grid.cell_height();
  int ix = static_cast<int>(std::floor(fx));
  int iy = static_cast<int>(std::floor(fy));
  ix = std::clamp(ix, 0, grid.mx - 1);
  iy = std::clamp(iy, 0, grid.my - 1);
  return iy * grid.mx + ix;
}

std::vector<int> line_cells(const Geometry& line, const ArealGrid& grid) {
  if (line.kind != GeomKind::kPolyline)
    throw std::invalid_argument("line_cells requires a polyline geometry");
  if (line.empty()) throw std::invalid_argument("empty geometry");

  std::vector<int> cells;
  std::unordered_set<int> seen;
  auto push = [&](int cell) {
    if (seen.insert(cell).second) cells.push_back(cell);
  };

  std::vector<double> ts;
  for (const auto& part : line.parts) {
    if (part.size() == 1) push(assign_cell(part[0], grid));
    for (std::size_t i = 0; i + 1 < part.size(); ++i) {
      const GeoPoint& a = part[i];
      const GeoPoint& b = part[i + 1];
      push(assign_cell(a, grid));
      ts.clear();
      ts.push_back(0.0);
      ts.push_back(1.0);
      // Split at every vertical and horizontal grid line the segment crosses,
      // then classify each sub-segment by its midpoint. assign_cell resolves
      // boundary ties the same way the dense-sampling oracle does.
      const double dx = b.lon - a.lon;
      if (dx != 0.0) {
        const double w = grid.cell_width();
        const double lo = std::min(a.lon, b.lon), hi = std::max(a.lon, b.lon);
        const int k0 = static_cast<int>(std::ceil((lo - grid.min_lon) / w));
        const int k1 = static_cast<int>(std::floor((hi - grid.min_lon) / w));
        for (int k = k0; k <= k1; ++k) {
          const double t = (grid.min_lon + k * w - a.lon) / dx;
          if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
      }
      const double dy = b.lat - a.lat;
      if (dy != 0.0) {
        const double h = grid.cell_height();
        const double lo = std::min(a.lat, b.lat), hi = std::max(a.lat, b.lat);
        const int k0 = static_cast<int>(std::ceil((lo - grid.min_lat) / h));
        const int k1 = static_cast<int>(std::floor((hi - grid.min_lat) / h));
        for (int k = k0; k <= k1; ++k) {
          const double t = (grid.min_lat + k * h - a.lat) / dy;
          if (t > 0.0 && t < 1.0) ts.push_back(t);
        }
      }
      std::sort(ts.begin(), ts.end());
      for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
        const double tm = 0.5 * (ts[s] + ts[s + 1]);
        push(assign_cell(GeoPoint{a.lon + tm * dx, a.lat + tm * dy}, grid));
      }
      push(assign_cell(b, grid));
    }
  }
  return cells;
}

}  // namespace ammasi::geom
