#pragma once

#include <cstddef>
#include <vector>

namespace ammasi::geom {

/// Planar point in decimal degrees. Coordinates are treated as plain x/y;
/// no projection or range clamping is applied anywhere in the toolkit.
struct GeoPoint {
  double lon = 0.0;  // x
  double lat = 0.0;  // y
};

enum class GeomKind { kPolyline, kPolygon, kMulti };

/// Polyline, polygon, or multi-part union. Polygon parts are rings closed
/// implicitly (last vertex connects back to the first); kMulti parts use
/// polygon semantics. A part with fewer than 3 vertices degrades gracefully:
/// 2 vertices act as a segment, 1 as a point, and no containment is tested.
struct Geometry {
  GeomKind kind = GeomKind::kPolygon;
  std::vector<std::vector<GeoPoint>> parts;

  bool empty() const {
    for (const auto& part : parts)
      if (!part.empty()) return false;
    return true;
  }
};

/// Regular M_x x M_y partition of a bounding box. Cell indices are row-major:
/// iy * mx + ix.
struct ArealGrid {
  double min_lon = 0.0, min_lat = 0.0, max_lon = 1.0, max_lat = 1.0;
  int mx = 1, my = 1;

  int cell_count() const { return mx * my; }
  double cell_width() const { return (max_lon - min_lon) / mx; }
  double cell_height() const { return (max_lat - min_lat) / my; }
};

/// Validates extents and cell counts; throws std::invalid_argument.
ArealGrid make_grid(double min_lon, double min_lat, double max_lon, double max_lat,
                    int mx, int my);

/// Minimum planar distance from p to g: point-to-segment over polyline parts
/// and polygon boundaries, 0 if p lies on or inside any polygon part.
/// Throws std::invalid_argument on an empty geometry.
double dist_point_to_geometry(const GeoPoint& p, const Geometry& g);

/// Row-major cell index of p. Binning is half-open [lo, hi) per cell except
/// the last column/row, which is closed; points outside the bbox clamp to
/// the nearest edge cell.
int assign_cell(const GeoPoint& p, const ArealGrid& grid);

/// Every cell traversed by any segment of the polyline (conservative
/// supercover split at grid-line crossings), ordered by first visit and
/// deduplicated. Throws std::invalid_argument unless line.kind is kPolyline.
std::vector<int> line_cells(const Geometry& line, const ArealGrid& grid);

}  // namespace ammasi::geom
