#pragma once

#include <map>
#include <string>
#include <vector>

#include "ammasi/geometry.hpp"

namespace ammasi::data {

/// One property row: id, planar location, attribute vector f, price y > 0.
struct HouseRecord {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
  std::vector<double> attrs;
  double price = 0.0;
};

/// Reads `id,lon,lat,price,attr_1..attr_k`. Row order is preserved; a missing
/// column, non-numeric cell, or non-positive price raises DataError naming
/// the 1-based data row.
std::vector<HouseRecord> load_houses(const std::string& path);

/// Writes records back in the same layout with round-trip precision.
void save_houses(const std::string& path, const std::vector<HouseRecord>& houses);

/// POI-type name -> union geometry, one multi-part polygon per type. Features
/// must be Polygon/MultiPolygon and carry a `poi_type` property.
std::map<std::string, geom::Geometry> load_poi_geojson(const std::string& path);

/// One polyline geometry per LineString/MultiLineString feature.
std::vector<geom::Geometry> load_road_geojson(const std::string& path);

void save_poi_geojson(const std::string& path,
                      const std::vector<std::string>& poi_types,
                      const std::vector<geom::Geometry>& geoms);
void save_road_geojson(const std::string& path, const std::vector<geom::Geometry>& roads);

}  // namespace ammasi::data
