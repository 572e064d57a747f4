#include "ammasi/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ammasi/errors.hpp"
#include "ammasi/format.hpp"
#include "json.hpp"

namespace ammasi::data {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& col) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw DataError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                    "' in column " + col);
  }
  while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\r')) ++used;
  if (used != cell.size())
    throw DataError("row " + std::to_string(row) + ": non-numeric value '" + cell +
                    "' in column " + col);
  return v;
}

json load_feature_collection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open GeoJSON file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw DataError(path + " is not a GeoJSON FeatureCollection");
  return doc;
}

std::string feature_id(const json& feature, std::size_t index) {
  if (feature.contains("id")) return feature["id"].dump();
  if (feature.contains("properties") && feature["properties"].contains("id"))
    return feature["properties"]["id"].dump();
  return "#" + std::to_string(index);
}

std::vector<geom::GeoPoint> parse_ring(const json& coords) {
  std::vector<geom::GeoPoint> ring;
  for (const auto& pt : coords)
    ring.push_back(geom::GeoPoint{pt.at(0).get<double>(), pt.at(1).get<double>()});
  // GeoJSON rings repeat the first vertex; Geometry closes implicitly.
  if (ring.size() >= 2 && ring.front().lon == ring.back().lon &&
      ring.front().lat == ring.back().lat)
    ring.pop_back();
  return ring;
}

}  // namespace

std::vector<HouseRecord> load_houses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open houses CSV: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  const char* expect[] = {"id", "lon", "lat", "price"};
  if (header.size() < 4)
    throw DataError(path + ": header must start with id,lon,lat,price");
  for (std::size_t i = 0; i < 4; ++i)
    if (header[i] != expect[i])
      throw DataError(path + ": missing column '" + expect[i] + "' (found '" +
                      header[i] + "')");
  const std::size_t n_attrs = header.size() - 4;

  std::vector<HouseRecord> houses;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    HouseRecord rec;
    rec.id = cells[0];
    rec.lon = parse_number(cells[1], row, "lon");
    rec.lat = parse_number(cells[2], row, "lat");
    rec.price = parse_number(cells[3], row, "price");
    if (!(rec.price > 0.0))
      throw DataError("row " + std::to_string(row) + ": price must be positive, got " +
                      cells[3]);
    rec.attrs.reserve(n_attrs);
    for (std::size_t j = 0; j < n_attrs; ++j)
      rec.attrs.push_back(parse_number(cells[4 + j], row, header[4 + j]));
    houses.push_back(std::move(rec));
  }
  return houses;
}

void save_houses(const std::string& path, const std::vector<HouseRecord>& houses) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write houses CSV: " + path);
  const std::size_t n_attrs = houses.empty() ? 0 : houses[0].attrs.size();
  out << "id,lon,lat,price";
  for (std::size_t j = 0; j < n_attrs; ++j) out << ",attr_" << (j + 1);
  out << "\n";
  for (const auto& h : houses) {
    out << h.id << ',' << fmt_g17(h.lon) << ',' << fmt_g17(h.lat) << ','
        << fmt_g17(h.price);
    for (double a : h.attrs) out << ',' << fmt_g17(a);
    out << "\n";
  }
}

std::map<std::string, geom::Geometry> load_poi_geojson(const std::string& path) {
  const json doc = load_feature_collection(path);
  std::map<std::string, geom::Geometry> by_type;
  std::vector<std::string> offenders;

  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    const json& g = feature.at("geometry");
    const std::string kind = g.value("type", "");
    if (kind != "Polygon" && kind != "MultiPolygon") {
      offenders.push_back(feature_id(feature, index));
      ++index;
      continue;
    }
    if (!feature.contains("properties") || !feature["properties"].contains("poi_type"))
      throw DataError(path + ": feature " + feature_id(feature, index) +
                      " lacks a poi_type property");
    const std::string type = feature["properties"]["poi_type"].get<std::string>();
    geom::Geometry& geo = by_type[type];
    geo.kind = geom::GeomKind::kMulti;
    if (kind == "Polygon") {
      // Exterior ring only; holes are out of scope for proximity features.
      geo.parts.push_back(parse_ring(g.at("coordinates").at(0)));
    } else {
      for (const auto& poly : g.at("coordinates"))
        geo.parts.push_back(parse_ring(poly.at(0)));
    }
    ++index;
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& id : offenders) list += (list.empty() ? "" : ", ") + id;
    throw DataError(path + ": expected polygon geometries; offending features: " + list);
  }
  return by_type;
}

std::vector<geom::Geometry> load_road_geojson(const std::string& path) {
  const json doc = load_feature_collection(path);
  std::vector<geom::Geometry> roads;
  std::vector<std::string> offenders;

  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    const json& g = feature.at("geometry");
    const std::string kind = g.value("type", "");
    geom::Geometry road;
    road.kind = geom::GeomKind::kPolyline;
    if (kind == "LineString") {
      road.parts.push_back(parse_ring(g.at("coordinates")));
    } else if (kind == "MultiLineString") {
      for (const auto& part : g.at("coordinates")) road.parts.push_back(parse_ring(part));
    } else {
      offenders.push_back(feature_id(feature, index));
      ++index;
      continue;
    }
    roads.push_back(std::move(road));
    ++index;
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& id : offenders) list += (list.empty() ? "" : ", ") + id;
    throw DataError(path + ": expected line geometries; offending features: " + list);
  }
  return roads;
}

namespace {

json ring_to_json(const std::vector<geom::GeoPoint>& ring, bool close) {
  json arr = json::array();
  for (const auto& p : ring) arr.push_back(json::array({p.lon, p.lat}));
  if (close && !ring.empty()) arr.push_back(json::array({ring[0].lon, ring[0].lat}));
  return arr;
}

}  // namespace

void save_poi_geojson(const std::string& path,
                      const std::vector<std::string>& poi_types,
                      const std::vector<geom::Geometry>& geoms) {
  if (poi_types.size() != geoms.size())
    throw DataError("save_poi_geojson: type/geometry count mismatch");
  json features = json::array();
  for (std::size_t t = 0; t < geoms.size(); ++t) {
    json polys = json::array();
    for (const auto& part : geoms[t].parts)
      polys.push_back(json::array({ring_to_json(part, true)}));
    features.push_back({{"type", "Feature"},
                        {"properties", {{"poi_type", poi_types[t]}}},
                        {"geometry", {{"type", "MultiPolygon"}, {"coordinates", polys}}}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write GeoJSON: " + path);
  out << json{{"type", "FeatureCollection"}, {"features", features}}.dump(2) << "\n";
}

void save_road_geojson(const std::string& path, const std::vector<geom::Geometry>& roads) {
  json features = json::array();
  for (const auto& road : roads) {
    json lines = json::array();
    for (const auto& part : road.parts) lines.push_back(ring_to_json(part, false));
    features.push_back(
        {{"type", "Feature"},
         {"properties", json::object()},
         {"geometry", {{"type", "MultiLineString"}, {"coordinates", lines}}}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write GeoJSON: " + path);
  out << json{{"type", "FeatureCollection"}, {"features", features}}.dump(2) << "\n";
}

}  // namespace ammasi::data
