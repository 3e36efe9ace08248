#pragma once

// GeoJSON ingestion and output, and the CSV writer used for every table.
//
// Polygons: a FeatureCollection of Polygon features (outer ring only) with a
// `community_id` property. Events: a FeatureCollection of Point features with
// `community_id`, `year` (integer) and `panel_area` properties, and an
// optional `id`. Coordinates are projected meters.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssc/domain.hpp"
#include "ssc/error.hpp"
#include "ssc/geometry.hpp"

namespace ssc {

// Input that does not follow the file schema. The message names the file and
// the offending feature.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct OrphanEvent {
  std::size_t feature_index = 0;
  std::string event_id;
  std::string community_id;
};

struct Dataset {
  std::vector<CommunityInput> communities;
  std::vector<OrphanEvent> orphans;
};

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

inline const nlohmann::json& features_of(const nlohmann::json& doc, const std::string& where) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection") {
    throw SchemaError(where + ": top level must be a FeatureCollection");
  }
  auto it = doc.find("features");
  if (it == doc.end() || !it->is_array()) throw SchemaError(where + ": missing 'features' array");
  return *it;
}

inline std::string feature_where(const std::string& where, std::size_t i) {
  return where + ": feature " + std::to_string(i);
}

inline std::string id_property(const nlohmann::json& props, const char* key, const std::string& where) {
  auto it = props.find(key);
  if (it == props.end() || it->is_null()) throw SchemaError(where + ": missing property '" + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw SchemaError(where + ": property '" + key + "' must be a string or integer");
}

inline Point read_position(const nlohmann::json& pos, const std::string& where) {
  if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
    throw SchemaError(where + ": coordinate must be [x, y]");
  }
  return {pos[0].get<double>(), pos[1].get<double>()};
}

inline const nlohmann::json& geometry_of(const nlohmann::json& f, const char* type, const std::string& where) {
  if (!f.is_object() || f.value("type", "") != "Feature") throw SchemaError(where + ": not a Feature");
  auto g = f.find("geometry");
  if (g == f.end() || !g->is_object()) throw SchemaError(where + ": missing geometry");
  if (g->value("type", "") != type) throw SchemaError(where + ": geometry type must be " + type);
  auto c = g->find("coordinates");
  if (c == g->end()) throw SchemaError(where + ": missing coordinates");
  return *c;
}

inline const nlohmann::json& properties_of(const nlohmann::json& f, const std::string& where) {
  auto p = f.find("properties");
  if (p == f.end() || !p->is_object()) throw SchemaError(where + ": missing properties");
  return *p;
}

}  // namespace detail

inline std::vector<CommunityInput> parse_polygons(const nlohmann::json& doc, const std::string& where = "polygons") {
  const auto& features = detail::features_of(doc, where);
  std::vector<CommunityInput> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto w = detail::feature_where(where, i);
    const auto& coords = detail::geometry_of(features[i], "Polygon", w);
    const auto id = detail::id_property(detail::properties_of(features[i], w), "community_id", w);
    if (!seen.insert(id).second) throw SchemaError(w + ": duplicate community_id '" + id + "'");
    if (!coords.is_array() || coords.empty() || !coords[0].is_array()) {
      throw SchemaError(w + ": Polygon coordinates must be an array of rings");
    }
    std::vector<Point> ring;
    for (const auto& pos : coords[0]) ring.push_back(detail::read_position(pos, w));
    out.push_back({id, make_polygon(std::move(ring)), {}});
  }
  return out;
}

// Joins events to communities by id. Events naming an unknown community are
// returned as orphans and left out.
inline Dataset parse_dataset(const nlohmann::json& polygons, const nlohmann::json& events,
                             const std::string& polygons_where = "polygons",
                             const std::string& events_where = "events") {
  Dataset ds;
  ds.communities = parse_polygons(polygons, polygons_where);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.communities.size(); ++i) index.emplace(ds.communities[i].id, i);

  const auto& features = detail::features_of(events, events_where);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto w = detail::feature_where(events_where, i);
    const auto& coords = detail::geometry_of(features[i], "Point", w);
    const auto& props = detail::properties_of(features[i], w);
    PVInstallation e;
    e.location = detail::read_position(coords, w);
    const auto cid = detail::id_property(props, "community_id", w);
    auto year = props.find("year");
    if (year == props.end() || !year->is_number_integer()) throw SchemaError(w + ": 'year' must be an integer");
    e.year = year->get<int>();
    auto area = props.find("panel_area");
    if (area == props.end() || !area->is_number()) throw SchemaError(w + ": 'panel_area' must be a number");
    e.panel_area = area->get<double>();
    auto id = props.find("id");
    e.id = (id != props.end() && !id->is_null()) ? detail::id_property(props, "id", w) : "#" + std::to_string(i);
    auto it = index.find(cid);
    if (it == index.end()) {
      ds.orphans.push_back({i, e.id, cid});
      continue;
    }
    ds.communities[it->second].events.push_back(std::move(e));
  }
  return ds;
}

inline Dataset read_dataset(const std::filesystem::path& polygons, const std::filesystem::path& events) {
  return parse_dataset(detail::read_json_file(polygons), detail::read_json_file(events), polygons.string(),
                       events.string());
}

inline nlohmann::json polygons_geojson(std::span<const CommunityInput> communities) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& c : communities) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& p : c.polygon.vertices) ring.push_back({p.x, p.y});
    if (!c.polygon.vertices.empty()) ring.push_back({c.polygon.vertices[0].x, c.polygon.vertices[0].y});
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}},
                        {"properties", {{"community_id", c.id}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

inline nlohmann::json events_geojson(std::span<const CommunityInput> communities) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& c : communities) {
    for (const auto& e : c.events) {
      features.push_back(
          {{"type", "Feature"},
           {"geometry", {{"type", "Point"}, {"coordinates", {e.location.x, e.location.y}}}},
           {"properties", {{"id", e.id}, {"community_id", c.id}, {"year", e.year}, {"panel_area", e.panel_area}}}});
    }
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

inline CommunityInput to_input(const Community& c) {
  return {c.id(), c.polygon(), std::vector<PVInstallation>(c.events().begin(), c.events().end())};
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(1) + "\n"); }

// ---------------------------------------------------------------------------
// CSV

// Shortest form is not used on purpose: 17 significant digits always round
// trip and keep the output format fixed.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// One CSV table in memory. The first line names the manifest hash of the
// run that produced it; missing values are empty fields.
class CsvTable {
 public:
  CsvTable(std::string manifest_hash, std::vector<std::string> header)
      : hash_(std::move(manifest_hash)), width_(header.size()) {
    out_ << "# manifest " << hash_ << "\n";
    row_begin();
    for (const auto& h : header) field(h);
    row_end();
  }

  CsvTable& field(std::string_view s) {
    if (col_++ > 0) out_ << ',';
    out_ << csv_escape(s);
    return *this;
  }
  CsvTable& field(const std::string& s) { return field(std::string_view(s)); }
  CsvTable& field(const char* s) { return field(std::string_view(s)); }
  CsvTable& field(double v) { return field(format_double(v)); }
  CsvTable& field(std::optional<double> v) { return v ? field(*v) : field(std::string_view{}); }
  CsvTable& field(int v) { return field(std::to_string(v)); }
  CsvTable& field(long v) { return field(std::to_string(v)); }
  CsvTable& field(std::size_t v) { return field(std::to_string(v)); }
  CsvTable& field(bool v) { return field(v ? std::string_view("true") : std::string_view("false")); }

  template <class... Ts>
  void row(const Ts&... values) {
    row_begin();
    (field(values), ...);
    row_end();
  }

  void row_begin() { col_ = 0; }
  void row_end() {
    if (col_ != width_) throw Error("CSV row has " + std::to_string(col_) + " fields, header has " + std::to_string(width_));
    out_ << '\n';
    ++rows_;
  }

  std::size_t rows() const noexcept { return rows_ - 1; }
  std::string str() const { return out_.str(); }
  void save(const std::filesystem::path& path) const { write_text(path, out_.str()); }

 private:
  std::string hash_;
  std::size_t width_;
  std::size_t col_ = 0;
  std::size_t rows_ = 0;
  std::ostringstream out_;
};

}  // namespace ssc
