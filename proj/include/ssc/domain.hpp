#pragma once

// Core data types: adoption events, timelines, communities and the
// (prior, new) cohorts each ordered year pair induces.

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ssc/error.hpp"
#include "ssc/geometry.hpp"

namespace ssc {

// One installation as first observed in a snapshot.
struct PVInstallation {
  std::string id;
  Point location;
  int year = 0;
  double panel_area = 0.0;  // m^2
};

class Timeline {
 public:
  explicit Timeline(std::vector<int> years) : years_(std::move(years)) {
    if (years_.size() < 2) throw DataError("timeline needs at least two years");
    for (std::size_t i = 1; i < years_.size(); ++i) {
      if (years_[i] <= years_[i - 1]) throw DataError("timeline years must be strictly increasing");
    }
  }

  // Snapshot years of the aerial survey.
  static Timeline standard() { return Timeline({2012, 2015, 2016, 2017, 2020, 2021, 2022}); }

  std::span<const int> years() const noexcept { return years_; }
  std::size_t size() const noexcept { return years_.size(); }
  int first() const noexcept { return years_.front(); }
  int last() const noexcept { return years_.back(); }
  int span_years() const noexcept { return years_.back() - years_.front(); }
  bool contains(int year) const noexcept { return std::binary_search(years_.begin(), years_.end(), year); }

 private:
  std::vector<int> years_;
};

inline bool canonical_less(const PVInstallation& a, const PVInstallation& b) {
  return std::tie(a.year, a.location.x, a.location.y, a.panel_area, a.id) <
         std::tie(b.year, b.location.x, b.location.y, b.panel_area, b.id);
}

// A bounded community polygon with its derived geometry and events. Events
// are kept in canonical order (year, x, y, area, id) so every downstream
// estimate is independent of input order.
class Community {
 public:
  Community(std::string id, Polygon polygon, std::vector<PVInstallation> events)
      : id_(std::move(id)), polygon_(std::move(polygon)), events_(std::move(events)) {
    require_simple_polygon(polygon_);
    geometry_ = summarize(polygon_);
    std::stable_sort(events_.begin(), events_.end(), canonical_less);
  }

  const std::string& id() const noexcept { return id_; }
  const Polygon& polygon() const noexcept { return polygon_; }
  const GeometrySummary& geometry() const noexcept { return geometry_; }
  std::span<const PVInstallation> events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  double built_area() const noexcept { return geometry_.area; }
  double r_max() const noexcept { return geometry_.r_max; }
  double r_eff() const noexcept { return geometry_.r_eff; }

 private:
  std::string id_;
  Polygon polygon_;
  GeometrySummary geometry_;
  std::vector<PVInstallation> events_;
};

// Events installed by year t (prior) and events first observed at year
// t_prime (added). Indices refer to the owning community's event list; the
// prior locations are also copied out so simulated cohorts can share the
// same shape.
struct CohortPair {
  int t = 0;
  int t_prime = 0;
  std::vector<std::size_t> prior_index;
  std::vector<Point> prior;
  std::vector<Point> added;

  int lag() const noexcept { return t_prime - t; }
};

inline std::vector<CohortPair> build_cohorts(const Community& community, const Timeline& timeline) {
  std::vector<CohortPair> out;
  const auto years = timeline.years();
  const auto events = community.events();
  for (std::size_t a = 0; a < years.size(); ++a) {
    for (std::size_t b = a + 1; b < years.size(); ++b) {
      CohortPair pair;
      pair.t = years[a];
      pair.t_prime = years[b];
      for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].year <= pair.t) {
          pair.prior_index.push_back(i);
          pair.prior.push_back(events[i].location);
        } else if (events[i].year == pair.t_prime) {
          pair.added.push_back(events[i].location);
        }
      }
      out.push_back(std::move(pair));
    }
  }
  return out;
}

enum class ViolationKind {
  malformed_polygon,
  outside_polygon,
  unknown_year,
  nonpositive_panel_area,
  too_few_events,
};

inline const char* to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::malformed_polygon: return "malformed_polygon";
    case ViolationKind::outside_polygon: return "outside_polygon";
    case ViolationKind::unknown_year: return "unknown_year";
    case ViolationKind::nonpositive_panel_area: return "nonpositive_panel_area";
    case ViolationKind::too_few_events: return "too_few_events";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string community_id;
  std::string event_id;  // empty for community-level violations
  std::string detail;
};

struct CommunityStatus {
  std::string community_id;
  std::size_t valid_events = 0;
  bool malformed = false;
  bool excluded = false;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<CommunityStatus> communities;

  bool has_hard_errors() const noexcept {
    return std::any_of(communities.begin(), communities.end(), [](const auto& c) { return c.malformed; });
  }
  bool is_excluded(const std::string& id) const noexcept {
    return std::any_of(communities.begin(), communities.end(),
                       [&](const auto& c) { return c.community_id == id && c.excluded; });
  }
  std::size_t included_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(communities.begin(), communities.end(), [](const auto& c) { return !c.excluded; }));
  }
};

inline constexpr std::size_t kMinEvents = 50;

// Raw community as read from input, before its polygon has been checked.
struct CommunityInput {
  std::string id;
  Polygon polygon;
  std::vector<PVInstallation> events;
};

inline bool event_is_valid(const Polygon& poly, const PVInstallation& e, const Timeline& timeline) {
  return e.panel_area > 0.0 && timeline.contains(e.year) && point_in_polygon(poly, e.location);
}

// Per-community checks. Communities below the event threshold and those with
// malformed polygons are flagged excluded; malformed polygons are also hard
// errors. Nothing is removed from the input.
inline ValidationReport validate_dataset(std::span<const CommunityInput> communities, const Timeline& timeline,
                                         std::size_t min_events = kMinEvents) {
  ValidationReport report;
  for (const auto& c : communities) {
    CommunityStatus status{c.id};
    if (auto defect = polygon_defect(c.polygon)) {
      status.malformed = true;
      status.excluded = true;
      report.violations.push_back({ViolationKind::malformed_polygon, c.id, "", *defect});
      report.communities.push_back(status);
      continue;
    }
    for (const auto& e : c.events) {
      bool ok = true;
      if (!(e.panel_area > 0.0)) {
        report.violations.push_back({ViolationKind::nonpositive_panel_area, c.id, e.id,
                                     "panel_area " + std::to_string(e.panel_area)});
        ok = false;
      }
      if (!timeline.contains(e.year)) {
        report.violations.push_back(
            {ViolationKind::unknown_year, c.id, e.id, "year " + std::to_string(e.year) + " not in timeline"});
        ok = false;
      }
      if (!point_in_polygon(c.polygon, e.location)) {
        report.violations.push_back({ViolationKind::outside_polygon, c.id, e.id, "location outside polygon"});
        ok = false;
      }
      if (ok) ++status.valid_events;
    }
    if (status.valid_events < min_events) {
      status.excluded = true;
      report.violations.push_back({ViolationKind::too_few_events, c.id, "",
                                   std::to_string(status.valid_events) + " valid events, minimum " +
                                       std::to_string(min_events)});
    }
    report.communities.push_back(status);
  }
  return report;
}

// Builds the analysable communities: drops invalid events and skips every
// community the report marks excluded.
inline std::vector<Community> included_communities(std::span<const CommunityInput> inputs,
                                                   const ValidationReport& report, const Timeline& timeline) {
  std::vector<Community> out;
  for (const auto& c : inputs) {
    if (report.is_excluded(c.id)) continue;
    std::vector<PVInstallation> kept;
    for (const auto& e : c.events) {
      if (event_is_valid(c.polygon, e, timeline)) kept.push_back(e);
    }
    out.emplace_back(c.id, c.polygon, std::move(kept));
  }
  return out;
}

}  // namespace ssc
