#pragma once

// Synthetic communities with known ground truth: complete spatio-temporal
// randomness, a Thomas-type parent/offspring cluster process, and forward
// time contagion around earlier adopters. Everything is keyed off the
// counter RNG, so a (config, seed) pair always yields the same community.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ssc/domain.hpp"
#include "ssc/error.hpp"
#include "ssc/geometry.hpp"
#include "ssc/null_models.hpp"
#include "ssc/rng.hpp"

namespace ssc {

enum class Process { cstr, thomas, contagion };

inline const char* to_string(Process p) noexcept {
  switch (p) {
    case Process::cstr: return "cstr";
    case Process::thomas: return "thomas";
    case Process::contagion: return "contagion";
  }
  return "cstr";
}

struct PanelMoments {
  double mean = 0.0;
  double sd = 0.0;
};

// Panel surface area (m^2) mean and SD by survey year.
inline std::map<int, PanelMoments> standard_panel_moments() {
  return {{2012, {4.31, 2.55}}, {2015, {4.94, 3.14}}, {2016, {5.26, 3.62}}, {2017, {5.43, 4.11}},
          {2020, {6.16, 4.57}}, {2021, {6.82, 5.16}}, {2022, {8.27, 6.24}}};
}

// Cumulative detected panels by survey year; their increments give the
// default split of a community's events over the timeline.
inline std::map<int, double> standard_cumulative_counts() {
  return {{2012, 4847}, {2015, 8007}, {2016, 9324}, {2017, 13514}, {2020, 18036}, {2021, 20987}, {2022, 25354}};
}

struct SynthConfig {
  std::string id = "synth";
  Process process = Process::cstr;
  Polygon polygon;
  // Events per year. For the Thomas process these are parent counts.
  std::vector<std::pair<int, std::size_t>> counts;
  double sigma = 15.0;           // Thomas offspring displacement scale (m)
  double offspring_mean = 4.0;   // Thomas offspring per parent
  double kernel_range = 20.0;    // contagion displacement scale (m)
  double contagion_p = 0.5;      // probability of copying a prior adopter
  std::map<int, PanelMoments> panel = standard_panel_moments();
  std::uint64_t seed = 0;
};

// Splits `total` events over the years of `timeline` in proportion to the
// yearly increments of the standard cumulative counts (largest remainder).
inline std::vector<std::pair<int, std::size_t>> split_counts(std::size_t total, const Timeline& timeline) {
  const auto cum = standard_cumulative_counts();
  std::vector<double> w;
  double prev = 0.0;
  for (int y : timeline.years()) {
    auto it = cum.upper_bound(y);
    const double c = it == cum.begin() ? 0.0 : std::prev(it)->second;
    w.push_back(std::max(c - prev, 0.0));
    prev = std::max(prev, c);
  }
  double sum = 0.0;
  for (double v : w) sum += v;
  if (!(sum > 0.0)) std::fill(w.begin(), w.end(), 1.0), sum = static_cast<double>(w.size());
  std::vector<std::pair<int, std::size_t>> out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = static_cast<double>(total) * w[i] / sum;
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    out.emplace_back(timeline.years()[i], whole);
    remainders.emplace_back(-(exact - static_cast<double>(whole)), i);
    assigned += whole;
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[remainders[k % remainders.size()].second].second;
  return out;
}

namespace detail {

enum : std::uint64_t { kStreamLocation = 1, kStreamArea = 2, kStreamParent = 3, kStreamOffspring = 4 };

inline CounterRng synth_stream(const SynthConfig& cfg, std::uint64_t stream, int year) {
  return CounterRng(derive_key({cfg.seed, fnv1a64(cfg.id), stream, as_key(year)}));
}

inline double panel_area(const SynthConfig& cfg, int year, CounterRng& rng) {
  if (cfg.panel.empty()) throw DataError("panel-area moments are empty");
  auto it = cfg.panel.upper_bound(year);
  const auto& m = it == cfg.panel.begin() ? it->second : std::prev(it)->second;
  if (!(m.mean > 0.0) || m.sd < 0.0) throw DataError("panel-area moments must have mean > 0 and sd >= 0");
  return m.sd == 0.0 ? m.mean : rng.lognormal_moments(m.mean, m.sd);
}

// Gaussian displacement around `origin`, redrawn until it lands inside. After
// 1000 failed attempts a uniform point is returned instead.
inline Point displaced(const Polygon& poly, const PolygonSampler& sampler, Point origin, double scale,
                       CounterRng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Point p{origin.x + scale * rng.normal(), origin.y + scale * rng.normal()};
    if (point_in_polygon(poly, p)) return p;
  }
  return sampler.draw(rng);
}

inline std::string event_id(const std::string& community, std::size_t k) { return community + "-" + std::to_string(k); }

inline void validate(const SynthConfig& cfg) {
  require_simple_polygon(cfg.polygon);
  for (std::size_t i = 1; i < cfg.counts.size(); ++i) {
    if (cfg.counts[i].first <= cfg.counts[i - 1].first) throw DataError("synthetic count years must increase");
  }
  if (cfg.process == Process::thomas && !(cfg.sigma > 0.0)) throw DataError("Thomas sigma must be positive");
  if (cfg.process == Process::thomas && cfg.offspring_mean < 0.0) throw DataError("offspring mean must be >= 0");
  if (cfg.process == Process::contagion) {
    if (cfg.kernel_range < 0.0) throw DataError("contagion kernel range must be >= 0");
    if (cfg.contagion_p < 0.0 || cfg.contagion_p > 1.0) throw DataError("contagion probability must lie in [0, 1]");
  }
}

}  // namespace detail

// Per-year counts placed uniformly in the polygon.
inline Community gen_cstr(const SynthConfig& cfg) {
  detail::validate(cfg);
  const PolygonSampler sampler(cfg.polygon);
  std::vector<PVInstallation> events;
  for (const auto& [year, n] : cfg.counts) {
    auto loc = detail::synth_stream(cfg, detail::kStreamLocation, year);
    auto area = detail::synth_stream(cfg, detail::kStreamArea, year);
    for (std::size_t i = 0; i < n; ++i) {
      const Point p = sampler.draw(loc);
      events.push_back({detail::event_id(cfg.id, events.size()), p, year, detail::panel_area(cfg, year, area)});
    }
  }
  return Community(cfg.id, cfg.polygon, std::move(events));
}

// Parents uniform in the polygon with the configured per-year counts. Each
// parent gets Poisson(offspring_mean) offspring, Gaussian-displaced by sigma,
// each observed in a year drawn uniformly from the years after its parent's.
// Parents in the last year have no offspring.
inline Community gen_thomas(const SynthConfig& cfg) {
  detail::validate(cfg);
  const PolygonSampler sampler(cfg.polygon);
  std::vector<int> years;
  for (const auto& c : cfg.counts) years.push_back(c.first);
  std::vector<PVInstallation> events;
  for (std::size_t yi = 0; yi < cfg.counts.size(); ++yi) {
    const auto [year, n] = cfg.counts[yi];
    auto loc = detail::synth_stream(cfg, detail::kStreamParent, year);
    auto kids = detail::synth_stream(cfg, detail::kStreamOffspring, year);
    auto area = detail::synth_stream(cfg, detail::kStreamArea, year);
    for (std::size_t i = 0; i < n; ++i) {
      const Point parent = sampler.draw(loc);
      events.push_back({detail::event_id(cfg.id, events.size()), parent, year, detail::panel_area(cfg, year, area)});
      if (yi + 1 >= years.size()) continue;
      const auto n_kids = kids.poisson(cfg.offspring_mean);
      for (std::uint64_t k = 0; k < n_kids; ++k) {
        const int kid_year = years[yi + 1 + kids.below(years.size() - yi - 1)];
        const Point p = detail::displaced(cfg.polygon, sampler, parent, cfg.sigma, kids);
        events.push_back({detail::event_id(cfg.id, events.size()), p, kid_year, detail::panel_area(cfg, kid_year, kids)});
      }
    }
  }
  return Community(cfg.id, cfg.polygon, std::move(events));
}

// Year by year: with probability p a new event is displaced from a uniformly
// chosen adopter of an earlier year, otherwise it is uniform. The first year
// (or any year without earlier adopters) is uniform.
inline Community gen_contagion(const SynthConfig& cfg) {
  detail::validate(cfg);
  const PolygonSampler sampler(cfg.polygon);
  std::vector<PVInstallation> events;
  for (const auto& [year, n] : cfg.counts) {
    const std::size_t n_prior = events.size();
    auto loc = detail::synth_stream(cfg, detail::kStreamLocation, year);
    auto area = detail::synth_stream(cfg, detail::kStreamArea, year);
    for (std::size_t i = 0; i < n; ++i) {
      Point p;
      if (n_prior > 0 && loc.uniform() < cfg.contagion_p) {
        const Point origin = events[loc.below(n_prior)].location;
        p = cfg.kernel_range > 0.0 ? detail::displaced(cfg.polygon, sampler, origin, cfg.kernel_range, loc) : origin;
      } else {
        p = sampler.draw(loc);
      }
      events.push_back({detail::event_id(cfg.id, events.size()), p, year, detail::panel_area(cfg, year, area)});
    }
  }
  return Community(cfg.id, cfg.polygon, std::move(events));
}

inline Community generate(const SynthConfig& cfg) {
  switch (cfg.process) {
    case Process::cstr: return gen_cstr(cfg);
    case Process::thomas: return gen_thomas(cfg);
    case Process::contagion: return gen_contagion(cfg);
  }
  return gen_cstr(cfg);
}

// ---------------------------------------------------------------------------
// Polygons

inline Polygon rectangle(double x0, double y0, double width, double height) {
  return Polygon{{{x0, y0}, {x0 + width, y0}, {x0 + width, y0 + height}, {x0, y0 + height}}};
}

inline Polygon regular_polygon(Point center, double radius, int sides) {
  Polygon poly;
  for (int k = 0; k < sides; ++k) {
    const double a = 2.0 * std::numbers::pi * k / sides;
    poly.vertices.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return poly;
}

// Star-shaped polygon around `center` with jittered angles and radii, scaled
// to exactly `area`. Star-shaped with strictly increasing angles, so simple.
inline Polygon random_star_polygon(Point center, double area, int sides, CounterRng& rng, double roughness = 0.35) {
  if (sides < 3) throw GeometryError("a polygon needs at least three vertices");
  std::vector<double> angles(static_cast<std::size_t>(sides));
  const double slot = 2.0 * std::numbers::pi / sides;
  for (int k = 0; k < sides; ++k) angles[static_cast<std::size_t>(k)] = slot * (k + 0.1 + 0.8 * rng.uniform());
  std::vector<Point> unit;
  for (double a : angles) {
    const double r = 1.0 - roughness + 2.0 * roughness * rng.uniform();
    unit.push_back({r * std::cos(a), r * std::sin(a)});
  }
  const double a0 = polygon_area(Polygon{unit});
  const double s = std::sqrt(area / a0);
  Polygon poly;
  for (const auto& p : unit) poly.vertices.push_back({center.x + s * p.x, center.y + s * p.y});
  return poly;
}

// ---------------------------------------------------------------------------
// Regions

struct RegionConfig {
  std::size_t n_communities = 20;
  std::size_t min_events = 150;
  std::size_t max_events = 400;
  double min_area = 60000.0;   // m^2
  double max_area = 250000.0;  // m^2
  double min_p = 0.0;          // contagion probability range across communities
  double max_p = 0.9;
  double kernel_range = 20.0;
  std::uint64_t seed = 0;
};

// Independent contagion communities laid out on a grid, with sizes, areas and
// contagion strength varying between communities.
inline std::vector<Community> generate_region(const RegionConfig& rc, const Timeline& timeline) {
  if (rc.min_events > rc.max_events || rc.min_area > rc.max_area || rc.min_p > rc.max_p) {
    throw DataError("region ranges must satisfy min <= max");
  }
  std::vector<Community> out;
  out.reserve(rc.n_communities);
  const auto columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(rc.n_communities))));
  const double spacing = 4.0 * std::sqrt(rc.max_area);
  for (std::size_t c = 0; c < rc.n_communities; ++c) {
    CounterRng rng(derive_key({rc.seed, 0x5e610e, c}));
    SynthConfig cfg;
    char buf[16];
    std::snprintf(buf, sizeof buf, "C%04zu", c);
    cfg.id = buf;
    cfg.process = Process::contagion;
    const Point center{spacing * static_cast<double>(c % columns), spacing * static_cast<double>(c / columns)};
    cfg.polygon = random_star_polygon(center, rng.uniform(rc.min_area, rc.max_area), 12, rng);
    const auto n = rc.min_events + rng.below(rc.max_events - rc.min_events + 1);
    cfg.counts = split_counts(n, timeline);
    cfg.contagion_p = rng.uniform(rc.min_p, rc.max_p);
    cfg.kernel_range = rc.kernel_range;
    cfg.seed = rc.seed;
    out.push_back(gen_contagion(cfg));
  }
  return out;
}

}  // namespace ssc
