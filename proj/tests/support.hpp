#pragma once

// Helpers shared by the test suites: random fixtures and small independent
// reference implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "ssc/ssc.hpp"

namespace ssc::fx {

inline Polygon star(std::uint64_t seed, double area = 1e5, int sides = 12) {
  CounterRng rng(derive_key({seed, 0x57a5}));
  return random_star_polygon({0.0, 0.0}, area, sides, rng);
}

inline std::vector<Point> uniform_points(const Polygon& poly, std::size_t n, std::uint64_t seed) {
  CounterRng rng(derive_key({seed, 0x9017}));
  std::vector<Point> out;
  PolygonSampler(poly).fill(n, rng, out);
  return out;
}

inline PVInstallation event(std::string id, double x, double y, int year, double area = 5.0) {
  return PVInstallation{std::move(id), {x, y}, year, area};
}

// Community of n CSTR events spread over the standard years.
inline Community random_community(std::uint64_t seed, std::size_t n, double area = 1e5, int sides = 12) {
  SynthConfig cfg;
  cfg.id = "R" + std::to_string(seed);
  cfg.polygon = star(seed, area, sides);
  cfg.counts = split_counts(n, Timeline::standard());
  cfg.seed = seed;
  return gen_cstr(cfg);
}

// Cross-type K by definition: sum of w_i(d) over prior-new pairs within r,
// times |W| / (n1 n2). Plain loops, no bucketing.
template <class Weight>
std::vector<double> naive_cross_k(const std::vector<Point>& prior, const std::vector<Point>& added, double area,
                                  const std::vector<double>& radii, Weight w) {
  std::vector<double> out(radii.size(), 0.0);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < prior.size(); ++i) {
      for (const auto& q : added) {
        const double dx = prior[i].x - q.x, dy = prior[i].y - q.y;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d <= radii[k]) s += w(i, d);
      }
    }
    out[k] = s * (area / (static_cast<double>(prior.size()) * static_cast<double>(added.size())));
  }
  return out;
}

inline std::vector<double> naive_cross_k(const std::vector<Point>& prior, const std::vector<Point>& added, double area,
                                         const std::vector<double>& radii) {
  return naive_cross_k(prior, added, area, radii, [](std::size_t, double) { return 1.0; });
}

// Trapezoid integral on an arbitrary abscissa.
inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

inline LCurve curve_on(const DistanceGrid& grid, std::vector<double> values) {
  LCurve c;
  c.grid = grid;
  c.values = std::move(values);
  return c;
}

inline Envelope envelope_on(const DistanceGrid& grid, std::vector<double> lower, std::vector<double> upper) {
  Envelope e;
  e.grid = grid;
  e.lower = std::move(lower);
  e.upper = std::move(upper);
  e.kind = EnvelopeKind::global;
  return e;
}

}  // namespace ssc::fx
