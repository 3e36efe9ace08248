#pragma once

// Planar polygon geometry for bounded community windows: area and shape
// summaries, the community analysis distance, point-in-polygon, and the
// isotropic edge-correction weights used by the K-function estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssc/error.hpp"

namespace ssc {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double squared_distance(Point a, Point b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Every estimator computes distances through this one expression so that
// the accelerated paths and the brute-force oracles agree bit for bit.
inline double distance(Point a, Point b) noexcept { return std::sqrt(squared_distance(a, b)); }

inline double cross(Point o, Point a, Point b) noexcept {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Simple polygon given by its vertex ring. The ring is open: the closing
// vertex is not repeated.
struct Polygon {
  std::vector<Point> vertices;

  std::size_t size() const noexcept { return vertices.size(); }
  Point operator[](std::size_t i) const noexcept { return vertices[i]; }
  Point next(std::size_t i) const noexcept { return vertices[(i + 1) % vertices.size()]; }
};

// Drops a repeated closing vertex, as found in GeoJSON rings.
inline Polygon make_polygon(std::vector<Point> ring) {
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  return Polygon{std::move(ring)};
}

struct BoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const noexcept { return max_x - min_x; }
  double height() const noexcept { return max_y - min_y; }
};

inline BoundingBox bounding_box(const Polygon& poly) noexcept {
  BoundingBox box{poly[0].x, poly[0].y, poly[0].x, poly[0].y};
  for (const auto& p : poly.vertices) {
    box.min_x = std::min(box.min_x, p.x);
    box.min_y = std::min(box.min_y, p.y);
    box.max_x = std::max(box.max_x, p.x);
    box.max_y = std::max(box.max_y, p.y);
  }
  return box;
}

// Shoelace formula; positive for counter-clockwise rings.
inline double signed_area(const Polygon& poly) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point a = poly[i];
    const Point b = poly.next(i);
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

inline double polygon_area(const Polygon& poly) noexcept { return std::abs(signed_area(poly)); }

namespace detail {

inline int orientation(Point a, Point b, Point c) noexcept {
  const double v = cross(a, b, c);
  return (v > 0.0) - (v < 0.0);
}

inline bool on_segment_collinear(Point a, Point b, Point p) noexcept {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2) noexcept {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment_collinear(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment_collinear(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment_collinear(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment_collinear(q1, q2, p2)) return true;
  return false;
}

}  // namespace detail

// Returns a description of the first defect found, or nothing for a valid
// simple polygon with positive area.
inline std::optional<std::string> polygon_defect(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return "polygon has fewer than 3 vertices";
  for (const auto& p : poly.vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return "polygon has a non-finite coordinate";
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (poly[i] == poly.next(i)) return "polygon has repeated consecutive vertex " + std::to_string(i);
  }
  if (!(polygon_area(poly) > 0.0)) return "polygon has zero area";
  for (std::size_t i = 0; i < n; ++i) {
    const Point a1 = poly[i];
    const Point a2 = poly.next(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point b1 = poly[j];
      const Point b2 = poly.next(j);
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // Adjacent edges share one vertex; they must not fold back onto each other.
        const Point shared = (j == i + 1) ? a2 : a1;
        const Point other_a = (j == i + 1) ? a1 : a2;
        const Point other_b = (j == i + 1) ? b2 : b1;
        if (detail::orientation(other_a, shared, other_b) == 0) {
          const double dot = (other_a.x - shared.x) * (other_b.x - shared.x) +
                             (other_a.y - shared.y) * (other_b.y - shared.y);
          if (dot > 0.0) {
            return "polygon edges " + std::to_string(i) + " and " + std::to_string(j) + " overlap";
          }
        }
        continue;
      }
      if (detail::segments_intersect(a1, a2, b1, b2)) {
        return "polygon edges " + std::to_string(i) + " and " + std::to_string(j) + " intersect";
      }
    }
  }
  return std::nullopt;
}

inline void require_simple_polygon(const Polygon& poly) {
  if (auto defect = polygon_defect(poly)) throw GeometryError(*defect);
}

// Ray-casting parity test. Points on the boundary count as inside.
inline bool point_in_polygon(const Polygon& poly, Point p) noexcept {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly[i];
    const Point b = poly.next(i);
    const double c = cross(a, b, p);
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double tol = 1e-12 * (std::abs(ex) + std::abs(ey)) *
                       (std::abs(p.x - a.x) + std::abs(p.y - a.y) + std::abs(ex) + std::abs(ey));
    if (std::abs(c) <= tol && detail::on_segment_collinear(a, b, p)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * ex / ey;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

struct GeometrySummary {
  double area = 0.0;
  double bbox_aspect = 1.0;
  double max_chord = 0.0;
  double r_c = 0.0;    // sqrt(area / pi)
  double r_max = 0.0;  // community analysis distance
  double r_eff = 0.0;  // 0.9 * r_max, the distance actually analysed
};

inline constexpr double kCompactAspect = 1.5;
inline constexpr double kChordFraction = 0.8;
inline constexpr double kEffectiveFraction = 0.9;

// Area, bounding-box aspect and maximum vertex-to-vertex chord. r_max and
// r_eff are left at zero; see compute_r_max.
inline GeometrySummary polygon_metrics(const Polygon& poly) {
  if (poly.size() < 3) throw GeometryError("polygon has fewer than 3 vertices");
  GeometrySummary s;
  s.area = polygon_area(poly);
  if (!(s.area > 0.0)) throw GeometryError("polygon has zero area");
  const auto box = bounding_box(poly);
  const double lo = std::min(box.width(), box.height());
  const double hi = std::max(box.width(), box.height());
  s.bbox_aspect = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  double best = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    for (std::size_t j = i + 1; j < poly.size(); ++j) {
      best = std::max(best, squared_distance(poly[i], poly[j]));
    }
  }
  s.max_chord = std::sqrt(best);
  s.r_c = std::sqrt(s.area / std::numbers::pi);
  return s;
}

// Compact polygons use the area radius; elongated ones are additionally
// capped by 0.8 of the maximum chord.
inline double compute_r_max(const GeometrySummary& s) noexcept {
  if (s.bbox_aspect <= kCompactAspect) return s.r_c;
  return std::min(s.r_c, kChordFraction * s.max_chord);
}

inline GeometrySummary summarize(const Polygon& poly) {
  auto s = polygon_metrics(poly);
  s.r_max = compute_r_max(s);
  s.r_eff = kEffectiveFraction * s.r_max;
  return s;
}

struct EdgeWeightOptions {
  int angular_samples = 720;
  double max_weight = 10.0;
};

namespace detail {

// Sample angles sit at half-step offsets so that no sample direction is
// axis-aligned.
inline double sample_angle(int k, int samples) noexcept {
  return (static_cast<double>(k) + 0.5) * (2.0 * std::numbers::pi / samples);
}

inline double weight_from_inside(int inside, const EdgeWeightOptions& opt) noexcept {
  if (inside <= 0) return opt.max_weight;
  return std::min(opt.max_weight, static_cast<double>(opt.angular_samples) / inside);
}

}  // namespace detail

// Isotropic edge-correction weight: 1/f, where f is the fraction of the
// circle of the given radius around `center` that lies inside the polygon,
// estimated on a fixed set of sample directions. Capped at max_weight.
inline double edge_weight(const Polygon& poly, Point center, double radius,
                          const EdgeWeightOptions& opt = {}) {
  if (!point_in_polygon(poly, center)) throw GeometryError("edge_weight: center lies outside the polygon");
  if (!(radius > 0.0)) return 1.0;
  int inside = 0;
  for (int k = 0; k < opt.angular_samples; ++k) {
    const double a = detail::sample_angle(k, opt.angular_samples);
    const Point q{center.x + radius * std::cos(a), center.y + radius * std::sin(a)};
    inside += point_in_polygon(poly, q) ? 1 : 0;
  }
  return detail::weight_from_inside(inside, opt);
}

// Edge weight of one center as a step function of the radius, valid up to
// `max_radius`. Built once per event from ray/boundary crossings along each
// sample direction, then queried in O(1) amortized time. Agrees with
// edge_weight up to sample directions that graze a vertex.
class EdgeProfile {
 public:
  EdgeProfile() = default;

  static EdgeProfile build(const Polygon& poly, Point center, double max_radius,
                           const EdgeWeightOptions& opt = {}) {
    EdgeProfile prof;
    prof.max_radius_ = max_radius;
    std::vector<std::pair<double, int>> events;
    std::vector<double> hits;
    const std::size_t n = poly.size();
    for (int k = 0; k < opt.angular_samples; ++k) {
      const double a = detail::sample_angle(k, opt.angular_samples);
      const double ux = std::cos(a);
      const double uy = std::sin(a);
      hits.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const Point p = poly[i];
        const Point q = poly.next(i);
        const double ex = q.x - p.x;
        const double ey = q.y - p.y;
        const double denom = ux * ey - uy * ex;
        if (denom == 0.0) continue;
        const double wx = p.x - center.x;
        const double wy = p.y - center.y;
        const double s = (wx * ey - wy * ex) / denom;
        const double t = (wx * uy - wy * ux) / denom;
        if (s > 0.0 && t >= 0.0 && t < 1.0) hits.push_back(s);
      }
      std::sort(hits.begin(), hits.end());
      for (std::size_t h = 0; h < hits.size(); ++h) {
        if (hits[h] > max_radius) break;
        // Odd crossings leave the polygon, even crossings re-enter.
        events.emplace_back(hits[h], (h % 2 == 0) ? -1 : +1);
      }
    }
    std::sort(events.begin(), events.end());
    int inside = opt.angular_samples;
    prof.weights_.push_back(detail::weight_from_inside(inside, opt));
    for (const auto& [s, delta] : events) {
      inside += delta;
      if (!prof.radii_.empty() && prof.radii_.back() == s) {
        prof.weights_.back() = detail::weight_from_inside(inside, opt);
      } else {
        prof.radii_.push_back(s);
        prof.weights_.push_back(detail::weight_from_inside(inside, opt));
      }
    }
    prof.build_buckets();
    return prof;
  }

  double weight(double radius) const noexcept {
    if (nodes_.empty()) return 1.0;
    // Buckets rarely hold more than three breakpoints, so four compares
    // settle almost every lookup without a data dependent branch. Sentinel
    // nodes at +inf pad the tail.
    const Node* n = nodes_.data() + bucket_start_[bucket_of(radius)];
    const std::size_t below = static_cast<std::size_t>(n[0].r < radius) + (n[1].r < radius) +
                              (n[2].r < radius) + (n[3].r < radius);
    n += below;
    while (n->r < radius) ++n;
    return n->w;
  }

  double max_radius() const noexcept { return max_radius_; }
  std::size_t breakpoints() const noexcept { return nodes_.empty() ? 0 : nodes_.size() - 4; }

 private:
  std::size_t bucket_of(double radius) const noexcept {
    const auto b = static_cast<std::size_t>(std::max(0.0, radius * inv_bucket_width_));
    return std::min(b, bucket_start_.size() - 1);
  }

  void build_buckets() {
    nodes_.clear();
    for (std::size_t i = 0; i < radii_.size(); ++i) nodes_.push_back({radii_[i], weights_[i]});
    for (int i = 0; i < 4; ++i) nodes_.push_back({std::numeric_limits<double>::infinity(), weights_.back()});
    if (radii_.empty()) {
      bucket_start_.assign(1, 0);
      inv_bucket_width_ = 0.0;
      return;
    }
    // About two buckets per breakpoint keeps the scan in weight() short.
    const std::size_t kBuckets = std::max<std::size_t>(128, 2 * radii_.size());
    const double span = std::max(max_radius_, radii_.back());
    inv_bucket_width_ = span > 0.0 ? kBuckets / span : 0.0;
    bucket_start_.assign(kBuckets, 0);
    // Starts are taken slightly below each bucket edge so that rounding in
    // radius * inv_bucket_width_ never lands past the right node.
    const double slack = span / kBuckets * 1e-6;
    std::size_t idx = 0;
    for (std::size_t b = 0; b < kBuckets; ++b) {
      const double lo = static_cast<double>(b) / inv_bucket_width_ - slack;
      while (idx < radii_.size() && radii_[idx] < lo) ++idx;
      bucket_start_[b] = static_cast<std::uint32_t>(idx);
    }
    radii_.clear();
    radii_.shrink_to_fit();
    weights_.clear();
    weights_.shrink_to_fit();
  }

  struct Node {
    double r;
    double w;  // weight for radii in (previous r, r]
  };

  std::vector<Node> nodes_;
  std::vector<double> radii_;    // build scratch
  std::vector<double> weights_;  // weights_[i]: weight when exactly i breakpoints lie below r
  std::vector<std::uint32_t> bucket_start_;
  double inv_bucket_width_ = 0.0;
  double max_radius_ = 0.0;
};

}  // namespace ssc
