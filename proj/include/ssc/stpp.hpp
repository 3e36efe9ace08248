#pragma once

// Spatio-temporal and cross-type (prior -> new cohort) Ripley K and L
// estimators with isotropic edge correction.
//
// Each estimator has two paths: a grid-bucketed one used in production and
// an O(n^2) brute-force one kept as the reference oracle. With unit weights
// the two agree bit for bit because both accumulate exact integer counts
// and apply the same final scale.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ssc/domain.hpp"
#include "ssc/error.hpp"
#include "ssc/geometry.hpp"

namespace ssc {

inline constexpr double kDefaultGridStep = 10.0;

// Distances step, 2*step, ..., floor(r_eff/step)*step. The r = 0 point is
// never part of the grid.
struct DistanceGrid {
  double step = kDefaultGridStep;
  std::vector<double> r;

  static DistanceGrid up_to(double r_eff, double step = kDefaultGridStep) {
    if (!(step > 0.0)) throw DataError("grid step must be positive");
    DistanceGrid g;
    g.step = step;
    const auto m = static_cast<std::size_t>(std::floor(r_eff / step));
    g.r.reserve(m);
    for (std::size_t k = 0; k < m; ++k) g.r.push_back(step * static_cast<double>(k + 1));
    return g;
  }

  std::size_t size() const noexcept { return r.size(); }
  bool empty() const noexcept { return r.empty(); }
  double max() const noexcept { return r.empty() ? 0.0 : r.back(); }

  // Smallest k with d <= r[k]; size() when d exceeds the grid.
  std::size_t bin_of(double d) const noexcept {
    const std::size_t m = r.size();
    if (m == 0) return 0;
    if (d <= r[0]) return 0;
    if (d > r[m - 1]) return m;
    auto k = static_cast<std::size_t>(std::ceil(d / step));
    k = k == 0 ? 0 : std::min(k - 1, m - 1);
    while (k + 1 < m && d > r[k]) ++k;
    while (k > 0 && d <= r[k - 1]) --k;
    return k;
  }

  friend bool operator==(const DistanceGrid&, const DistanceGrid&) = default;
};

struct LCurve {
  DistanceGrid grid;
  std::vector<double> values;
  std::size_t n_prior = 0;
  std::size_t n_new = 0;
  std::optional<std::pair<int, int>> year_pair;  // cross-type curves
  std::optional<double> tau;                     // full spatio-temporal curves
};

enum class EdgeCorrection { none, isotropic };

struct EstimatorOptions {
  EdgeCorrection correction = EdgeCorrection::isotropic;
  EdgeWeightOptions weights;
};

// Edge profiles for every event of one community, built once and then
// shared read-only by all estimator calls on that community.
class EdgeProfileCache {
 public:
  EdgeProfileCache() = default;

  EdgeProfileCache(const Polygon& poly, std::span<const Point> centers, double max_radius,
                   const EdgeWeightOptions& opt = {}) {
    profiles_.reserve(centers.size());
    for (const auto& c : centers) profiles_.push_back(EdgeProfile::build(poly, c, max_radius, opt));
  }

  static EdgeProfileCache for_community(const Community& c, double max_radius, const EdgeWeightOptions& opt = {}) {
    std::vector<Point> pts;
    pts.reserve(c.size());
    for (const auto& e : c.events()) pts.push_back(e.location);
    return EdgeProfileCache(c.polygon(), pts, max_radius, opt);
  }

  const EdgeProfile& operator[](std::size_t i) const noexcept { return profiles_[i]; }
  std::size_t size() const noexcept { return profiles_.size(); }

 private:
  std::vector<EdgeProfile> profiles_;
};

namespace detail {

// Uniform square buckets with cell size >= the largest query distance, so
// every neighbour of a point lies in its own or one of the 8 adjacent cells.
class PointBuckets {
 public:
  PointBuckets() = default;

  PointBuckets(std::span<const Point> pts, double cell) {
    if (pts.empty()) return;
    cell_ = cell > 0.0 ? cell : 1.0;
    min_x_ = pts[0].x;
    min_y_ = pts[0].y;
    double max_x = min_x_, max_y = min_y_;
    for (const auto& p : pts) {
      min_x_ = std::min(min_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
    nx_ = static_cast<long>(std::floor((max_x - min_x_) / cell_)) + 1;
    ny_ = static_cast<long>(std::floor((max_y - min_y_) / cell_)) + 1;
    start_.assign(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    std::vector<std::size_t> cell_of(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cell_of[i] = static_cast<std::size_t>(cell_y(pts[i].y) * nx_ + cell_x(pts[i].x));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    order_.resize(pts.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) order_[fill[cell_of[i]]++] = i;
  }

  // Calls fn(index) for every bucketed point in the 3x3 cell block around q,
  // in a fixed order that depends only on the bucketed set.
  template <class Fn>
  void for_candidates(Point q, Fn&& fn) const {
    for_candidate_ranges(q, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) fn(order_[k]);
    });
  }

  // Same block, as half-open ranges of positions in order().
  template <class Fn>
  void for_candidate_ranges(Point q, Fn&& fn) const {
    if (order_.empty()) return;
    const long cx = static_cast<long>(std::floor((q.x - min_x_) / cell_));
    const long cy = static_cast<long>(std::floor((q.y - min_y_) / cell_));
    for (long y = std::max(0L, cy - 1); y <= std::min(ny_ - 1, cy + 1); ++y) {
      const long x0 = std::max(0L, cx - 1);
      const long x1 = std::min(nx_ - 1, cx + 1);
      if (x0 > x1) continue;
      // Cells of one row are contiguous in order().
      fn(start_[static_cast<std::size_t>(y * nx_ + x0)], start_[static_cast<std::size_t>(y * nx_ + x1) + 1]);
    }
  }

  // Point indices grouped by cell.
  std::span<const std::size_t> order() const noexcept { return order_; }
  // Position range of cell c in order().
  std::size_t cell_begin(std::size_t c) const noexcept { return start_[c]; }
  std::size_t cell_end(std::size_t c) const noexcept { return start_[c + 1]; }
  std::size_t cell_count() const noexcept { return start_.empty() ? 0 : start_.size() - 1; }
  long columns() const noexcept { return nx_; }
  long rows() const noexcept { return ny_; }
  // Cell of an arbitrary point, clamped to the grid.
  std::size_t clamped_cell(Point p) const noexcept {
    return static_cast<std::size_t>(cell_y(p.y) * nx_ + cell_x(p.x));
  }

 private:
  long cell_x(double x) const noexcept {
    return std::clamp(static_cast<long>(std::floor((x - min_x_) / cell_)), 0L, nx_ - 1);
  }
  long cell_y(double y) const noexcept {
    return std::clamp(static_cast<long>(std::floor((y - min_y_) / cell_)), 0L, ny_ - 1);
  }

  double cell_ = 1.0;
  double min_x_ = 0.0;
  double min_y_ = 0.0;
  long nx_ = 0;
  long ny_ = 0;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> order_;
};

inline bool point_less(Point a, Point b) noexcept { return a.x < b.x || (a.x == b.x && a.y < b.y); }

inline void prefix_sum(std::span<double> v) noexcept {
  for (std::size_t k = 1; k < v.size(); ++k) v[k] += v[k - 1];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Full spatio-temporal K(r, tau)

struct TimedPoint {
  Point location;
  double time = 0.0;
};

// Number of ordered pairs (i, j) with 0 < t_j - t_i <= tau and distance <= r.
// Brute force; this is the reference oracle.
inline std::size_t pairwise_forward_counts(std::span<const TimedPoint> events, double r, double tau) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    for (std::size_t j = 0; j < events.size(); ++j) {
      const double dt = events[j].time - events[i].time;
      if (dt > 0.0 && dt <= tau && distance(events[i].location, events[j].location) <= r) ++count;
    }
  }
  return count;
}

// Pair weight for the full estimator: spatial edge weight at the origin
// event times the temporal translation factor T / (T - dt), capped.
struct SpatioTemporalWeight {
  std::span<const EdgeProfile* const> profiles;  // empty for unit weights
  double time_span = 1.0;
  double max_weight = 10.0;

  double operator()(std::size_t i, double d, double dt) const noexcept {
    if (profiles.empty()) return 1.0;
    const double spatial = profiles[i]->weight(d);
    const double temporal = dt < time_span ? time_span / (time_span - dt) : max_weight;
    return std::min(max_weight, spatial * temporal);
  }
};

// K(r, tau) = |W| |T| / n^2 * sum over forward pairs of w_ij. O(n^2).
inline std::vector<double> k_function_bruteforce(std::span<const TimedPoint> events, double window_area,
                                                 double time_span, const DistanceGrid& grid, double tau,
                                                 const SpatioTemporalWeight& weight) {
  const std::size_t n = events.size();
  if (n < 2) throw DataError("K function needs at least two events");
  if (!(time_span > 0.0)) throw DataError("K function needs a positive time span");
  std::vector<double> sums(grid.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dt = events[j].time - events[i].time;
      if (!(dt > 0.0 && dt <= tau)) continue;
      const double d = distance(events[i].location, events[j].location);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (d <= grid.r[k]) sums[k] += weight(i, d, dt);
      }
    }
  }
  const double scale = window_area * time_span / (static_cast<double>(n) * static_cast<double>(n));
  for (auto& s : sums) s *= scale;
  return sums;
}

// Bucketed version of k_function_bruteforce.
inline std::vector<double> k_function(std::span<const TimedPoint> events, double window_area, double time_span,
                                      const DistanceGrid& grid, double tau, const SpatioTemporalWeight& weight) {
  const std::size_t n = events.size();
  if (n < 2) throw DataError("K function needs at least two events");
  if (!(time_span > 0.0)) throw DataError("K function needs a positive time span");
  std::vector<double> bins(grid.size(), 0.0);
  if (grid.empty()) return bins;
  std::vector<Point> locs(n);
  for (std::size_t i = 0; i < n; ++i) locs[i] = events[i].location;
  const detail::PointBuckets buckets(locs, grid.max());
  for (std::size_t i = 0; i < n; ++i) {
    const TimedPoint ei = events[i];
    buckets.for_candidates(ei.location, [&](std::size_t j) {
      const double dt = events[j].time - ei.time;
      if (!(dt > 0.0 && dt <= tau)) return;
      const double d = distance(ei.location, events[j].location);
      const std::size_t k = grid.bin_of(d);
      if (k < bins.size()) bins[k] += weight(i, d, dt);
    });
  }
  detail::prefix_sum(bins);
  const double scale = window_area * time_span / (static_cast<double>(n) * static_cast<double>(n));
  for (auto& b : bins) b *= scale;
  return bins;
}

// Community overload: event years become times, the window is the community
// polygon and the time span is that of the timeline.
inline std::vector<double> k_function(const Community& community, const Timeline& timeline,
                                      const DistanceGrid& grid, double tau, const EdgeProfileCache* profiles,
                                      const EstimatorOptions& opt = {}) {
  std::vector<TimedPoint> pts;
  pts.reserve(community.size());
  for (const auto& e : community.events()) pts.push_back({e.location, static_cast<double>(e.year)});
  std::vector<const EdgeProfile*> prof;
  if (opt.correction == EdgeCorrection::isotropic) {
    if (profiles == nullptr) throw DataError("isotropic correction needs edge profiles");
    for (std::size_t i = 0; i < pts.size(); ++i) prof.push_back(&(*profiles)[i]);
  }
  const SpatioTemporalWeight w{prof, static_cast<double>(timeline.span_years()), opt.weights.max_weight};
  return k_function(pts, community.built_area(), static_cast<double>(timeline.span_years()), grid, tau, w);
}

// L = sqrt(K / pi) - r. With tau set (full spatio-temporal mode) the
// transform is applied to K / tau, whose expectation under complete
// spatio-temporal randomness is pi r^2.
inline LCurve l_function(std::span<const double> k_values, const DistanceGrid& grid,
                         std::optional<double> tau = std::nullopt) {
  if (k_values.size() != grid.size()) throw DataError("K values and grid differ in length");
  LCurve curve;
  curve.grid = grid;
  curve.tau = tau;
  curve.values.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (k_values[k] < 0.0) throw DataError("K values must be non-negative");
    const double kt = tau ? k_values[k] / *tau : k_values[k];
    curve.values[k] = std::sqrt(kt / std::numbers::pi) - grid.r[k];
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Cross-type K for one cohort pair: prior events are the centers, added
// events the neighbours.

// K12(r) = |W| / (n1 n2) * sum_{i in prior} sum_{j in added} w_i(d_ij) I(d_ij <= r).
// Brute force; weight(i, d) supplies w_i(d).
inline std::vector<double> cross_k_bruteforce(std::span<const Point> prior, std::span<const Point> added,
                                              double window_area, const DistanceGrid& grid,
                                              const std::function<double(std::size_t, double)>& weight) {
  if (prior.empty() || added.empty()) throw DataError("cross K needs non-empty cohorts");
  std::vector<double> sums(grid.size(), 0.0);
  for (std::size_t i = 0; i < prior.size(); ++i) {
    for (std::size_t j = 0; j < added.size(); ++j) {
      const double d = distance(prior[i], added[j]);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (d <= grid.r[k]) sums[k] += weight(i, d);
      }
    }
  }
  const double scale = window_area / (static_cast<double>(prior.size()) * static_cast<double>(added.size()));
  for (auto& s : sums) s *= scale;
  return sums;
}

inline std::vector<double> cross_k_bruteforce(std::span<const Point> prior, std::span<const Point> added,
                                              double window_area, const DistanceGrid& grid) {
  return cross_k_bruteforce(prior, added, window_area, grid, [](std::size_t, double) { return 1.0; });
}

// Bucketed cross-type estimator with the prior cohort fixed. The bucket
// structure is built once and reused for every simulated added cohort.
class CrossKEstimator {
 public:
  // `profiles` holds one profile per prior point, or is empty for unit weights.
  CrossKEstimator(std::span<const Point> prior, std::vector<const EdgeProfile*> profiles, double window_area,
                  DistanceGrid grid)
      : n_prior_(prior.size()), area_(window_area), grid_(std::move(grid)) {
    if (prior.empty()) throw DataError("cross K needs a non-empty prior cohort");
    if (!profiles.empty() && profiles.size() != prior.size()) {
      throw DataError("one edge profile per prior point is required");
    }
    buckets_ = detail::PointBuckets(prior, grid_.max());
    // Prior data laid out in bucket order so candidate blocks are contiguous.
    for (auto i : buckets_.order()) {
      px_.push_back(prior[i].x);
      py_.push_back(prior[i].y);
      if (!profiles.empty()) {
        prof_.push_back(profiles[i]);
      }
    }
    inv_step_ = 1.0 / grid_.step;
    // Pairs beyond this squared distance are certainly outside the grid.
    const double cut = grid_.max() * (1.0 + 1e-9);
    cut2_ = cut * cut;
  }

  const DistanceGrid& grid() const noexcept { return grid_; }
  std::size_t prior_size() const noexcept { return n_prior_; }

  // Writes K12 on the grid into `out` (size = grid size). `scratch` is reused
  // between calls to avoid reallocations.
  void estimate(std::span<const Point> added, std::span<double> out, std::vector<Point>& scratch) const {
    scratch.assign(added.begin(), added.end());
    std::sort(scratch.begin(), scratch.end(), detail::point_less);
    estimate_in_order(scratch, out);
  }

  // As estimate(), summing in the given order of `added`. Results are
  // reproducible for a fixed order but not invariant to permutations.
  void estimate_in_order(std::span<const Point> added, std::span<double> out) const {
    if (added.empty()) throw DataError("cross K needs a non-empty added cohort");
    std::fill(out.begin(), out.end(), 0.0);
    if (grid_.empty()) return;
    // Added points bucketed on the prior cell grid (clamped, which only adds
    // candidates). Prior points are the outer loop so each edge profile stays
    // in cache while its neighbours are scanned.
    thread_local std::vector<std::size_t> start;
    thread_local std::vector<std::size_t> cell_of;
    thread_local std::vector<double> ax, ay;
    const std::size_t cells = buckets_.cell_count();
    start.assign(cells + 1, 0);
    cell_of.resize(added.size());
    for (std::size_t j = 0; j < added.size(); ++j) {
      cell_of[j] = buckets_.clamped_cell(added[j]);
      ++start[cell_of[j] + 1];
    }
    for (std::size_t c = 1; c <= cells; ++c) start[c] += start[c - 1];
    ax.resize(added.size());
    ay.resize(added.size());
    for (std::size_t j = 0; j < added.size(); ++j) {
      const std::size_t pos = start[cell_of[j]]++;
      ax[pos] = added[j].x;
      ay[pos] = added[j].y;
    }
    for (std::size_t c = cells; c > 0; --c) start[c] = start[c - 1];
    start[0] = 0;

    const std::size_t m = grid_.size();
    const double* r = grid_.r.data();
    const double r_last = r[m - 1];
    const bool weighted = !prof_.empty();
    const long nx = buckets_.columns();
    const long ny = buckets_.rows();
    // Distances are gathered per prior point, then weighted in one tight loop.
    thread_local std::vector<double> dist;
    thread_local std::vector<std::uint32_t> bin;
    dist.resize(added.size());
    bin.resize(added.size());
    for (std::size_t c = 0; c < cells; ++c) {
      const std::size_t pb = buckets_.cell_begin(c), pe = buckets_.cell_end(c);
      if (pb == pe) continue;
      const long cx = static_cast<long>(c) % nx;
      const long cy = static_cast<long>(c) / nx;
      const long x0 = std::max(0L, cx - 1), x1 = std::min(nx - 1, cx + 1);
      for (std::size_t s = pb; s < pe; ++s) {
        const Point p{px_[s], py_[s]};
        // Squared distances and roots in branch free passes the compiler can
        // vectorise, then one filtering pass in candidate order.
        std::size_t cand = 0;
        for (long y = std::max(0L, cy - 1); y <= std::min(ny - 1, cy + 1); ++y) {
          const std::size_t ab = start[static_cast<std::size_t>(y * nx + x0)];
          const std::size_t ae = start[static_cast<std::size_t>(y * nx + x1) + 1];
          double* dst = dist.data() + cand;
          for (std::size_t t = ab; t < ae; ++t) {
            const double dx = ax[t] - p.x;
            const double dy = ay[t] - p.y;
            dst[t - ab] = dx * dx + dy * dy;
          }
          cand += ae - ab;
        }
        std::size_t found = 0;
        for (std::size_t i = 0; i < cand; ++i) {
          const double d2 = dist[i];
          if (d2 > cut2_) continue;
          const double d = std::sqrt(d2);
          if (d > r_last) continue;
          auto k = std::min(static_cast<std::size_t>(d * inv_step_), m - 1);
          while (k > 0 && d <= r[k - 1]) --k;
          while (d > r[k]) ++k;
          dist[found] = d;
          bin[found] = static_cast<std::uint32_t>(k);
          ++found;
        }
        if (!weighted) {
          for (std::size_t i = 0; i < found; ++i) out[bin[i]] += 1.0;
          continue;
        }
        const EdgeProfile& prof = *prof_[s];
        for (std::size_t i = 0; i < found; ++i) {
          out[bin[i]] += prof.weight(dist[i]);
        }
      }
    }
    detail::prefix_sum(out);
    const double scale = area_ / (static_cast<double>(n_prior_) * static_cast<double>(added.size()));
    for (auto& v : out) v *= scale;
  }

  std::vector<double> estimate(std::span<const Point> added) const {
    std::vector<double> out(grid_.size());
    std::vector<Point> scratch;
    estimate(added, out, scratch);
    return out;
  }

 private:
  std::size_t n_prior_;
  double area_;
  DistanceGrid grid_;
  detail::PointBuckets buckets_;
  std::vector<double> px_, py_;
  std::vector<const EdgeProfile*> prof_;
  double inv_step_ = 1.0;
  double cut2_ = 0.0;
};

inline std::vector<const EdgeProfile*> prior_profiles(const CohortPair& cohort, const EdgeProfileCache* cache,
                                                      const EstimatorOptions& opt) {
  std::vector<const EdgeProfile*> out;
  if (opt.correction == EdgeCorrection::none) return out;
  if (cache == nullptr) throw DataError("isotropic correction needs edge profiles");
  out.reserve(cohort.prior_index.size());
  for (auto idx : cohort.prior_index) out.push_back(&(*cache)[idx]);
  return out;
}

inline CrossKEstimator make_cross_estimator(const Community& community, const CohortPair& cohort,
                                            const DistanceGrid& grid, const EdgeProfileCache* cache,
                                            const EstimatorOptions& opt = {}) {
  return CrossKEstimator(cohort.prior, prior_profiles(cohort, cache, opt), community.built_area(), grid);
}

// Observed cross-type L curve for one year pair; nothing when either cohort
// is empty.
inline std::optional<LCurve> cross_l_year_pair(const Community& community, const CohortPair& cohort,
                                               const DistanceGrid& grid, const EdgeProfileCache* cache,
                                               const EstimatorOptions& opt = {}) {
  if (cohort.prior.empty() || cohort.added.empty()) return std::nullopt;
  const auto est = make_cross_estimator(community, cohort, grid, cache, opt);
  auto curve = l_function(est.estimate(cohort.added), grid);
  curve.n_prior = cohort.prior.size();
  curve.n_new = cohort.added.size();
  curve.year_pair = std::make_pair(cohort.t, cohort.t_prime);
  return curve;
}

}  // namespace ssc
