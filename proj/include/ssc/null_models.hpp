#pragma once

// Complete spatio-temporal randomness null model for cohort pairs, and the
// simulation envelopes built from it.
//
// The null keeps the prior cohort fixed and redraws the added cohort
// uniformly inside the community polygon, preserving both counts. Each
// simulation has its own counter-based stream keyed by
// (master seed, community id, t, t', simulation index).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <numbers>
#include <vector>

#include "ssc/domain.hpp"
#include "ssc/error.hpp"
#include "ssc/geometry.hpp"
#include "ssc/rng.hpp"
#include "ssc/stpp.hpp"

namespace ssc {

enum class EnvelopeKind { pointwise, global };

inline const char* to_string(EnvelopeKind k) noexcept { return k == EnvelopeKind::global ? "global" : "pointwise"; }

struct Envelope {
  DistanceGrid grid;
  std::vector<double> upper;
  std::vector<double> lower;
  std::size_t n_sims = 0;
  std::uint64_t seed = 0;
  EnvelopeKind kind = EnvelopeKind::global;
};

struct EnvelopeSet {
  Envelope global;
  Envelope pointwise;
};

inline constexpr std::size_t kDefaultSimulations = 1000;
inline constexpr std::size_t kMinSimulations = 39;

struct EnvelopeConfig {
  std::size_t n_sims = kDefaultSimulations;
  std::uint64_t master_seed = 0;
  double alpha = 0.05;  // two-sided level of the pointwise envelope
};

inline std::uint64_t simulation_key(std::uint64_t master_seed, std::string_view community_id, int t, int t_prime,
                                    std::size_t sim_index) noexcept {
  return derive_key({master_seed, fnv1a64(community_id), as_key(t), as_key(t_prime), sim_index});
}

// Rejection sampler for uniform points inside a polygon.
class PolygonSampler {
 public:
  explicit PolygonSampler(const Polygon& poly) : poly_(&poly), box_(bounding_box(poly)) { build_raster(); }

  // Fills `out` with n uniform points. Gives up after 1000 * n draws.
  void fill(std::size_t n, CounterRng& rng, std::vector<Point>& out) const {
    out.clear();
    const std::size_t budget = 1000 * std::max<std::size_t>(n, 1);
    std::size_t draws = 0;
    while (out.size() < n) {
      if (draws++ >= budget) {
        throw GeometryError("rejection sampling exhausted its budget of " + std::to_string(budget) +
                            " draws; polygon area is tiny relative to its bounding box");
      }
      const Point p{rng.uniform(box_.min_x, box_.max_x), rng.uniform(box_.min_y, box_.max_y)};
      if (inside(p)) out.push_back(p);
    }
  }

  Point draw(CounterRng& rng) const {
    std::vector<Point> one;
    fill(1, rng, one);
    return one.front();
  }

  // Same answer as point_in_polygon. Cells that no edge touches are decided
  // by a lookup.
  bool inside(Point p) const noexcept {
    if (cells_.empty()) return point_in_polygon(*poly_, p);
    const auto cx = std::min<std::size_t>(kGrid - 1, static_cast<std::size_t>(std::max(0.0, (p.x - box_.min_x) * inv_w_)));
    const auto cy = std::min<std::size_t>(kGrid - 1, static_cast<std::size_t>(std::max(0.0, (p.y - box_.min_y) * inv_h_)));
    const auto c = cells_[cy * kGrid + cx];
    return c == kMixed ? point_in_polygon(*poly_, p) : c == kIn;
  }

 private:
  static constexpr std::size_t kGrid = 64;
  static constexpr unsigned char kOut = 0, kIn = 1, kMixed = 2;

  void build_raster() {
    const double w = box_.width(), h = box_.height();
    if (!(w > 0.0) || !(h > 0.0) || poly_->size() < 3) return;
    inv_w_ = kGrid / w;
    inv_h_ = kGrid / h;
    const double cw = w / kGrid, ch = h / kGrid;
    // Generous padding: covers the on-boundary tolerance and rounding in the
    // cell index.
    const double pad = 1e-6 * (w + h);
    cells_.assign(kGrid * kGrid, kOut);
    std::vector<bool> mixed(kGrid * kGrid, false);
    auto index = [](double v) { return static_cast<long>(std::floor(v)); };
    for (std::size_t i = 0; i < poly_->size(); ++i) {
      const Point a = (*poly_)[i], b = poly_->next(i);
      const long x0 = std::max(0L, index((std::min(a.x, b.x) - pad - box_.min_x) / cw));
      const long x1 = std::min<long>(kGrid - 1, index((std::max(a.x, b.x) + pad - box_.min_x) / cw));
      const long y0 = std::max(0L, index((std::min(a.y, b.y) - pad - box_.min_y) / ch));
      const long y1 = std::min<long>(kGrid - 1, index((std::max(a.y, b.y) + pad - box_.min_y) / ch));
      for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
          const double lx = box_.min_x + x * cw - pad, hx = box_.min_x + (x + 1) * cw + pad;
          const double ly = box_.min_y + y * ch - pad, hy = box_.min_y + (y + 1) * ch + pad;
          // Skip the cell only if all four corners lie strictly on one side
          // of the edge's line.
          int pos = 0, neg = 0;
          for (Point q : {Point{lx, ly}, Point{hx, ly}, Point{lx, hy}, Point{hx, hy}}) {
            const double c = cross(a, b, q);
            pos += c > 0.0;
            neg += c < 0.0;
          }
          if (pos == 4 || neg == 4) continue;
          mixed[static_cast<std::size_t>(y) * kGrid + static_cast<std::size_t>(x)] = true;
        }
      }
    }
    for (std::size_t y = 0; y < kGrid; ++y) {
      for (std::size_t x = 0; x < kGrid; ++x) {
        const std::size_t c = y * kGrid + x;
        if (mixed[c]) {
          cells_[c] = kMixed;
        } else {
          const Point centre{box_.min_x + (x + 0.5) * cw, box_.min_y + (y + 0.5) * ch};
          cells_[c] = point_in_polygon(*poly_, centre) ? kIn : kOut;
        }
      }
    }
  }

  const Polygon* poly_;
  BoundingBox box_;
  double inv_w_ = 0.0, inv_h_ = 0.0;
  std::vector<unsigned char> cells_;
};

// One null realization: prior unchanged, added cohort redrawn uniformly.
inline CohortPair simulate_cstr(const Community& community, const CohortPair& cohort, std::uint64_t rng_key) {
  CohortPair out = cohort;
  if (cohort.added.empty()) return out;
  CounterRng rng(rng_key);
  PolygonSampler(community.polygon()).fill(cohort.added.size(), rng, out.added);
  return out;
}

// Simulated L curves, row-major (n_sims x grid size). Row s comes from the
// stream simulation_key(master, community, t, t', s), so any prefix of rows
// is the same whatever the total count.
inline std::vector<double> simulate_l_curves(const Community& community, const CohortPair& cohort,
                                             const CrossKEstimator& estimator, std::size_t n_sims,
                                             std::uint64_t master_seed) {
  const auto& grid = estimator.grid();
  const std::size_t m = grid.size();
  std::vector<double> out(n_sims * m);
  const PolygonSampler sampler(community.polygon());
  std::vector<Point> added;
  std::vector<double> k(m);
  for (std::size_t s = 0; s < n_sims; ++s) {
    CounterRng rng(simulation_key(master_seed, community.id(), cohort.t, cohort.t_prime, s));
    sampler.fill(cohort.added.size(), rng, added);
    estimator.estimate_in_order(added, k);
    for (std::size_t j = 0; j < m; ++j) {
      out[s * m + j] = std::sqrt(k[j] / std::numbers::pi) - grid.r[j];
    }
  }
  return out;
}

// Rank of the pointwise envelope bounds: the k-th smallest and k-th largest
// simulated values with k = max(1, floor(alpha/2 * (n + 1))).
inline std::size_t pointwise_rank(std::size_t n_sims, double alpha) noexcept {
  const auto k = static_cast<std::size_t>(std::floor(0.5 * alpha * static_cast<double>(n_sims + 1)));
  return std::max<std::size_t>(1, std::min(k, n_sims));
}

// Global envelope: per-distance min/max over all simulations. Pointwise
// envelope: rank-based percentiles.
inline EnvelopeSet envelopes_from_simulations(const DistanceGrid& grid, std::span<const double> sims,
                                              std::size_t n_sims, std::uint64_t seed, double alpha = 0.05) {
  const std::size_t m = grid.size();
  if (n_sims == 0) throw DataError("envelopes need at least one simulation");
  if (sims.size() != n_sims * m) throw DataError("simulation matrix does not match the grid");
  EnvelopeSet env;
  env.global = Envelope{grid, std::vector<double>(m), std::vector<double>(m), n_sims, seed, EnvelopeKind::global};
  env.pointwise =
      Envelope{grid, std::vector<double>(m), std::vector<double>(m), n_sims, seed, EnvelopeKind::pointwise};
  const std::size_t rank = pointwise_rank(n_sims, alpha);
  std::vector<double> column(n_sims);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t s = 0; s < n_sims; ++s) column[s] = sims[s * m + j];
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    env.global.lower[j] = *lo;
    env.global.upper[j] = *hi;
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(rank - 1), column.end());
    env.pointwise.lower[j] = column[rank - 1];
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(n_sims - rank), column.end());
    env.pointwise.upper[j] = column[n_sims - rank];
  }
  return env;
}

// Envelopes for one cohort pair; nothing when the cohort is missing a side.
inline std::optional<EnvelopeSet> build_envelopes(const Community& community, const CohortPair& cohort,
                                                  const CrossKEstimator& estimator, const EnvelopeConfig& cfg) {
  if (cfg.n_sims < kMinSimulations) {
    throw DataError("envelopes need at least " + std::to_string(kMinSimulations) + " simulations");
  }
  if (cohort.prior.empty() || cohort.added.empty()) return std::nullopt;
  const auto sims = simulate_l_curves(community, cohort, estimator, cfg.n_sims, cfg.master_seed);
  return envelopes_from_simulations(estimator.grid(), sims, cfg.n_sims, cfg.master_seed, cfg.alpha);
}

inline std::optional<EnvelopeSet> build_envelopes(const Community& community, const CohortPair& cohort,
                                                  const DistanceGrid& grid, const EdgeProfileCache* cache,
                                                  const EnvelopeConfig& cfg, const EstimatorOptions& opt = {}) {
  if (cohort.prior.empty() || cohort.added.empty()) return std::nullopt;
  const auto est = make_cross_estimator(community, cohort, grid, cache, opt);
  return build_envelopes(community, cohort, est, cfg);
}

enum class Significance { below, within, above };

inline const char* to_string(Significance s) noexcept {
  switch (s) {
    case Significance::below: return "below";
    case Significance::within: return "within";
    case Significance::above: return "above";
  }
  return "within";
}

// Strict comparisons: a curve touching an envelope bound is within.
inline std::vector<Significance> significance_flags(const LCurve& observed, const Envelope& envelope) {
  if (!(observed.grid == envelope.grid)) throw DataError("curve and envelope grids differ");
  std::vector<Significance> out(observed.values.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double v = observed.values[k];
    out[k] = v > envelope.upper[k]   ? Significance::above
             : v < envelope.lower[k] ? Significance::below
                                     : Significance::within;
  }
  return out;
}

}  // namespace ssc
