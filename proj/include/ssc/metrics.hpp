#pragma once

// Scalar contagion and adoption variables derived from L curves, envelopes
// and panel areas: intensity index (CI), absolute/relative range (R, R*),
// within-household expansion (HE), lag aggregation, adoption intensity (AI),
// the adoption-over-time index (ATI) and relative AI change.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssc/domain.hpp"
#include "ssc/error.hpp"
#include "ssc/null_models.hpp"
#include "ssc/stpp.hpp"

namespace ssc {

// Radius of a typical household footprint; shorter distances are read as
// within-household expansion, longer ones as contagion across households.
inline constexpr double kHouseholdRadius = 25.0;
inline constexpr int kMaxLag = 5;
inline constexpr double kAdoptionScale = 1e6;

namespace detail {

inline void require_same_grid(const LCurve& observed, const Envelope& env) {
  if (!(observed.grid == env.grid)) throw DataError("curve and envelope grids differ");
  if (env.kind != EnvelopeKind::global) throw DataError("contagion indices need the global envelope");
}

struct ExceedanceIntegrals {
  double excess = 0.0;  // integral of [L - L+]_+
  double width = 0.0;   // integral of L+ - L-
};

// Trapezoid integrals over grid points [0, count). A single point degrades to
// its pointwise values.
inline ExceedanceIntegrals exceedance_integrals(const LCurve& observed, const Envelope& env, std::size_t count) {
  ExceedanceIntegrals out;
  auto excess = [&](std::size_t k) { return std::max(observed.values[k] - env.upper[k], 0.0); };
  auto width = [&](std::size_t k) { return env.upper[k] - env.lower[k]; };
  if (count == 1) {
    out.excess = excess(0);
    out.width = width(0);
    return out;
  }
  for (std::size_t k = 1; k < count; ++k) {
    const double h = observed.grid.r[k] - observed.grid.r[k - 1];
    out.excess += 0.5 * h * (excess(k - 1) + excess(k));
    out.width += 0.5 * h * (width(k - 1) + width(k));
  }
  return out;
}

}  // namespace detail

// Normalized area of the observed curve above the upper global envelope,
// over the whole analysis grid.
inline double ci_index(const LCurve& observed, const Envelope& global) {
  detail::require_same_grid(observed, global);
  if (observed.grid.empty()) throw DataError("empty distance grid");
  const auto in = detail::exceedance_integrals(observed, global, observed.grid.size());
  if (!(in.width > 0.0)) throw DataError("zero-width envelope: intensity index undefined");
  return in.excess / in.width;
}

// The same ratio over distances up to the household radius. Nothing when
// the envelope has zero width there while the observed curve exceeds it.
inline std::optional<double> he_index(const LCurve& observed, const Envelope& global,
                                      double household_radius = kHouseholdRadius) {
  detail::require_same_grid(observed, global);
  std::size_t count = 0;
  while (count < observed.grid.size() && observed.grid.r[count] <= household_radius) ++count;
  if (count == 0) throw DataError("distance grid does not reach into the household band");
  const auto in = detail::exceedance_integrals(observed, global, count);
  if (in.width > 0.0) return in.excess / in.width;
  if (in.excess == 0.0) return 0.0;
  return std::nullopt;
}

struct RangeMeasure {
  double r_abs = 0.0;  // meters
  double r_rel = 0.0;  // fraction of r_eff
};

// Total grid measure (one step per point) where L exceeds the upper
// envelope, counting only distances beyond the household radius.
inline RangeMeasure ssc_range(const LCurve& observed, const Envelope& global, double r_eff,
                              double household_radius = kHouseholdRadius) {
  detail::require_same_grid(observed, global);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < observed.grid.size(); ++k) {
    if (observed.grid.r[k] > household_radius && observed.values[k] > global.upper[k]) ++hits;
  }
  RangeMeasure out;
  out.r_abs = observed.grid.step * static_cast<double>(hits);
  out.r_rel = r_eff > 0.0 ? std::clamp(out.r_abs / r_eff, 0.0, 1.0) : 0.0;
  return out;
}

// Metrics of one community and year pair. Absent values mean the pair could
// not be evaluated; `flags` says why.
struct SSCMetrics {
  std::string community_id;
  int t = 0;
  int t_prime = 0;
  std::size_t n_prior = 0;
  std::size_t n_new = 0;
  std::optional<double> ci;
  std::optional<double> r_abs;
  std::optional<double> r_rel;
  std::optional<double> he;
  std::string flags;

  int lag() const noexcept { return t_prime - t; }
  bool complete() const noexcept { return ci && r_abs && r_rel; }
};

inline SSCMetrics compute_pair_metrics(const std::string& community_id, const LCurve& observed,
                                       const Envelope& global, double r_eff) {
  SSCMetrics m;
  m.community_id = community_id;
  if (observed.year_pair) {
    m.t = observed.year_pair->first;
    m.t_prime = observed.year_pair->second;
  }
  m.n_prior = observed.n_prior;
  m.n_new = observed.n_new;
  try {
    m.ci = ci_index(observed, global);
  } catch (const DataError&) {
    m.flags = "zero_width_envelope";
  }
  const auto range = ssc_range(observed, global, r_eff);
  m.r_abs = range.r_abs;
  m.r_rel = range.r_rel;
  const char* he_flag = "he_degenerate_envelope";
  try {
    m.he = he_index(observed, global);
  } catch (const DataError&) {
    he_flag = "he_band_not_on_grid";
  }
  if (!m.he) m.flags += m.flags.empty() ? he_flag : std::string(";") + he_flag;
  return m;
}

// Lag means for h = 1..kMaxLag and their mean over the lags present.
struct LagAggregate {
  std::array<std::optional<double>, kMaxLag> by_lag;
  std::optional<double> overall;
};

struct LagValue {
  int lag = 0;
  double value = 0.0;
};

inline LagAggregate aggregate_by_lag(std::span<const LagValue> values) {
  std::array<double, kMaxLag> sum{};
  std::array<std::size_t, kMaxLag> count{};
  for (const auto& v : values) {
    if (v.lag < 1 || v.lag > kMaxLag) continue;
    sum[v.lag - 1] += v.value;
    ++count[v.lag - 1];
  }
  LagAggregate out;
  double total = 0.0;
  std::size_t lags = 0;
  for (int h = 0; h < kMaxLag; ++h) {
    if (count[h] == 0) continue;
    out.by_lag[h] = sum[h] / static_cast<double>(count[h]);
    total += *out.by_lag[h];
    ++lags;
  }
  if (lags > 0) out.overall = total / static_cast<double>(lags);
  return out;
}

using AggregatedCI = LagAggregate;

// Lag aggregation of one optional SSCMetrics field; pairs missing it are
// skipped rather than zero-filled.
inline LagAggregate aggregate_metric(std::span<const SSCMetrics> pairs,
                                     std::optional<double> SSCMetrics::*field) {
  std::vector<LagValue> vals;
  for (const auto& m : pairs) {
    if (const auto& v = m.*field) vals.push_back({m.lag(), *v});
  }
  return aggregate_by_lag(vals);
}

inline AggregatedCI aggregate_ci(std::span<const SSCMetrics> pairs) { return aggregate_metric(pairs, &SSCMetrics::ci); }

// Cumulative panel area installed by `year`, times 1e6, per unit built area.
inline double adoption_intensity(const Community& community, int year) {
  if (!(community.built_area() > 0.0)) throw DataError("built area must be positive");
  double area = 0.0;
  for (const auto& e : community.events()) {
    if (e.year <= year) area += e.panel_area;
  }
  return area * kAdoptionScale / community.built_area();
}

inline std::vector<double> adoption_series(const Community& community, const Timeline& timeline) {
  std::vector<double> out;
  for (int y : timeline.years()) out.push_back(adoption_intensity(community, y));
  return out;
}

// Trapezoid integral of a piecewise-linear AI series over the snapshot years.
inline double integrate_adoption(std::span<const double> series, std::span<const int> years) {
  if (series.size() != years.size()) throw DataError("adoption series and years differ in length");
  double acc = 0.0;
  for (std::size_t i = 1; i < years.size(); ++i) {
    acc += 0.5 * static_cast<double>(years[i] - years[i - 1]) * (series[i - 1] + series[i]);
  }
  return acc;
}

// Each community's time-integrated AI divided by the regional mean of that
// integral.
inline std::vector<double> ati_index(std::span<const std::vector<double>> series, std::span<const int> years) {
  if (years.size() < 2) throw DataError("adoption-over-time index needs at least two years");
  if (series.empty()) throw DataError("adoption-over-time index needs a non-empty region");
  std::vector<double> raw;
  raw.reserve(series.size());
  double total = 0.0;
  for (const auto& s : series) {
    raw.push_back(integrate_adoption(s, years));
    total += raw.back();
  }
  const double mean = total / static_cast<double>(raw.size());
  if (!(mean > 0.0)) throw DataError("regional mean of integrated adoption is zero");
  for (auto& v : raw) v /= mean;
  return raw;
}

// Relative AI change with +1 in the baseline so zero baselines stay defined.
constexpr double delta_ai(double ai_start, double ai_end) noexcept { return (ai_end - ai_start) / (ai_start + 1.0); }

}  // namespace ssc
