#pragma once

// Four-way contagion pattern classification (intensity x range) and the
// transition typing of patterns between consecutive year pairs.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssc/error.hpp"
#include "ssc/metrics.hpp"

namespace ssc {

enum class Intensity { low, high };
enum class RangeClass { short_range, long_range };

struct PatternLabel {
  Intensity intensity = Intensity::low;
  RangeClass range = RangeClass::short_range;

  std::string name() const {
    return std::string(intensity == Intensity::high ? "high" : "low") + "-" +
           (range == RangeClass::long_range ? "long" : "short");
  }

  friend bool operator==(const PatternLabel&, const PatternLabel&) = default;
};

enum class ThresholdProvenance { fixed_global, period_specific };

inline const char* to_string(ThresholdProvenance p) noexcept {
  return p == ThresholdProvenance::fixed_global ? "fixed-global" : "period-specific";
}

struct Thresholds {
  double ci_cut = 0.0;
  double r_cut = 0.0;      // meters
  double r_rel_cut = 0.0;  // fraction
  ThresholdProvenance provenance = ThresholdProvenance::fixed_global;
};

struct PatternValues {
  std::optional<double> ci;
  std::optional<double> r_abs;
  std::optional<double> r_rel;
};

inline PatternValues pattern_values(const SSCMetrics& m) { return {m.ci, m.r_abs, m.r_rel}; }

// Intensity is high iff ci > ci_cut. Range is long iff either r_abs or r_rel
// exceeds its cut. Ties go to the lower class. Nothing when a value is missing.
inline std::optional<PatternLabel> classify_pattern(const PatternValues& v, const Thresholds& th) {
  if (!v.ci || !v.r_abs || !v.r_rel) return std::nullopt;
  PatternLabel label;
  label.intensity = *v.ci > th.ci_cut ? Intensity::high : Intensity::low;
  label.range = (*v.r_abs > th.r_cut || *v.r_rel > th.r_rel_cut) ? RangeClass::long_range : RangeClass::short_range;
  return label;
}

// Mean-based cuts over the complete entries.
inline Thresholds mean_thresholds(std::span<const PatternValues> values, ThresholdProvenance provenance) {
  double ci = 0.0, r = 0.0, rr = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (!v.ci || !v.r_abs || !v.r_rel) continue;
    ci += *v.ci;
    r += *v.r_abs;
    rr += *v.r_rel;
    ++n;
  }
  if (n == 0) throw DataError("thresholds need at least one community with complete metrics");
  const double dn = static_cast<double>(n);
  return Thresholds{ci / dn, r / dn, rr / dn, provenance};
}

// Contemporaneous cuts for one year pair.
inline Thresholds period_thresholds(std::span<const SSCMetrics> pair_metrics) {
  std::vector<PatternValues> vals;
  vals.reserve(pair_metrics.size());
  for (const auto& m : pair_metrics) vals.push_back(pattern_values(m));
  return mean_thresholds(vals, ThresholdProvenance::period_specific);
}

enum class Dimension { intensity, range };
enum class TransitionType { stable, upward, downward };

inline const char* to_string(Dimension d) noexcept { return d == Dimension::intensity ? "intensity" : "range"; }

inline const char* to_string(TransitionType t) noexcept {
  switch (t) {
    case TransitionType::stable: return "stable";
    case TransitionType::upward: return "upward";
    case TransitionType::downward: return "downward";
  }
  return "stable";
}

inline TransitionType transition_type(const PatternLabel& before, const PatternLabel& after, Dimension dim) noexcept {
  const int b = dim == Dimension::intensity ? static_cast<int>(before.intensity) : static_cast<int>(before.range);
  const int a = dim == Dimension::intensity ? static_cast<int>(after.intensity) : static_cast<int>(after.range);
  if (a > b) return TransitionType::upward;
  if (a < b) return TransitionType::downward;
  return TransitionType::stable;
}

using YearPair = std::pair<int, int>;

// A transition window compares the patterns of two consecutive year pairs.
struct TransitionWindow {
  std::string name;
  YearPair initial;
  YearPair final;
};

// Anchor years a0 < a1 < ... give year pairs (a0,a1), (a1,a2), ... and one
// window per consecutive pair of those.
inline std::vector<TransitionWindow> transition_windows(std::span<const int> anchors) {
  if (anchors.size() < 3) throw DataError("transition windows need at least three anchor years");
  for (std::size_t i = 1; i < anchors.size(); ++i) {
    if (anchors[i] <= anchors[i - 1]) throw DataError("anchor years must be strictly increasing");
  }
  std::vector<TransitionWindow> out;
  for (std::size_t i = 0; i + 2 < anchors.size(); ++i) {
    out.push_back({"T" + std::to_string(i + 1), {anchors[i], anchors[i + 1]}, {anchors[i + 1], anchors[i + 2]}});
  }
  return out;
}

inline std::vector<int> standard_anchor_years() { return {2012, 2015, 2017, 2020, 2022}; }

struct TransitionRecord {
  std::string community_id;
  std::size_t window = 0;  // 0-based index into the window list
  std::string window_name;
  Dimension dimension = Dimension::intensity;
  PatternLabel before;
  PatternLabel after;
  TransitionType type = TransitionType::stable;
  double delta_ai = 0.0;
};

enum class ThresholdMode { global, period };

struct TransitionInputs {
  // Pair metrics of every analysed community (any order).
  std::span<const SSCMetrics> metrics;
  // AI by community and year.
  const std::map<std::string, std::map<int, double>>* adoption = nullptr;
  std::span<const TransitionWindow> windows;
  ThresholdMode mode = ThresholdMode::period;
  // Used in global mode.
  std::optional<Thresholds> global;
};

struct TransitionOutput {
  std::vector<TransitionRecord> records;
  std::map<YearPair, Thresholds> thresholds;  // cuts used per anchor year pair
};

// Classifies every community at each window's two year pairs and types the
// change per dimension. Communities unclassified at either pair get no record.
inline TransitionOutput build_transitions(const TransitionInputs& in) {
  if (in.adoption == nullptr) throw DataError("transition analysis needs adoption intensities");
  if (in.mode == ThresholdMode::global && !in.global) throw DataError("global mode needs thresholds");
  std::map<YearPair, std::vector<const SSCMetrics*>> by_pair;
  for (const auto& m : in.metrics) by_pair[{m.t, m.t_prime}].push_back(&m);

  TransitionOutput out;
  auto thresholds_for = [&](const YearPair& yp) -> std::optional<Thresholds> {
    if (auto it = out.thresholds.find(yp); it != out.thresholds.end()) return it->second;
    if (in.mode == ThresholdMode::global) return out.thresholds[yp] = *in.global;
    auto it = by_pair.find(yp);
    if (it == by_pair.end()) return std::nullopt;
    std::vector<SSCMetrics> rows;
    for (const auto* m : it->second) rows.push_back(*m);
    try {
      return out.thresholds[yp] = period_thresholds(rows);
    } catch (const DataError&) {
      return std::nullopt;
    }
  };
  auto find_metrics = [&](const YearPair& yp, const std::string& id) -> const SSCMetrics* {
    auto it = by_pair.find(yp);
    if (it == by_pair.end()) return nullptr;
    for (const auto* m : it->second) {
      if (m->community_id == id) return m;
    }
    return nullptr;
  };

  std::vector<std::string> ids;
  for (const auto& m : in.metrics) ids.push_back(m.community_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  for (std::size_t w = 0; w < in.windows.size(); ++w) {
    const auto& win = in.windows[w];
    const auto th_before = thresholds_for(win.initial);
    const auto th_after = thresholds_for(win.final);
    if (!th_before || !th_after) continue;
    for (const auto& id : ids) {
      const auto* mb = find_metrics(win.initial, id);
      const auto* ma = find_metrics(win.final, id);
      if (mb == nullptr || ma == nullptr) continue;
      const auto lb = classify_pattern(pattern_values(*mb), *th_before);
      const auto la = classify_pattern(pattern_values(*ma), *th_after);
      if (!lb || !la) continue;
      const auto ai_it = in.adoption->find(id);
      if (ai_it == in.adoption->end()) continue;
      const auto start = ai_it->second.find(win.initial.first);
      const auto end = ai_it->second.find(win.final.second);
      if (start == ai_it->second.end() || end == ai_it->second.end()) continue;
      const double dai = delta_ai(start->second, end->second);
      for (auto dim : {Dimension::intensity, Dimension::range}) {
        out.records.push_back({id, w, win.name, dim, *lb, *la, transition_type(*lb, *la, dim), dai});
      }
    }
  }
  return out;
}

}  // namespace ssc
