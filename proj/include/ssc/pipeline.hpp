#pragma once

// End-to-end batch run: validation, cross-type L curves with CSTR envelopes
// for every community and year pair, contagion metrics and their lag
// aggregates, adoption intensity, pattern labels, transitions, and the
// statistical tables. Every CSV starts with the hash of the run manifest.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssc/digest.hpp"
#include "ssc/domain.hpp"
#include "ssc/error.hpp"
#include "ssc/inference.hpp"
#include "ssc/io.hpp"
#include "ssc/metrics.hpp"
#include "ssc/null_models.hpp"
#include "ssc/parallel.hpp"
#include "ssc/patterns.hpp"
#include "ssc/stpp.hpp"

namespace ssc {

inline constexpr const char* kVersion = "1.0.0";

struct PipelineConfig {
  std::filesystem::path out_dir = "ssc_out";
  std::string polygons_source;  // recorded in the manifest only
  std::string events_source;
  std::uint64_t seed = 0;
  std::size_t n_sims = kDefaultSimulations;
  double grid_step = kDefaultGridStep;
  double alpha = 0.05;
  ThresholdMode mode = ThresholdMode::period;
  std::size_t jobs = 1;
  std::size_t min_events = kMinEvents;
  std::vector<int> timeline = {2012, 2015, 2016, 2017, 2020, 2021, 2022};
  std::vector<int> anchors = standard_anchor_years();
  bool write_curves = true;
};

inline const char* to_string(ThresholdMode m) noexcept { return m == ThresholdMode::global ? "global" : "period"; }

struct StageRecord {
  std::string name;
  std::string status;  // ok, failed, skipped
  double seconds = 0.0;
  std::string message;
};

struct PipelineResult {
  int exit_code = 0;  // 0 ok, 1 validation failure, 2 stage failure
  std::string manifest_hash;
  std::vector<StageRecord> stages;
  ValidationReport validation;
  std::vector<SSCMetrics> metrics;
  std::vector<TransitionRecord> transitions;
  std::vector<std::filesystem::path> files;  // every CSV written, in write order
};

// Config fields that determine the outputs, plus a digest of the dataset.
inline nlohmann::json manifest_identity(const Dataset& ds, const PipelineConfig& cfg) {
  nlohmann::json orphans = nlohmann::json::array();
  for (const auto& o : ds.orphans) orphans.push_back({o.feature_index, o.event_id, o.community_id});
  const std::string data = polygons_geojson(ds.communities).dump() + "\n" + events_geojson(ds.communities).dump() +
                           "\n" + orphans.dump();
  return {{"version", kVersion},
          {"dataset_sha256", sha256_hex(data)},
          {"seed", cfg.seed},
          {"n_sims", cfg.n_sims},
          {"grid_step", cfg.grid_step},
          {"alpha", cfg.alpha},
          {"threshold_mode", to_string(cfg.mode)},
          {"min_events", cfg.min_events},
          {"timeline", cfg.timeline},
          {"anchors", cfg.anchors}};
}

inline std::string manifest_hash(const Dataset& ds, const PipelineConfig& cfg) {
  return sha256_hex(manifest_identity(ds, cfg).dump());
}

namespace detail {

inline std::string safe_name(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

struct CommunityWork {
  std::optional<DistanceGrid> grid;
  EdgeProfileCache cache;
  std::vector<CohortPair> cohorts;
  std::vector<std::pair<double, std::vector<double>>> st_k;  // (tau, K on grid)
  std::string error;
};

struct PairWork {
  std::size_t community = 0;
  std::size_t pair = 0;
  std::optional<LCurve> curve;
  std::optional<EnvelopeSet> envelopes;
  SSCMetrics metrics;
};

class StageRunner {
 public:
  StageRunner(PipelineResult& result, std::filesystem::path manifest_path, nlohmann::json identity)
      : result_(result), path_(std::move(manifest_path)), identity_(std::move(identity)) {}

  // Runs one stage; a failure is recorded and reported as false.
  bool run(const std::string& name, const std::function<void()>& body) {
    const auto start = std::chrono::steady_clock::now();
    StageRecord rec{name, "ok", 0.0, ""};
    try {
      body();
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.message = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result_.stages.push_back(rec);
    if (rec.status == "failed") result_.exit_code = 2;
    flush();
    return rec.status == "ok";
  }

  void skip(const std::string& name, const std::string& why) {
    result_.stages.push_back({name, "skipped", 0.0, why});
    flush();
  }

  void flush() const {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : result_.stages) {
      stages.push_back({{"name", s.name}, {"status", s.status}, {"seconds", s.seconds}, {"message", s.message}});
    }
    nlohmann::json doc = identity_;
    doc["manifest_sha256"] = result_.manifest_hash;
    doc["stages"] = stages;
    write_json(path_, doc);
  }

 private:
  PipelineResult& result_;
  std::filesystem::path path_;
  nlohmann::json identity_;
};

struct GroupedSample {
  std::string family;
  std::vector<LabeledSample> groups;
};

}  // namespace detail

inline PipelineResult run_pipeline(const Dataset& ds, const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  PipelineResult result;
  auto identity = manifest_identity(ds, cfg);
  result.manifest_hash = sha256_hex(identity.dump());
  identity["inputs"] = {{"polygons", cfg.polygons_source}, {"events", cfg.events_source}};
  identity["jobs"] = cfg.jobs;
  fs::create_directories(cfg.out_dir);
  detail::StageRunner stages(result, cfg.out_dir / "manifest.json", identity);
  const std::string& hash = result.manifest_hash;
  auto save = [&](const CsvTable& t, const fs::path& rel) {
    t.save(cfg.out_dir / rel);
    result.files.push_back(cfg.out_dir / rel);
  };

  std::optional<Timeline> timeline;
  std::vector<Community> communities;

  // Validation --------------------------------------------------------------
  stages.run("validation", [&] {
    timeline.emplace(cfg.timeline);
    if (cfg.n_sims < kMinSimulations) {
      throw DataError("--sims must be at least " + std::to_string(kMinSimulations));
    }
    if (!(cfg.grid_step > 0.0)) throw DataError("grid step must be positive");
    result.validation = validate_dataset(ds.communities, *timeline, cfg.min_events);
    CsvTable v(hash, {"kind", "community_id", "event_id", "detail"});
    for (const auto& x : result.validation.violations) v.row(to_string(x.kind), x.community_id, x.event_id, x.detail);
    for (const auto& o : ds.orphans) {
      v.row("orphan_event", o.community_id, o.event_id, "feature " + std::to_string(o.feature_index));
    }
    save(v, "validation.csv");
    if (!result.validation.has_hard_errors()) {
      communities = included_communities(ds.communities, result.validation, *timeline);
    }
    CsvTable c(hash, {"community_id", "valid_events", "excluded", "area", "bbox_aspect", "max_chord", "r_c", "r_max",
                      "r_eff"});
    for (const auto& st : result.validation.communities) {
      auto it = std::find_if(communities.begin(), communities.end(),
                             [&](const Community& x) { return x.id() == st.community_id; });
      if (it == communities.end()) {
        c.row(st.community_id, st.valid_events, st.excluded, "", "", "", "", "", "");
      } else {
        const auto& g = it->geometry();
        c.row(st.community_id, st.valid_events, st.excluded, g.area, g.bbox_aspect, g.max_chord, g.r_c, g.r_max,
              g.r_eff);
      }
    }
    save(c, "communities.csv");
  });
  if (result.exit_code != 0) return result;
  if (result.validation.has_hard_errors() || communities.empty()) {
    result.exit_code = 1;
    stages.skip("estimation", result.validation.has_hard_errors() ? "malformed polygons in input"
                                                                  : "no community passes validation");
    return result;
  }

  // Estimation --------------------------------------------------------------
  std::vector<detail::CommunityWork> work(communities.size());
  std::vector<detail::PairWork> pairs;
  const EnvelopeConfig env_cfg{cfg.n_sims, cfg.seed, cfg.alpha};
  std::vector<double> taus;
  {
    std::set<int> lags;
    for (std::size_t a = 0; a < cfg.timeline.size(); ++a) {
      for (std::size_t b = a + 1; b < cfg.timeline.size(); ++b) lags.insert(cfg.timeline[b] - cfg.timeline[a]);
    }
    for (int h : lags) taus.push_back(h);
  }
  const bool estimated = stages.run("estimation", [&] {
    parallel_for(communities.size(), cfg.jobs, [&](std::size_t i) {
      const auto& c = communities[i];
      auto& w = work[i];
      w.cohorts = build_cohorts(c, *timeline);
      auto grid = DistanceGrid::up_to(c.r_eff(), cfg.grid_step);
      if (grid.empty()) return;
      w.grid = grid;
      w.cache = EdgeProfileCache::for_community(c, grid.max());
      for (double tau : taus) w.st_k.emplace_back(tau, k_function(c, *timeline, grid, tau, &w.cache));
    });
    for (std::size_t i = 0; i < communities.size(); ++i) {
      for (std::size_t p = 0; p < work[i].cohorts.size(); ++p) {
        auto& pw = pairs.emplace_back();
        pw.community = i;
        pw.pair = p;
      }
    }
    parallel_for(pairs.size(), cfg.jobs, [&](std::size_t k) {
      auto& pw = pairs[k];
      const auto& c = communities[pw.community];
      const auto& w = work[pw.community];
      const auto& cohort = w.cohorts[pw.pair];
      auto& m = pw.metrics;
      m.community_id = c.id();
      m.t = cohort.t;
      m.t_prime = cohort.t_prime;
      m.n_prior = cohort.prior.size();
      m.n_new = cohort.added.size();
      if (!w.grid) {
        m.flags = "grid_empty";
        return;
      }
      if (cohort.prior.empty() || cohort.added.empty()) {
        m.flags = cohort.prior.empty() ? "empty_prior" : "empty_new";
        return;
      }
      const auto est = make_cross_estimator(c, cohort, *w.grid, &w.cache);
      auto curve = l_function(est.estimate(cohort.added), *w.grid);
      curve.n_prior = m.n_prior;
      curve.n_new = m.n_new;
      curve.year_pair = std::make_pair(cohort.t, cohort.t_prime);
      pw.envelopes = build_envelopes(c, cohort, est, env_cfg);
      m = compute_pair_metrics(c.id(), curve, pw.envelopes->global, c.r_eff());
      pw.curve = std::move(curve);
    });
    for (const auto& pw : pairs) result.metrics.push_back(pw.metrics);

    CsvTable st(hash, {"community_id", "tau", "r", "K", "L"});
    for (std::size_t i = 0; i < communities.size(); ++i) {
      const auto& w = work[i];
      for (const auto& [tau, k] : w.st_k) {
        const auto l = l_function(k, *w.grid, tau);
        for (std::size_t j = 0; j < k.size(); ++j) st.row(communities[i].id(), tau, w.grid->r[j], k[j], l.values[j]);
      }
    }
    save(st, "st_curves.csv");

    if (cfg.write_curves) {
      for (const auto& pw : pairs) {
        if (!pw.curve) continue;
        const auto& cv = *pw.curve;
        const auto& env = *pw.envelopes;
        const auto flags = significance_flags(cv, env.global);
        const auto pflags = significance_flags(cv, env.pointwise);
        CsvTable t(hash, {"r", "L", "global_lower", "global_upper", "pointwise_lower", "pointwise_upper",
                          "global_flag", "pointwise_flag"});
        for (std::size_t j = 0; j < cv.values.size(); ++j) {
          t.row(cv.grid.r[j], cv.values[j], env.global.lower[j], env.global.upper[j], env.pointwise.lower[j],
                env.pointwise.upper[j], to_string(flags[j]), to_string(pflags[j]));
        }
        const auto& m = pw.metrics;
        save(t, fs::path("curves") / (detail::safe_name(m.community_id) + "_" + std::to_string(m.t) + "_" +
                                      std::to_string(m.t_prime) + ".csv"));
      }
    }

    CsvTable mt(hash, {"community_id", "t", "t_prime", "lag", "n_prior", "n_new", "ci", "r_abs", "r_rel", "he",
                       "flags"});
    for (const auto& m : result.metrics) {
      mt.row(m.community_id, m.t, m.t_prime, m.lag(), m.n_prior, m.n_new, m.ci, m.r_abs, m.r_rel, m.he, m.flags);
    }
    save(mt, "metrics.csv");
  });
  if (!estimated) return result;

  // Aggregation and adoption ------------------------------------------------
  std::map<std::string, std::map<std::string, LagAggregate>> aggregates;  // community -> metric -> aggregate
  std::map<std::string, std::map<int, double>> adoption;
  std::map<std::string, double> ati;
  stages.run("aggregation", [&] {
    std::map<std::string, std::vector<SSCMetrics>> by_community;
    for (const auto& m : result.metrics) by_community[m.community_id].push_back(m);
    const std::vector<std::pair<std::string, std::optional<double> SSCMetrics::*>> fields = {
        {"ci", &SSCMetrics::ci}, {"r_abs", &SSCMetrics::r_abs}, {"r_rel", &SSCMetrics::r_rel}, {"he", &SSCMetrics::he}};
    CsvTable ag(hash, {"community_id", "metric", "lag1", "lag2", "lag3", "lag4", "lag5", "mean"});
    for (const auto& c : communities) {
      const auto& rows = by_community[c.id()];
      for (const auto& [name, field] : fields) {
        const auto a = aggregate_metric(rows, field);
        aggregates[c.id()][name] = a;
        ag.row(c.id(), name, a.by_lag[0], a.by_lag[1], a.by_lag[2], a.by_lag[3], a.by_lag[4], a.overall);
      }
    }
    save(ag, "aggregated.csv");

    CsvTable ad(hash, {"community_id", "year", "ai"});
    std::vector<std::vector<double>> series;
    for (const auto& c : communities) {
      series.push_back(adoption_series(c, *timeline));
      for (std::size_t k = 0; k < timeline->size(); ++k) {
        adoption[c.id()][timeline->years()[k]] = series.back()[k];
        ad.row(c.id(), timeline->years()[k], series.back()[k]);
      }
    }
    save(ad, "adoption.csv");
    const auto idx = ati_index(series, timeline->years());
    CsvTable at(hash, {"community_id", "ati"});
    for (std::size_t i = 0; i < communities.size(); ++i) {
      ati[communities[i].id()] = idx[i];
      at.row(communities[i].id(), idx[i]);
    }
    save(at, "ati.csv");
  });

  // Patterns and transitions -----------------------------------------------
  std::map<std::string, PatternLabel> labels;
  const auto windows = transition_windows(cfg.anchors);
  const bool classified = stages.run("patterns", [&] {
    std::vector<PatternValues> community_values;
    std::vector<std::string> ids;
    for (const auto& c : communities) {
      const auto& a = aggregates.at(c.id());
      community_values.push_back({a.at("ci").overall, a.at("r_abs").overall, a.at("r_rel").overall});
      ids.push_back(c.id());
    }
    const auto global = mean_thresholds(community_values, ThresholdProvenance::fixed_global);
    CsvTable pt(hash, {"community_id", "ci_mean", "r_abs_mean", "r_rel_mean", "he_mean", "ati", "pattern"});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto label = classify_pattern(community_values[i], global);
      if (label) labels[ids[i]] = *label;
      pt.row(ids[i], community_values[i].ci, community_values[i].r_abs, community_values[i].r_rel,
             aggregates.at(ids[i]).at("he").overall, ati.count(ids[i]) ? std::optional(ati.at(ids[i])) : std::nullopt,
             label ? label->name() : std::string("unclassified"));
    }
    save(pt, "patterns.csv");

    TransitionInputs in;
    in.metrics = result.metrics;
    in.adoption = &adoption;
    in.windows = windows;
    in.mode = cfg.mode;
    in.global = global;
    auto out = build_transitions(in);
    result.transitions = out.records;

    CsvTable th(hash, {"scope", "ci_cut", "r_cut", "r_rel_cut", "provenance"});
    th.row("full_period", global.ci_cut, global.r_cut, global.r_rel_cut, to_string(global.provenance));
    for (const auto& [yp, t] : out.thresholds) {
      th.row(std::to_string(yp.first) + "-" + std::to_string(yp.second), t.ci_cut, t.r_cut, t.r_rel_cut,
             to_string(t.provenance));
    }
    save(th, "thresholds.csv");

    CsvTable tr(hash, {"community_id", "window", "initial", "final", "dimension", "before", "after", "type",
                       "delta_ai"});
    for (const auto& r : result.transitions) {
      const auto& w = windows[r.window];
      tr.row(r.community_id, r.window_name, std::to_string(w.initial.first) + "-" + std::to_string(w.initial.second),
             std::to_string(w.final.first) + "-" + std::to_string(w.final.second), to_string(r.dimension),
             r.before.name(), r.after.name(), to_string(r.type), r.delta_ai);
    }
    save(tr, "transitions.csv");
  });
  if (!classified) return result;

  // Inference ---------------------------------------------------------------
  stages.run("inference", [&] {
    std::vector<std::string> window_names;
    for (const auto& w : windows) window_names.push_back(w.name);

    CsvTable rg(hash, {"dimension", "term", "estimate", "std_error", "z", "p_value", "n_obs", "n_clusters",
                       "reference", "status"});
    CsvTable wd(hash, {"dimension", "test", "statistic", "df", "p_value", "status"});
    CsvTable ml(hash, {"dimension", "outcome", "term", "log_odds", "odds_ratio", "std_error", "p_value", "converged",
                       "status"});
    for (auto dim : {Dimension::intensity, Dimension::range}) {
      const std::string dn = to_string(dim);
      try {
        const auto fit = transition_regression(result.transitions, dim, windows.size());
        for (std::size_t j = 0; j < fit.names.size(); ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          rg.row(dn, fit.names[j], fit.coefficients[jj], fit.std_errors[jj], fit.z[jj], fit.p_values[jj], fit.n_obs,
                 fit.n_clusters, fit.reference, "ok");
        }
        std::map<std::string, std::vector<std::size_t>> tests;
        for (std::size_t j = 0; j < fit.names.size(); ++j) {
          const auto& n = fit.names[j];
          if (auto colon = n.find(':'); colon != std::string::npos) {
            tests["interactions"].push_back(j);
            tests["interactions_" + n.substr(colon + 1)].push_back(j);
          }
        }
        for (const auto& [name, subset] : tests) {
          try {
            const auto w = wald_joint_test(fit, subset);
            wd.row(dn, name, w.statistic, w.df, w.p_value, "ok");
          } catch (const Error& e) {
            wd.row(dn, name, "", "", "", e.what());
          }
        }
      } catch (const Error& e) {
        rg.row(dn, "", "", "", "", "", "", "", "", e.what());
      }
      try {
        const auto m = multinomial_logit(result.transitions, dim, window_names);
        for (const auto& t : m.terms) {
          ml.row(dn, to_string(t.outcome), t.term, t.log_odds, t.odds_ratio, t.std_error, t.p_value, m.converged, "ok");
        }
      } catch (const Error& e) {
        ml.row(dn, "", "", "", "", "", "", "", e.what());
      }
    }
    save(rg, "regression.csv");
    save(wd, "wald.csv");
    save(ml, "mlm.csv");

    // ANOVA families: CI across year pairs within each lag, and ATI and HE
    // across community patterns.
    std::vector<detail::GroupedSample> families;
    std::map<int, std::map<std::pair<int, int>, std::vector<double>>> ci_by_lag;
    for (const auto& m : result.metrics) {
      if (m.ci) ci_by_lag[m.lag()][{m.t, m.t_prime}].push_back(*m.ci);
    }
    for (const auto& [lag, groups] : ci_by_lag) {
      detail::GroupedSample fam{"ci_lag" + std::to_string(lag), {}};
      for (const auto& [yp, vals] : groups) {
        fam.groups.push_back({std::to_string(yp.first) + "-" + std::to_string(yp.second), vals});
      }
      families.push_back(std::move(fam));
    }
    const std::vector<std::string> pattern_order{"high-long", "high-short", "low-long", "low-short"};
    for (const std::string var : {"ati", "he"}) {
      detail::GroupedSample fam{var + "_by_pattern", {}};
      for (const auto& p : pattern_order) {
        LabeledSample g{p, {}};
        for (const auto& [id, label] : labels) {
          if (label.name() != p) continue;
          if (var == "ati") {
            g.values.push_back(ati.at(id));
          } else if (auto he = aggregates.at(id).at("he").overall) {
            g.values.push_back(*he);
          }
        }
        fam.groups.push_back(std::move(g));
      }
      families.push_back(std::move(fam));
    }
    CsvTable an(hash, {"family", "groups", "f", "df_between", "df_within", "p_value", "degenerate", "status"});
    CsvTable tk(hash, {"family", "group_a", "group_b", "mean_difference", "q", "p_value", "significant"});
    CsvTable lt(hash, {"family", "group", "n", "mean", "letters"});
    for (auto& fam : families) {
      std::vector<LabeledSample> kept;
      for (auto& g : fam.groups) {
        if (g.values.size() >= 2) kept.push_back(g);
      }
      if (kept.size() < 2) {
        an.row(fam.family, kept.size(), "", "", "", "", "", "skipped: fewer than two groups with two observations");
        continue;
      }
      try {
        const auto a = anova_tukey(kept);
        an.row(fam.family, kept.size(), a.f, a.df_between, a.df_within, a.p_value, a.degenerate, "ok");
        for (const auto& c : a.comparisons) {
          tk.row(fam.family, kept[c.a].label, kept[c.b].label, c.mean_difference, c.q, c.p_value, c.significant);
        }
        for (std::size_t g = 0; g < kept.size(); ++g) {
          lt.row(fam.family, kept[g].label, kept[g].values.size(), a.means[g], a.letters[g]);
        }
      } catch (const Error& e) {
        an.row(fam.family, kept.size(), "", "", "", "", "", e.what());
      }
    }
    save(an, "anova.csv");
    save(tk, "tukey.csv");
    save(lt, "tukey_letters.csv");

    // ATI of communities with a downward range transition in the last window
    // against those with an upward intensity transition there.
    CsvTable mw(hash, {"comparison", "n_a", "n_b", "u_a", "u_b", "p_value", "exact", "status"});
    const std::string last = windows.back().name;
    std::vector<double> a, b;
    for (const auto& r : result.transitions) {
      if (r.window_name != last) continue;
      if (r.dimension == Dimension::range && r.type == TransitionType::downward) a.push_back(ati.at(r.community_id));
      if (r.dimension == Dimension::intensity && r.type == TransitionType::upward) b.push_back(ati.at(r.community_id));
    }
    const std::string label = "ati_range_down_vs_intensity_up_" + last;
    if (a.empty() || b.empty()) {
      mw.row(label, a.size(), b.size(), "", "", "", "", "skipped: empty group");
    } else {
      const auto r = mann_whitney(a, b);
      mw.row(label, a.size(), b.size(), r.u_a, r.u_b, r.p_value, r.exact, "ok");
    }
    save(mw, "mann_whitney.csv");
  });
  return result;
}

}  // namespace ssc
