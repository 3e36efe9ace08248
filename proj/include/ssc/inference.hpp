#pragma once

// Statistical layer: OLS with community-clustered sandwich covariance and
// Wald tests, multinomial logit by Newton-Raphson, one-way ANOVA with Tukey
// HSD and compact letter display, and the Mann-Whitney U test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssc/distributions.hpp"
#include "ssc/error.hpp"
#include "ssc/patterns.hpp"

namespace ssc {

// ---------------------------------------------------------------------------
// OLS with cluster-robust covariance

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // cluster-robust
  Eigen::VectorXd std_errors;
  Eigen::VectorXd z;
  Eigen::VectorXd p_values;  // two-sided, normal reference
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  std::string reference = "normal";
};

// V = c (X'X)^-1 [sum_g (X_g' e_g)(X_g' e_g)'] (X'X)^-1,
// c = G/(G-1) * (N-1)/(N-k).
inline RegressionResult ols_cluster_robust(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           std::span<const std::size_t> cluster, std::vector<std::string> names) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = static_cast<std::size_t>(x.cols());
  if (static_cast<std::size_t>(y.size()) != n || cluster.size() != n) {
    throw DataError("design, response and cluster lengths differ");
  }
  if (names.size() != k) throw DataError("one name per design column is required");
  if (n <= k) throw EstimationError("more observations than columns are required");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (static_cast<std::size_t>(qr.rank()) < k) {
    std::string cols;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < static_cast<Eigen::Index>(k); ++j) {
      cols += (cols.empty() ? "" : ", ") + names[static_cast<std::size_t>(perm[j])];
    }
    throw EstimationError("design matrix is rank deficient; collinear columns: " + cols);
  }

  std::map<std::size_t, std::size_t> cluster_slot;
  for (auto c : cluster) cluster_slot.emplace(c, cluster_slot.size());
  const std::size_t g = cluster_slot.size();
  if (g < 2) throw EstimationError("cluster-robust covariance needs at least two clusters");

  RegressionResult res;
  res.names = std::move(names);
  res.n_obs = n;
  res.n_clusters = g;
  res.coefficients = qr.solve(y);
  const Eigen::VectorXd resid = y - x * res.coefficients;

  const Eigen::MatrixXd bread = (x.transpose() * x).inverse();
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto slot = static_cast<Eigen::Index>(cluster_slot.at(cluster[i]));
    scores.row(slot) += resid[static_cast<Eigen::Index>(i)] * x.row(static_cast<Eigen::Index>(i));
  }
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const double dg = static_cast<double>(g);
  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(k);
  const double factor = dg / (dg - 1.0) * (dn - 1.0) / (dn - dk);
  res.covariance = factor * bread * meat * bread;
  res.std_errors = res.covariance.diagonal().cwiseSqrt();
  res.z = res.coefficients.cwiseQuotient(res.std_errors);
  res.p_values.resize(static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k); ++j) {
    res.p_values[j] = dist::normal_two_sided_p(res.z[j]);
  }
  return res;
}

struct WaldResult {
  double statistic = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
};

// W = b' V^-1 b on the chosen coefficients; chi-square with |subset| df.
inline WaldResult wald_joint_test(const RegressionResult& fit, std::span<const std::size_t> subset) {
  if (subset.empty()) throw DataError("Wald test needs a non-empty coefficient subset");
  const auto m = static_cast<Eigen::Index>(subset.size());
  Eigen::VectorXd b(m);
  Eigen::MatrixXd v(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto ia = static_cast<Eigen::Index>(subset[static_cast<std::size_t>(a)]);
    if (ia >= fit.coefficients.size()) throw DataError("Wald subset index out of range");
    b[a] = fit.coefficients[ia];
    for (Eigen::Index c = 0; c < m; ++c) {
      v(a, c) = fit.covariance(ia, static_cast<Eigen::Index>(subset[static_cast<std::size_t>(c)]));
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw EstimationError("sub-covariance of the Wald subset is singular");
  WaldResult out;
  out.statistic = b.dot(lu.solve(b));
  out.df = subset.size();
  out.p_value = dist::chi_squared_sf(out.statistic, static_cast<double>(out.df));
  return out;
}

// Design for the transition regression: intercept, upward, downward, one
// dummy per window after the first, then upward and downward interactions
// with each of those window dummies. Reference: stable in the first window.
inline std::vector<std::string> transition_design_names(std::size_t n_windows) {
  std::vector<std::string> names{"intercept", "upward", "downward"};
  for (std::size_t w = 1; w < n_windows; ++w) names.push_back("T" + std::to_string(w + 1));
  for (std::size_t w = 1; w < n_windows; ++w) {
    names.push_back("upward:T" + std::to_string(w + 1));
    names.push_back("downward:T" + std::to_string(w + 1));
  }
  return names;
}

struct TransitionDesign {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::size_t> cluster;
  std::vector<std::string> names;
};

inline TransitionDesign transition_design(std::span<const TransitionRecord> rows, Dimension dim,
                                          std::size_t n_windows) {
  std::vector<const TransitionRecord*> kept;
  for (const auto& r : rows) {
    if (r.dimension == dim) kept.push_back(&r);
  }
  TransitionDesign d;
  d.names = transition_design_names(n_windows);
  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto k = static_cast<Eigen::Index>(d.names.size());
  d.x = Eigen::MatrixXd::Zero(n, k);
  d.y.resize(n);
  std::map<std::string, std::size_t> ids;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *kept[static_cast<std::size_t>(i)];
    if (r.window >= n_windows) throw DataError("transition record window out of range");
    const double up = r.type == TransitionType::upward ? 1.0 : 0.0;
    const double down = r.type == TransitionType::downward ? 1.0 : 0.0;
    d.x(i, 0) = 1.0;
    d.x(i, 1) = up;
    d.x(i, 2) = down;
    if (r.window > 0) {
      const auto w = static_cast<Eigen::Index>(r.window);
      d.x(i, 2 + w) = 1.0;
      const auto base = static_cast<Eigen::Index>(2 + n_windows) + 2 * (w - 1);
      d.x(i, base) = up;
      d.x(i, base + 1) = down;
    }
    d.y[i] = r.delta_ai;
    d.cluster.push_back(ids.emplace(r.community_id, ids.size()).first->second);
  }
  return d;
}

inline RegressionResult transition_regression(std::span<const TransitionRecord> rows, Dimension dim,
                                              std::size_t n_windows = 3) {
  auto d = transition_design(rows, dim, n_windows);
  return ols_cluster_robust(d.x, d.y, d.cluster, std::move(d.names));
}

// ---------------------------------------------------------------------------
// Multinomial logit

struct MultinomialFit {
  // coefficients(j, c): predictor j for non-reference category c.
  Eigen::MatrixXd coefficients;
  Eigen::MatrixXd std_errors;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
};

namespace detail {

// Row-wise probabilities with the reference category in column 0.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& beta) {
  const Eigen::MatrixXd eta = x * beta;
  Eigen::MatrixXd p(eta.rows(), eta.cols() + 1);
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double mx = std::max(0.0, eta.row(i).maxCoeff());
    double denom = std::exp(-mx);
    for (Eigen::Index c = 0; c < eta.cols(); ++c) denom += std::exp(eta(i, c) - mx);
    p(i, 0) = std::exp(-mx) / denom;
    for (Eigen::Index c = 0; c < eta.cols(); ++c) p(i, c + 1) = std::exp(eta(i, c) - mx) / denom;
  }
  return p;
}

inline double multinomial_loglik(const Eigen::MatrixXd& p, std::span<const int> y) {
  double ll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ll += std::log(p(static_cast<Eigen::Index>(i), y[i]));
  return ll;
}

}  // namespace detail

// Maximum likelihood by Newton steps with step halving. `y` holds category
// codes in [0, n_categories) with 0 as the reference. Stops when the
// gradient max-norm drops below `tol` or after `max_iter` iterations.
inline MultinomialFit fit_multinomial_logit(const Eigen::MatrixXd& x, std::span<const int> y, int n_categories,
                                            double tol = 1e-8, int max_iter = 100) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index c = n_categories - 1;
  if (static_cast<std::size_t>(n) != y.size()) throw DataError("design and outcome lengths differ");
  if (c < 1) throw DataError("multinomial logit needs at least two categories");
  const Eigen::Index dim = p * c;

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(p, c);
  Eigen::MatrixXd prob = detail::softmax_rows(x, beta);
  double ll = detail::multinomial_loglik(prob, y);
  MultinomialFit fit;
  Eigen::MatrixXd hess(dim, dim);
  Eigen::VectorXd grad(dim);

  auto derivatives = [&]() {
    grad.setZero();
    hess.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto xi = x.row(i);
      for (Eigen::Index a = 0; a < c; ++a) {
        const double ya = y[static_cast<std::size_t>(i)] == a + 1 ? 1.0 : 0.0;
        grad.segment(a * p, p) += (ya - prob(i, a + 1)) * xi.transpose();
        for (Eigen::Index b = 0; b < c; ++b) {
          const double w = prob(i, a + 1) * ((a == b ? 1.0 : 0.0) - prob(i, b + 1));
          hess.block(a * p, b * p, p, p) += w * (xi.transpose() * xi);
        }
      }
    }
  };

  for (fit.iterations = 0; fit.iterations < max_iter; ++fit.iterations) {
    derivatives();
    fit.gradient_norm = grad.cwiseAbs().maxCoeff();
    if (fit.gradient_norm < tol) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) throw EstimationError("multinomial logit Hessian is singular");
    const Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      Eigen::MatrixXd trial = beta;
      for (Eigen::Index a = 0; a < c; ++a) trial.col(a) += scale * step.segment(a * p, p);
      const Eigen::MatrixXd trial_prob = detail::softmax_rows(x, trial);
      const double trial_ll = detail::multinomial_loglik(trial_prob, y);
      // Near the optimum the gain is below rounding; accept ties within it.
      if (trial_ll >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        beta = trial;
        prob = trial_prob;
        ll = trial_ll;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }
  if (!fit.converged) {
    derivatives();
    fit.gradient_norm = grad.cwiseAbs().maxCoeff();
    fit.converged = fit.gradient_norm < tol;
  }
  fit.coefficients = beta;
  fit.log_likelihood = ll;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(hess);
  fit.std_errors = Eigen::MatrixXd::Constant(p, c, std::numeric_limits<double>::quiet_NaN());
  if (lu.isInvertible()) {
    const Eigen::MatrixXd cov = lu.inverse();
    for (Eigen::Index a = 0; a < c; ++a) {
      for (Eigen::Index j = 0; j < p; ++j) fit.std_errors(j, a) = std::sqrt(cov(a * p + j, a * p + j));
    }
  }
  return fit;
}

inline Eigen::MatrixXd multinomial_probabilities(const Eigen::MatrixXd& x, const Eigen::MatrixXd& beta) {
  return detail::softmax_rows(x, beta);
}

struct MLMTerm {
  TransitionType outcome = TransitionType::upward;
  std::string term;  // "intercept" or a window name
  double log_odds = 0.0;
  double odds_ratio = 1.0;
  double std_error = 0.0;
  double p_value = 1.0;
};

struct MLMResult {
  std::vector<MLMTerm> terms;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t n_obs = 0;

  const MLMTerm* find(TransitionType outcome, std::string_view term) const {
    for (const auto& t : terms) {
      if (t.outcome == outcome && t.term == term) return &t;
    }
    return nullptr;
  }
};

// Transition type on window dummies (saturated in window). Reference
// outcome: stable; reference window: the first one.
inline MLMResult multinomial_logit(std::span<const TransitionRecord> rows, Dimension dim,
                                   std::span<const std::string> window_names) {
  const std::size_t n_windows = window_names.size();
  if (n_windows < 2) throw DataError("multinomial logit needs at least two windows");
  std::vector<const TransitionRecord*> kept;
  for (const auto& r : rows) {
    if (r.dimension == dim) kept.push_back(&r);
  }
  const std::vector<TransitionType> all{TransitionType::stable, TransitionType::upward, TransitionType::downward};
  std::map<std::pair<std::size_t, TransitionType>, std::size_t> cells;
  std::map<TransitionType, std::size_t> totals;
  std::vector<std::size_t> per_window(n_windows, 0);
  for (const auto* r : kept) {
    if (r->window >= n_windows) throw DataError("transition record window out of range");
    ++cells[{r->window, r->type}];
    ++totals[r->type];
    ++per_window[r->window];
  }
  if (!totals.count(TransitionType::stable)) throw EstimationError("reference outcome 'stable' is absent");
  if (per_window[0] == 0) throw EstimationError("reference window " + window_names[0] + " is absent");
  std::vector<TransitionType> outcomes{TransitionType::stable};
  for (auto t : {TransitionType::upward, TransitionType::downward}) {
    if (totals.count(t)) outcomes.push_back(t);
  }
  if (outcomes.size() < 2) throw EstimationError("multinomial logit needs at least two outcome categories");
  for (std::size_t w = 0; w < n_windows; ++w) {
    if (per_window[w] == 0) throw EstimationError("window " + window_names[w] + " has no observations");
    for (auto t : outcomes) {
      if (!cells.count({w, t})) {
        throw EstimationError(std::string("separation: no '") + to_string(t) + "' transitions in window " +
                              window_names[w]);
      }
    }
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  const auto p = static_cast<Eigen::Index>(n_windows);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
  std::vector<int> y(kept.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *kept[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    if (r.window > 0) x(i, static_cast<Eigen::Index>(r.window)) = 1.0;
    y[static_cast<std::size_t>(i)] =
        static_cast<int>(std::find(outcomes.begin(), outcomes.end(), r.type) - outcomes.begin());
  }
  const auto fit = fit_multinomial_logit(x, y, static_cast<int>(outcomes.size()));
  MLMResult res;
  res.log_likelihood = fit.log_likelihood;
  res.iterations = fit.iterations;
  res.converged = fit.converged;
  res.n_obs = kept.size();
  for (std::size_t c = 1; c < outcomes.size(); ++c) {
    for (std::size_t j = 0; j < n_windows; ++j) {
      MLMTerm t;
      t.outcome = outcomes[c];
      t.term = j == 0 ? "intercept" : window_names[j];
      t.log_odds = fit.coefficients(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c - 1));
      t.odds_ratio = std::exp(t.log_odds);
      t.std_error = fit.std_errors(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c - 1));
      t.p_value = dist::normal_two_sided_p(t.log_odds / t.std_error);
      res.terms.push_back(t);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// One-way ANOVA with Tukey HSD

struct LabeledSample {
  std::string label;
  std::vector<double> values;
};

struct TukeyComparison {
  std::size_t a = 0;
  std::size_t b = 0;
  double mean_difference = 0.0;  // mean[a] - mean[b]
  double q = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

struct AnovaResult {
  double f = 0.0;
  double p_value = 1.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double ms_within = 0.0;
  double q_critical = 0.0;
  bool degenerate = false;  // zero within-group variance and equal means
  std::vector<double> means;
  std::vector<TukeyComparison> comparisons;
  std::vector<std::string> letters;  // compact letter display per group
};

// Compact letter display by insert-and-absorb: groups that share a letter are
// not significantly different. Letters are ordered by the first group (in
// input order) that carries them.
inline std::vector<std::string> compact_letters(std::size_t n_groups, std::span<const TukeyComparison> comparisons) {
  std::vector<std::vector<bool>> cols{std::vector<bool>(n_groups, true)};
  for (const auto& cmp : comparisons) {
    if (!cmp.significant) continue;
    std::vector<std::vector<bool>> next;
    for (auto& col : cols) {
      if (col[cmp.a] && col[cmp.b]) {
        auto without_a = col;
        without_a[cmp.a] = false;
        auto without_b = col;
        without_b[cmp.b] = false;
        next.push_back(std::move(without_a));
        next.push_back(std::move(without_b));
      } else {
        next.push_back(col);
      }
    }
    // Absorb columns contained in another column.
    std::vector<std::vector<bool>> kept;
    for (std::size_t i = 0; i < next.size(); ++i) {
      bool absorbed = false;
      for (std::size_t j = 0; j < next.size() && !absorbed; ++j) {
        if (i == j) continue;
        bool subset = true;
        for (std::size_t g = 0; g < n_groups; ++g) {
          if (next[i][g] && !next[j][g]) subset = false;
        }
        if (subset && (next[i] != next[j] || j < i)) absorbed = true;
      }
      if (!absorbed) kept.push_back(next[i]);
    }
    cols = std::move(kept);
  }
  auto first_group = [&](const std::vector<bool>& col) {
    return static_cast<std::size_t>(std::find(col.begin(), col.end(), true) - col.begin());
  };
  std::sort(cols.begin(), cols.end(), [&](const auto& a, const auto& b) {
    const auto fa = first_group(a), fb = first_group(b);
    if (fa != fb) return fa < fb;
    return a > b;
  });
  std::vector<std::string> letters(n_groups);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const char letter = static_cast<char>('a' + static_cast<int>(c % 26));
    for (std::size_t g = 0; g < n_groups; ++g) {
      if (cols[c][g]) letters[g] += letter;
    }
  }
  return letters;
}

inline AnovaResult anova_tukey(std::span<const LabeledSample> groups, double alpha = 0.05) {
  const std::size_t k = groups.size();
  if (k < 2) throw DataError("ANOVA needs at least two groups");
  std::size_t n_total = 0;
  double grand = 0.0;
  AnovaResult res;
  for (const auto& g : groups) {
    if (g.values.size() < 2) throw DataError("ANOVA group '" + g.label + "' needs at least two observations");
    const double s = std::accumulate(g.values.begin(), g.values.end(), 0.0);
    res.means.push_back(s / static_cast<double>(g.values.size()));
    grand += s;
    n_total += g.values.size();
  }
  grand /= static_cast<double>(n_total);
  double ss_between = 0.0, ss_within = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& v = groups[i].values;
    ss_between += static_cast<double>(v.size()) * (res.means[i] - grand) * (res.means[i] - grand);
    for (double x : v) ss_within += (x - res.means[i]) * (x - res.means[i]);
  }
  res.df_between = static_cast<double>(k - 1);
  res.df_within = static_cast<double>(n_total - k);
  res.ms_within = ss_within / res.df_within;
  const double ms_between = ss_between / res.df_between;
  const double scale = std::max(std::abs(grand), 1.0);
  const bool zero_within = res.ms_within <= 1e-24 * scale * scale;
  const bool equal_means = ss_between <= 1e-24 * scale * scale * static_cast<double>(n_total);
  if (zero_within && equal_means) {
    res.degenerate = true;
    res.f = 0.0;
    res.p_value = 1.0;
  } else if (zero_within) {
    res.f = std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
  } else {
    res.f = ms_between / res.ms_within;
    res.p_value = dist::f_sf(res.f, res.df_between, res.df_within);
  }
  res.q_critical = dist::tukey_critical(1.0 - alpha, static_cast<int>(k), res.df_within);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      TukeyComparison cmp{a, b, res.means[a] - res.means[b]};
      const double se = std::sqrt(0.5 * res.ms_within *
                                  (1.0 / static_cast<double>(groups[a].values.size()) +
                                   1.0 / static_cast<double>(groups[b].values.size())));
      if (res.degenerate || cmp.mean_difference == 0.0) {
        cmp.q = 0.0;
        cmp.p_value = 1.0;
      } else if (zero_within) {
        cmp.q = std::numeric_limits<double>::infinity();
        cmp.p_value = 0.0;
      } else {
        cmp.q = std::abs(cmp.mean_difference) / se;
        cmp.p_value = 1.0 - dist::ptukey(cmp.q, static_cast<int>(k), res.df_within);
      }
      cmp.significant = cmp.q > res.q_critical;
      res.comparisons.push_back(cmp);
    }
  }
  res.letters = compact_letters(k, res.comparisons);
  return res;
}

// ---------------------------------------------------------------------------
// Mann-Whitney U

struct MannWhitneyResult {
  double u_a = 0.0;
  double u_b = 0.0;
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

inline constexpr std::size_t kMannWhitneyExactLimit = 20;

// Exact permutation distribution of the midrank sum when n_a + n_b <= 20,
// otherwise the normal approximation with tie and continuity corrections.
inline MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("Mann-Whitney needs two non-empty samples");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(n);
  for (std::size_t i = 0; i < na; ++i) pooled.emplace_back(a[i], i);
  for (std::size_t i = 0; i < nb; ++i) pooled.emplace_back(b[i], na + i);
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) rank[pooled[t].second] = mid;
    const double len = static_cast<double>(j - i);
    tie_term += len * len * len - len;
    i = j;
  }
  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += rank[i];
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(n);
  MannWhitneyResult res;
  res.u_a = ra - dna * (dna + 1.0) / 2.0;
  res.u_b = dna * dnb - res.u_a;
  const double expected = dna * (dn + 1.0) / 2.0;
  const double observed_dev = std::abs(ra - expected);

  if (n <= kMannWhitneyExactLimit) {
    res.exact = true;
    std::size_t extreme = 0, total = 0;
    const std::uint32_t limit = 1u << n;
    std::uint32_t mask = (1u << na) - 1u;
    while (mask < limit) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) s += rank[i];
      }
      if (std::abs(s - expected) >= observed_dev - 1e-9) ++extreme;
      ++total;
      // Next subset of the same size (Gosper's hack).
      const std::uint32_t c = mask & (~mask + 1u);
      const std::uint32_t r = mask + c;
      if (r == 0) break;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
    res.p_value = static_cast<double>(extreme) / static_cast<double>(total);
    return res;
  }
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    res.p_value = 1.0;
    return res;
  }
  const double dev = std::max(0.0, std::abs(res.u_a - dna * dnb / 2.0) - 0.5);
  res.p_value = std::min(1.0, dist::normal_two_sided_p(dev / std::sqrt(var)));
  return res;
}

}  // namespace ssc
