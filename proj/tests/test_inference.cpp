#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "support.hpp"

using namespace ssc;

namespace {

// Sandwich covariance written out observation by observation.
Eigen::MatrixXd direct_cluster_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& e,
                                          const std::vector<std::size_t>& cluster) {
  const auto n = x.rows(), k = x.cols();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) xtx(a, b) += x(i, a) * x(i, b);
  const Eigen::MatrixXd inv = xtx.inverse();
  std::map<std::size_t, Eigen::VectorXd> score;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& s = score.try_emplace(cluster[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(k)).first->second;
    for (Eigen::Index a = 0; a < k; ++a) s[a] += x(i, a) * e[i];
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [g, s] : score)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) meat(a, b) += s[a] * s[b];
  const double G = static_cast<double>(score.size()), N = static_cast<double>(n), K = static_cast<double>(k);
  return G / (G - 1.0) * (N - 1.0) / (N - K) * inv * meat * inv;
}

struct Synthetic {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::size_t> cluster;
};

Synthetic clustered_data(std::size_t g, std::size_t per, const Eigen::VectorXd& beta, double noise, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto k = beta.size();
  Synthetic d;
  d.x.resize(static_cast<Eigen::Index>(g * per), k);
  d.y.resize(static_cast<Eigen::Index>(g * per));
  for (std::size_t c = 0; c < g; ++c) {
    const double u = rng.normal(0.0, noise);
    for (std::size_t j = 0; j < per; ++j) {
      const auto i = static_cast<Eigen::Index>(c * per + j);
      d.x(i, 0) = 1.0;
      for (Eigen::Index a = 1; a < k; ++a) d.x(i, a) = rng.normal();
      d.y[i] = d.x.row(i).dot(beta) + u + rng.normal(0.0, noise);
      d.cluster.push_back(c);
    }
  }
  return d;
}

std::vector<std::string> names(Eigen::Index k) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < k; ++j) out.push_back("b" + std::to_string(j));
  return out;
}

TransitionRecord record(std::string id, std::size_t w, TransitionType t, double dai = 0.0) {
  TransitionRecord r;
  r.community_id = std::move(id);
  r.window = w;
  r.window_name = "T" + std::to_string(w + 1);
  r.dimension = Dimension::intensity;
  r.type = t;
  r.delta_ai = dai;
  return r;
}

void add_cells(std::vector<TransitionRecord>& rows, std::size_t w, std::size_t stable, std::size_t up,
               std::size_t down) {
  auto add = [&](std::size_t n, TransitionType t) {
    for (std::size_t i = 0; i < n; ++i) rows.push_back(record("c" + std::to_string(rows.size()), w, t));
  };
  add(stable, TransitionType::stable);
  add(up, TransitionType::upward);
  add(down, TransitionType::downward);
}

}  // namespace

TEST(Regression, ExactDataRecoveredToMachinePrecision) {
  Eigen::VectorXd beta(4);
  beta << 8.85, 7.6, -9.87, 10.75;
  auto d = clustered_data(40, 3, beta, 0.0, 1);
  const auto fit = ols_cluster_robust(d.x, d.y, d.cluster, names(4));
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(fit.coefficients[j], beta[j], 1e-12 * 20.0);
}

TEST(Regression, ResidualsOrthogonalToDesign) {
  Eigen::VectorXd beta(5);
  beta << 1, 2, 3, 4, 5;
  const auto d = clustered_data(50, 4, beta, 2.0, 2);
  const auto fit = ols_cluster_robust(d.x, d.y, d.cluster, names(5));
  const Eigen::VectorXd e = d.y - d.x * fit.coefficients;
  const double scale = d.x.cwiseAbs().maxCoeff() * d.y.cwiseAbs().maxCoeff() * static_cast<double>(d.y.size());
  EXPECT_LT((d.x.transpose() * e).cwiseAbs().maxCoeff(), 1e-8 * scale);
}

TEST(Regression, SandwichMatchesDirectFormula) {
  Eigen::VectorXd beta(3);
  beta << 0.5, -1.0, 2.0;
  const auto d = clustered_data(60, 3, beta, 1.0, 3);
  const auto fit = ols_cluster_robust(d.x, d.y, d.cluster, names(3));
  const Eigen::VectorXd e = d.y - d.x * fit.coefficients;
  const auto v = direct_cluster_covariance(d.x, e, d.cluster);
  EXPECT_LT((fit.covariance - v).cwiseAbs().maxCoeff(), 1e-10 * v.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_GT(fit.std_errors[j], 0.0);
    EXPECT_NEAR(fit.p_values[j], dist::normal_two_sided_p(fit.coefficients[j] / fit.std_errors[j]), 1e-15);
  }
}

TEST(Regression, SingletonClustersReduceToHC1) {
  Eigen::VectorXd beta(3);
  beta << 1.0, 0.3, -0.7;
  auto d = clustered_data(80, 1, beta, 1.5, 4);
  for (std::size_t i = 0; i < d.cluster.size(); ++i) d.cluster[i] = i;
  const auto fit = ols_cluster_robust(d.x, d.y, d.cluster, names(3));
  const Eigen::VectorXd e = d.y - d.x * fit.coefficients;
  const Eigen::MatrixXd inv = (d.x.transpose() * d.x).inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) meat += e[i] * e[i] * d.x.row(i).transpose() * d.x.row(i);
  const double n = static_cast<double>(d.x.rows());
  const Eigen::MatrixXd hc1 = n / (n - 3.0) * inv * meat * inv;
  EXPECT_LT((fit.covariance - hc1).cwiseAbs().maxCoeff(), 1e-10 * hc1.cwiseAbs().maxCoeff());
}

TEST(Regression, RankDeficiencyNamesColumns) {
  Eigen::MatrixXd x(6, 3);
  x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10, 1, 6, 12;
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 4, 5, 7;
  const std::vector<std::size_t> cl{0, 1, 2, 3, 4, 5};
  try {
    ols_cluster_robust(x, y, cl, {"intercept", "dose", "double_dose"});
    FAIL() << "expected a rank error";
  } catch (const EstimationError& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(msg.find("dose") != std::string::npos) << msg;
  }
}

TEST(Regression, TransitionDesignHasNineColumns) {
  std::vector<TransitionRecord> rows;
  for (std::size_t w = 0; w < 3; ++w)
    for (auto t : {TransitionType::stable, TransitionType::upward, TransitionType::downward})
      for (int i = 0; i < 3; ++i) rows.push_back(record("c" + std::to_string(i), w, t, 1.0 + w + i));
  const auto d = transition_design(rows, Dimension::intensity, 3);
  EXPECT_EQ(d.x.cols(), 9);
  EXPECT_EQ(d.names.size(), 9u);
  EXPECT_EQ(d.names[8], "downward:T3");
  // Row for an upward transition in T3 has intercept, upward, T3 and upward:T3 set.
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.window == 2 && r.type == TransitionType::upward) {
      EXPECT_EQ(d.x.row(i).sum(), 4.0);
      EXPECT_EQ(d.x(i, 4), 1.0);
      EXPECT_EQ(d.x(i, 7), 1.0);
    }
  }
}

TEST(Wald, ScalarCaseIsSquaredZ) {
  Eigen::VectorXd beta(3);
  beta << 1.0, 0.2, 0.0;
  const auto d = clustered_data(50, 2, beta, 1.0, 5);
  const auto fit = ols_cluster_robust(d.x, d.y, d.cluster, names(3));
  const std::vector<std::size_t> one{1};
  const auto w = wald_joint_test(fit, one);
  const double z = fit.coefficients[1] / fit.std_errors[1];
  EXPECT_NEAR(w.statistic, z * z, 1e-10 * z * z);
  EXPECT_EQ(w.df, 1u);
  EXPECT_NEAR(w.p_value, fit.p_values[1], 1e-10);
}

TEST(Wald, InvariantToReparameterization) {
  Eigen::VectorXd beta(4);
  beta << 1.0, 0.3, -0.2, 0.5;
  const auto d = clustered_data(70, 3, beta, 1.0, 6);
  const auto fit = ols_cluster_robust(d.x, d.y, d.cluster, names(4));
  Eigen::MatrixXd x2 = d.x;
  x2.col(1) = d.x.col(1) + d.x.col(2);
  x2.col(2) = 2.0 * d.x.col(1) - d.x.col(2);
  const auto fit2 = ols_cluster_robust(x2, d.y, d.cluster, names(4));
  const std::vector<std::size_t> sub{1, 2};
  EXPECT_NEAR(wald_joint_test(fit, sub).statistic, wald_joint_test(fit2, sub).statistic,
              1e-9 * wald_joint_test(fit, sub).statistic);
}

TEST(Wald, StrongEffectAndNullCalibration) {
  Eigen::VectorXd strong(3);
  strong << 0.0, 1.0, 0.0;
  const auto d = clustered_data(100, 3, strong, 1.0, 7);
  const auto fit = ols_cluster_robust(d.x, d.y, d.cluster, names(3));
  const std::vector<std::size_t> one{1}, two{2};
  EXPECT_LT(wald_joint_test(fit, one).p_value, 0.001);

  // Under a true zero the p-values should look uniform: KS distance small.
  std::vector<double> ps;
  Eigen::VectorXd null(3);
  null << 0.5, 0.4, 0.0;
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    const auto s = clustered_data(80, 3, null, 1.0, 1000 + rep);
    ps.push_back(wald_joint_test(ols_cluster_robust(s.x, s.y, s.cluster, names(3)), two).p_value);
  }
  std::sort(ps.begin(), ps.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double n = static_cast<double>(ps.size());
    ks = std::max({ks, std::abs(ps[i] - static_cast<double>(i) / n), std::abs(ps[i] - static_cast<double>(i + 1) / n)});
  }
  // Kolmogorov critical value at the 1% level for n = 300.
  EXPECT_LT(ks, 1.63 / std::sqrt(300.0));
}

TEST(Wald, SingularSubsetThrows) {
  RegressionResult fit;
  fit.coefficients = Eigen::VectorXd::Ones(2);
  fit.covariance = Eigen::MatrixXd::Ones(2, 2);
  const std::vector<std::size_t> both{0, 1};
  EXPECT_THROW(wald_joint_test(fit, both), EstimationError);
}

TEST(Multinomial, IdenticalWindowsGiveUnitOdds) {
  std::vector<TransitionRecord> rows;
  add_cells(rows, 0, 40, 20, 10);
  add_cells(rows, 1, 40, 20, 10);
  const std::vector<std::string> w{"T1", "T2"};
  const auto res = multinomial_logit(rows, Dimension::intensity, w);
  EXPECT_NEAR(res.find(TransitionType::upward, "T2")->log_odds, 0.0, 1e-9);
  EXPECT_NEAR(res.find(TransitionType::downward, "T2")->odds_ratio, 1.0, 1e-9);
}

TEST(Multinomial, HalvedOddsRecovered) {
  std::vector<TransitionRecord> rows;
  add_cells(rows, 0, 60, 30, 12);
  add_cells(rows, 1, 120, 30, 18);
  const std::vector<std::string> w{"T1", "T2"};
  const auto res = multinomial_logit(rows, Dimension::intensity, w);
  EXPECT_NEAR(res.find(TransitionType::upward, "T2")->odds_ratio, 0.5, 1e-6);
  EXPECT_NEAR(res.find(TransitionType::upward, "intercept")->odds_ratio, 0.5, 1e-6);
  EXPECT_NEAR(res.find(TransitionType::downward, "T2")->odds_ratio, (18.0 / 120.0) / (12.0 / 60.0), 1e-6);
  for (const auto& t : res.terms) EXPECT_DOUBLE_EQ(t.odds_ratio, std::exp(t.log_odds));
  EXPECT_TRUE(res.converged);
}

TEST(Multinomial, SaturatedStandardErrors) {
  // For a saturated model the SE of a window log-odds contrast is
  // sqrt(1/u2 + 1/s2 + 1/u1 + 1/s1).
  std::vector<TransitionRecord> rows;
  add_cells(rows, 0, 50, 25, 15);
  add_cells(rows, 1, 80, 20, 30);
  const std::vector<std::string> w{"T1", "T2"};
  const auto res = multinomial_logit(rows, Dimension::intensity, w);
  EXPECT_NEAR(res.find(TransitionType::upward, "T2")->std_error, std::sqrt(1.0 / 20 + 1.0 / 80 + 1.0 / 25 + 1.0 / 50),
              1e-6);
}

TEST(Multinomial, GradientSmallAndLikelihoodMonotone) {
  CounterRng rng(9);
  const Eigen::Index n = 400;
  Eigen::MatrixXd x(n, 3);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    x(i, 2) = rng.normal();
    const double e1 = std::exp(0.3 + 0.8 * x(i, 1)), e2 = std::exp(-0.5 + 0.6 * x(i, 2));
    const double u = rng.uniform() * (1.0 + e1 + e2);
    y[static_cast<std::size_t>(i)] = u < 1.0 ? 0 : u < 1.0 + e1 ? 1 : 2;
  }
  const auto fit = fit_multinomial_logit(x, y, 3);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(fit.gradient_norm, 1e-6);
  double prev = -1e300;
  for (int iters = 1; iters <= fit.iterations; ++iters) {
    const auto partial = fit_multinomial_logit(x, y, 3, 0.0, iters);
    EXPECT_GE(partial.log_likelihood, prev - 1e-9);
    prev = partial.log_likelihood;
  }
}

TEST(Multinomial, SeparationNamesEmptyCell) {
  std::vector<TransitionRecord> rows;
  add_cells(rows, 0, 30, 10, 5);
  add_cells(rows, 1, 30, 0, 5);
  const std::vector<std::string> w{"T1", "T2"};
  try {
    multinomial_logit(rows, Dimension::intensity, w);
    FAIL() << "expected separation";
  } catch (const EstimationError& e) {
    EXPECT_EQ(std::string(e.what()), "separation: no 'upward' transitions in window T2");
  }
}

TEST(Anova, IdenticalGroupsShareLetter) {
  const std::vector<LabeledSample> g{{"a", {1, 2, 3, 4}}, {"b", {1, 2, 3, 4}}};
  const auto r = anova_tukey(g);
  EXPECT_NEAR(r.f, 0.0, 1e-12);
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(r.letters[0], r.letters[1]);
}

TEST(Anova, ConstantIdenticalGroupsAreDegenerate) {
  const std::vector<LabeledSample> g{{"a", {2, 2, 2}}, {"b", {2, 2, 2}}, {"c", {2, 2}}};
  const auto r = anova_tukey(g);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.letters, (std::vector<std::string>{"a", "a", "a"}));
}

TEST(Anova, WellSeparatedMeans) {
  CounterRng rng(10);
  LabeledSample a{"zero", {}}, b{"ten", {}};
  for (int i = 0; i < 30; ++i) {
    a.values.push_back(rng.normal(0.0, 0.1));
    b.values.push_back(rng.normal(10.0, 0.1));
  }
  const std::vector<LabeledSample> g{a, b};
  const auto r = anova_tukey(g);
  EXPECT_LT(r.p_value, 0.001);
  EXPECT_NE(r.letters[0], r.letters[1]);
}

TEST(Anova, OneGroupDiffers) {
  const std::vector<LabeledSample> g{{"x", {4.9, 5.1, 5.0, 4.8, 5.2}},
                                     {"y", {5.0, 5.2, 4.9, 5.1, 4.8}},
                                     {"z", {8.0, 8.1, 7.9, 8.2, 7.8}}};
  const auto r = anova_tukey(g);
  EXPECT_EQ(r.letters, (std::vector<std::string>{"a", "a", "b"}));
}

TEST(Anova, FMatchesHandComputation) {
  const std::vector<LabeledSample> g{{"a", {1, 2, 3}}, {"b", {4, 5, 6}}, {"c", {7, 8, 9}}};
  // Between SS = 3 * (4 + 0 + 4) = 54 on 2 df, within SS = 6 on 6 df.
  const auto r = anova_tukey(g);
  EXPECT_NEAR(r.f, 27.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.df_between, 2.0);
  EXPECT_DOUBLE_EQ(r.df_within, 6.0);
  // F(2, 6) survival at 27 is (1 + 2*27/6)^(-3).
  EXPECT_NEAR(r.p_value, std::pow(1.0 + 2.0 * 27.0 / 6.0, -3.0), 1e-10);
}

TEST(Distributions, StudentizedRangeTableValues) {
  EXPECT_NEAR(dist::qtukey(0.95, 3, 20.0), 3.578, 2e-3);
  EXPECT_NEAR(dist::qtukey(0.95, 2, 10.0), 3.151, 2e-3);
  EXPECT_NEAR(dist::qtukey(0.95, 4, 30.0), 3.845, 2e-3);
  EXPECT_NEAR(dist::ptukey(dist::qtukey(0.9, 5, 12.0), 5, 12.0), 0.9, 1e-8);
  // Two groups: q = sqrt(2) |t|.
  EXPECT_NEAR(dist::ptukey(std::sqrt(2.0) * 1.959963984540054, 2, 1e6), 0.95, 1e-4);
}

TEST(Distributions, ChiSquaredAndF) {
  EXPECT_NEAR(dist::chi_squared_sf(3.841458820694124, 1.0), 0.05, 1e-10);
  EXPECT_NEAR(dist::chi_squared_sf(2.0, 2.0), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(dist::f_sf(1.0, 4.0, 4.0), 0.5, 1e-12);
}

TEST(MannWhitney, ExactSeparatedSamples) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto r = mann_whitney(a, b);
  EXPECT_EQ(r.u_a, 0.0);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, 0.1, 1e-12);
}

TEST(MannWhitney, IdenticalSamplesGiveOne) {
  const std::vector<double> a{1, 2, 3, 4}, big(30, 2.5);
  EXPECT_NEAR(mann_whitney(a, a).p_value, 1.0, 1e-12);
  EXPECT_NEAR(mann_whitney(big, big).p_value, 1.0, 1e-12);
}

TEST(MannWhitney, UStatisticsSumToProduct) {
  CounterRng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(1 + rng.below(40)), b(1 + rng.below(40));
    for (auto& v : a) v = static_cast<double>(rng.below(10));
    for (auto& v : b) v = static_cast<double>(rng.below(10));
    const auto r = mann_whitney(a, b);
    EXPECT_DOUBLE_EQ(r.u_a + r.u_b, static_cast<double>(a.size() * b.size()));
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(MannWhitney, NormalApproximationOnLargeSamples) {
  std::vector<double> a, b;
  for (int i = 0; i < 25; ++i) {
    a.push_back(i);
    b.push_back(i + 100);
  }
  const auto r = mann_whitney(a, b);
  EXPECT_FALSE(r.exact);
  // U = 0, mean 312.5, variance 25*25*51/12 with no ties.
  const double z = (312.5 - 0.5) / std::sqrt(25.0 * 25.0 * 51.0 / 12.0);
  EXPECT_NEAR(r.p_value, std::erfc(z / std::sqrt(2.0)), 1e-12);
}
