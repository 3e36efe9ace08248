#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace ssc;

namespace {

SynthConfig square_config(Process p, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.id = "sq";
  cfg.process = p;
  cfg.polygon = rectangle(0, 0, 400, 400);
  cfg.counts = split_counts(200, Timeline::standard());
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Synth, EventsInsideAndDeterministic) {
  for (auto p : {Process::cstr, Process::thomas, Process::contagion}) {
    const auto cfg = square_config(p, 5);
    const auto a = generate(cfg), b = generate(cfg);
    ASSERT_EQ(a.events().size(), b.events().size());
    for (std::size_t i = 0; i < a.events().size(); ++i) {
      EXPECT_EQ(a.events()[i].location, b.events()[i].location);
      EXPECT_EQ(a.events()[i].panel_area, b.events()[i].panel_area);
      EXPECT_TRUE(point_in_polygon(cfg.polygon, a.events()[i].location));
      EXPECT_GT(a.events()[i].panel_area, 0.0);
    }
    auto other = cfg;
    other.seed = 6;
    EXPECT_NE(generate(other).events().front().location, a.events().front().location);
  }
}

TEST(Synth, CstrCountsPerYear) {
  const auto cfg = square_config(Process::cstr, 1);
  const auto c = gen_cstr(cfg);
  for (const auto& [year, n] : cfg.counts) {
    const auto got = std::count_if(c.events().begin(), c.events().end(), [y = year](const auto& e) { return e.year == y; });
    EXPECT_EQ(static_cast<std::size_t>(got), n) << year;
  }
}

TEST(Synth, PanelAreaMomentsMatch) {
  SynthConfig cfg;
  CounterRng rng(17);
  double s = 0.0, s2 = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double a = detail::panel_area(cfg, 2012, rng);
    s += a;
    s2 += a * a;
  }
  const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
  EXPECT_NEAR(mean, 4.31, 0.431);
  EXPECT_NEAR(sd, 2.55, 0.255);
  // Years between survey years use the latest earlier moments.
  cfg.panel = {{2012, {3.0, 0.0}}, {2020, {7.0, 0.0}}};
  EXPECT_EQ(detail::panel_area(cfg, 2017, rng), 3.0);
  EXPECT_EQ(detail::panel_area(cfg, 2022, rng), 7.0);
}

TEST(Synth, CstrPassesQuadratCountTest) {
  int passed = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    SynthConfig cfg = square_config(Process::cstr, 1000 + static_cast<std::uint64_t>(rep));
    cfg.counts = {{2012, 160}};
    const auto c = gen_cstr(cfg);
    double counts[16] = {};
    for (const auto& e : c.events()) {
      const int qx = std::min(3, static_cast<int>(e.location.x / 100.0));
      const int qy = std::min(3, static_cast<int>(e.location.y / 100.0));
      counts[qy * 4 + qx] += 1.0;
    }
    double chi2 = 0.0;
    for (double o : counts) chi2 += (o - 10.0) * (o - 10.0) / 10.0;
    passed += dist::chi_squared_sf(chi2, 15.0) > 0.001;
  }
  EXPECT_GE(passed, reps * 98 / 100);
}

TEST(Synth, ThomasWithoutOffspringIsParentsOnly) {
  auto cfg = square_config(Process::thomas, 3);
  cfg.offspring_mean = 0.0;
  const auto c = gen_thomas(cfg);
  std::size_t parents = 0;
  for (const auto& [y, n] : cfg.counts) parents += n;
  EXPECT_EQ(c.events().size(), parents);
}

TEST(Synth, ThomasOffspringStayNearParents) {
  auto cfg = square_config(Process::thomas, 4);
  cfg.counts = {{2012, 5}, {2015, 0}};
  cfg.offspring_mean = 50.0;
  cfg.sigma = 5.0;
  const auto c = gen_thomas(cfg);
  std::vector<Point> parents;
  for (const auto& e : c.events())
    if (e.year == 2012) parents.push_back(e.location);
  ASSERT_EQ(parents.size(), 5u);
  std::size_t kids = 0;
  for (const auto& e : c.events()) {
    if (e.year != 2015) continue;
    ++kids;
    double best = 1e300;
    for (const auto& p : parents) best = std::min(best, std::hypot(p.x - e.location.x, p.y - e.location.y));
    EXPECT_LT(best, 40.0);
  }
  EXPECT_GT(kids, 150u);
}

TEST(Synth, FullContagionWithZeroKernelCopiesLocations) {
  auto cfg = square_config(Process::contagion, 7);
  cfg.contagion_p = 1.0;
  cfg.kernel_range = 0.0;
  const auto c = gen_contagion(cfg);
  std::set<std::pair<double, double>> first;
  const int y0 = cfg.counts.front().first;
  for (const auto& e : c.events())
    if (e.year == y0) first.insert({e.location.x, e.location.y});
  for (const auto& e : c.events()) EXPECT_TRUE(first.count({e.location.x, e.location.y})) << e.id;
}

TEST(Synth, InvalidConfigsRejected) {
  auto cfg = square_config(Process::thomas, 1);
  cfg.sigma = 0.0;
  EXPECT_THROW(generate(cfg), DataError);
  cfg = square_config(Process::cstr, 1);
  cfg.panel.clear();
  EXPECT_THROW(generate(cfg), DataError);
}

TEST(SplitCounts, SumsToTotalAndFollowsIncrements) {
  for (std::size_t total : {0u, 1u, 7u, 50u, 333u, 1000u}) {
    const auto s = split_counts(total, Timeline::standard());
    ASSERT_EQ(s.size(), 7u);
    std::size_t sum = 0;
    for (const auto& [y, n] : s) sum += n;
    EXPECT_EQ(sum, total);
  }
  const auto s = split_counts(25354, Timeline::standard());
  EXPECT_EQ(s.front().second, 4847u);
  EXPECT_EQ(s.back().second, 25354u - 20987u);
}

TEST(Region, IdsSizesAndSeparation) {
  RegionConfig rc;
  rc.n_communities = 9;
  rc.min_events = 60;
  rc.max_events = 80;
  rc.seed = 3;
  const auto region = generate_region(rc, Timeline::standard());
  ASSERT_EQ(region.size(), 9u);
  std::set<std::string> ids;
  for (const auto& c : region) {
    ids.insert(c.id());
    EXPECT_GE(c.events().size(), 60u);
    EXPECT_LE(c.events().size(), 80u);
    const double a = polygon_area(c.polygon());
    EXPECT_GE(a, rc.min_area * (1 - 1e-9));
    EXPECT_LE(a, rc.max_area * (1 + 1e-9));
  }
  EXPECT_EQ(ids.size(), 9u);
  EXPECT_TRUE(ids.count("C0000"));
  rc.min_p = 1.0;
  rc.max_p = 0.0;
  EXPECT_THROW(generate_region(rc, Timeline::standard()), DataError);
}
