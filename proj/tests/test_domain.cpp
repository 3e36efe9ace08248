#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support.hpp"

using namespace ssc;

namespace {

CommunityInput square_community(const std::string& id, std::size_t n, int year = 2012) {
  CommunityInput c{id, rectangle(0, 0, 100, 100), {}};
  for (std::size_t i = 0; i < n; ++i) {
    c.events.push_back(fx::event(id + "-" + std::to_string(i), 1.0 + static_cast<double>(i % 90),
                                      1.0 + static_cast<double>(i / 90), year));
  }
  return c;
}

}  // namespace

TEST(Timeline, RejectsBadYears) {
  EXPECT_THROW(Timeline({2012}), DataError);
  EXPECT_THROW(Timeline({2012, 2012}), DataError);
  EXPECT_THROW(Timeline({2015, 2012}), DataError);
  EXPECT_EQ(Timeline::standard().span_years(), 10);
}

TEST(Cohorts, SevenYearTimelineGivesTwentyOnePairs) {
  const auto c = fx::random_community(1, 120);
  const auto pairs = build_cohorts(c, Timeline::standard());
  ASSERT_EQ(pairs.size(), 21u);
  for (const auto& p : pairs) {
    EXPECT_GT(p.t_prime, p.t);
    EXPECT_GE(p.lag(), 1);
    std::set<std::size_t> prior(p.prior_index.begin(), p.prior_index.end());
    std::size_t added = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& e = c.events()[i];
      if (e.year == p.t_prime) {
        ++added;
        EXPECT_FALSE(prior.count(i));
      }
      EXPECT_EQ(prior.count(i) == 1, e.year <= p.t);
    }
    EXPECT_EQ(added, p.added.size());
  }
}

TEST(Cohorts, TwoYearTimelineGivesOnePair) {
  Community c("x", rectangle(0, 0, 10, 10),
              {fx::event("a", 1, 1, 2012), fx::event("b", 2, 2, 2015), fx::event("c", 3, 3, 2015)});
  const auto pairs = build_cohorts(c, Timeline({2012, 2015}));
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].prior.size(), 1u);
  EXPECT_EQ(pairs[0].added.size(), 2u);
}

TEST(Community, EventOrderDoesNotMatter) {
  auto events = fx::random_community(3, 80).events();
  std::vector<PVInstallation> a(events.begin(), events.end());
  auto b = a;
  std::reverse(b.begin(), b.end());
  const Community ca("c", fx::star(3), a), cb("c", fx::star(3), b);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    EXPECT_EQ(ca.events()[i].id, cb.events()[i].id);
    EXPECT_EQ(ca.events()[i].location, cb.events()[i].location);
  }
}

TEST(Validation, FortyNineEventsAreExcluded) {
  const std::vector<CommunityInput> in{square_community("small", 49), square_community("ok", 50)};
  const auto rep = validate_dataset(in, Timeline::standard());
  EXPECT_TRUE(rep.is_excluded("small"));
  EXPECT_FALSE(rep.is_excluded("ok"));
  EXPECT_FALSE(rep.has_hard_errors());
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].kind, ViolationKind::too_few_events);
  const auto kept = included_communities(in, rep, Timeline::standard());
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id(), "ok");
}

TEST(Validation, CleanDatasetHasNoViolations) {
  const std::vector<CommunityInput> in{square_community("a", 60), square_community("b", 70, 2020)};
  EXPECT_TRUE(validate_dataset(in, Timeline::standard()).violations.empty());
}

TEST(Validation, UnknownYearIsReported) {
  auto c = square_community("a", 60);
  c.events[3].year = 2013;
  const std::vector<CommunityInput> in{c};
  const auto rep = validate_dataset(in, Timeline::standard());
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].kind, ViolationKind::unknown_year);
  EXPECT_EQ(rep.violations[0].event_id, "a-3");
  EXPECT_EQ(rep.communities[0].valid_events, 59u);
}

TEST(Validation, OutsideAndNonPositiveArea) {
  auto c = square_community("a", 60);
  c.events[0].location = {500, 500};
  c.events[1].panel_area = 0.0;
  const std::vector<CommunityInput> in{c};
  const auto rep = validate_dataset(in, Timeline::standard());
  std::multiset<ViolationKind> kinds;
  for (const auto& v : rep.violations) kinds.insert(v.kind);
  EXPECT_EQ(kinds.count(ViolationKind::outside_polygon), 1u);
  EXPECT_EQ(kinds.count(ViolationKind::nonpositive_panel_area), 1u);
  const auto kept = included_communities(in, rep, Timeline::standard());
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].size(), 58u);
}

TEST(Validation, MalformedPolygonIsHardError) {
  CommunityInput c = square_community("bow", 60);
  c.polygon = Polygon{{{0, 0}, {100, 100}, {100, 0}, {0, 100}}};
  const std::vector<CommunityInput> in{c, square_community("ok", 60)};
  const auto rep = validate_dataset(in, Timeline::standard());
  EXPECT_TRUE(rep.has_hard_errors());
  EXPECT_TRUE(rep.is_excluded("bow"));
  EXPECT_EQ(rep.violations.front().kind, ViolationKind::malformed_polygon);
}
