#include "lafb/baselines.h"

#include <algorithm>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

namespace lafb {
namespace {

constexpr Stratum kLow = Stratum::kLow;
constexpr Stratum kMed = Stratum::kMedium;
constexpr Stratum kHigh = Stratum::kHigh;

TEST(LogPopTest, Examples) {
  EXPECT_DOUBLE_EQ(LogPopPenalize(2.5, 0.0, 0.7), 2.5);
  EXPECT_DOUBLE_EQ(LogPopPenalize(2.5, 99.0, 0.0), 2.5);
  EXPECT_DOUBLE_EQ(LogPopPenalize(4.0, 3.0, 1.0), 1.0);
}

TEST(QuotaRerankTest, PermissiveQuotaIsIdentity) {
  const std::vector<std::size_t> order = {3, 1, 0, 2};
  const std::vector<Stratum> strata = {kHigh, kLow, kHigh, kMed};
  const auto out = QuotaRerank(order, strata, StratumQuotas{}, 4);
  EXPECT_EQ(out, order);
}

TEST(QuotaRerankTest, HighQuotaAdmitsTwoThenAppends) {
  // Four high-familiarity candidates, high quota 0.5 of a budget of 4.
  const std::vector<std::size_t> order = {0, 1, 2, 3};
  const std::vector<Stratum> strata(4, kHigh);
  StratumQuotas quotas;
  quotas.share = {1.0, 1.0, 0.5};
  const auto out = QuotaRerank(order, strata, quotas, 4);
  EXPECT_EQ(out, order);
}

TEST(QuotaRerankTest, PromotesUnderQuotaStrata) {
  const std::vector<std::size_t> order = {0, 1, 2, 3, 4, 5};
  const std::vector<Stratum> strata = {kHigh, kHigh, kHigh, kLow, kMed, kLow};
  StratumQuotas quotas;
  quotas.share = {1.0, 1.0, 0.25};
  // Budget 4: one high admitted, then 3, 4, 5; the rest follow by score.
  const auto out = QuotaRerank(order, strata, quotas, 4);
  EXPECT_EQ(out, (std::vector<std::size_t>{0, 3, 4, 5, 1, 2}));
}

TEST(QuotaRerankTest, EmptySlate) {
  EXPECT_TRUE(QuotaRerank({}, {}, StratumQuotas{}, 10).empty());
}

TEST(QuotaRerankTest, AlwaysAPermutation) {
  std::vector<std::size_t> order(20);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Stratum> strata;
  for (int i = 0; i < 20; ++i) strata.push_back(static_cast<Stratum>(i % 3));
  StratumQuotas quotas;
  quotas.share = {0.5, 0.3, 0.2};
  auto out = QuotaRerank(order, strata, quotas, 10);
  std::sort(out.begin(), out.end());
  EXPECT_EQ(out, order);
}

TEST(QuotasTest, Validation) {
  StratumQuotas q;
  q.share = {0.2, 0.2, 0.2};
  EXPECT_THROW(q.Validate(), ValidationError);
  q.share = {1.2, 0.0, 0.0};
  EXPECT_THROW(q.Validate(), ValidationError);
}

TEST(ItemCentricTest, PopularityStrataMirrorUserCentric) {
  const std::array<double, 2> terciles = {2.0, 5.0};
  const std::vector<double> popularity = {9, 9, 9, 9};
  const auto strata = PopularityStrata(popularity, terciles);
  EXPECT_EQ(strata, std::vector<Stratum>(4, kHigh));
  const std::vector<std::size_t> order = {0, 1, 2, 3};
  StratumQuotas quotas;
  quotas.share = {1.0, 1.0, 0.5};
  EXPECT_EQ(ItemCentricRerank(order, strata, quotas, 4), order);
  EXPECT_EQ(ItemCentricRerank(order, strata, StratumQuotas{}, 4), order);
  EXPECT_TRUE(ItemCentricRerank({}, {}, quotas, 4).empty());
}

TEST(ItemCentricTest, TiesFallToLowerStratum) {
  const std::array<double, 2> terciles = {2.0, 5.0};
  const std::vector<double> popularity = {2.0, 2.5, 5.0, 5.5};
  EXPECT_EQ(PopularityStrata(popularity, terciles),
            (std::vector<Stratum>{kLow, kMed, kMed, kHigh}));
}

TEST(UserCentricTest, StrataFollowBucketThirds) {
  const BucketEdges edges(5, {{1, 2, 3, 4}});
  const std::vector<double> values = {0, 1, 2, 3, 4};
  EXPECT_EQ(FamiliarityStrata(values, edges, 0),
            (std::vector<Stratum>{kLow, kLow, kMed, kMed, kHigh}));
}

TEST(StaticBoostTest, Examples) {
  BoostRule rule;
  const std::vector<double> fresh = {0.0};
  const std::vector<double> seen = {4.0};
  EXPECT_DOUBLE_EQ(StaticBoost(2.0, fresh, rule), 2.6);
  EXPECT_DOUBLE_EQ(StaticBoost(2.0, seen, rule), 2.0);
  rule.multiplier = 1.0;
  EXPECT_DOUBLE_EQ(StaticBoost(2.0, fresh, rule), 2.0);
}

}  // namespace
}  // namespace lafb
