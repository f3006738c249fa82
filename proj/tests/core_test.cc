#include "lafb/core.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.h"

namespace lafb {
namespace {

using testing::CountSchema;
using testing::Record;

TEST(ValidateLogTest, WellFormedRecordsPassThrough) {
  InteractionLog log = {Record("u1", "a", 1.0, {0, 1, 2, 3}),
                        Record("u1", "b", 2.0, {1, 1, 2, 3}),
                        Record("u2", "a", 0.5, {0, 0, 0, 0})};
  const LogValidation v = ValidateLog(log, CountSchema(4));
  EXPECT_TRUE(v.ok());
  EXPECT_EQ(v.records, log);
}

TEST(ValidateLogTest, ZeroScoreIsReportedWithIndex) {
  InteractionLog log = {Record("u1", "a", 1.0, {0, 0}),
                        Record("u1", "b", 0.0, {0, 0})};
  const LogValidation v = ValidateLog(log, CountSchema(2));
  ASSERT_EQ(v.errors.size(), 1u);
  EXPECT_EQ(v.errors[0].index, 1u);
  EXPECT_EQ(v.errors[0].message, "non-positive URPS at index 1");
  EXPECT_TRUE(v.records.empty());
}

TEST(ValidateLogTest, ArityMismatch) {
  InteractionLog log = {Record("u1", "a", 1.0, {0, 0, 0})};
  const LogValidation v = ValidateLog(log, CountSchema(4));
  ASSERT_EQ(v.errors.size(), 1u);
  EXPECT_NE(v.errors[0].message.find("arity mismatch"), std::string::npos);
}

TEST(ValidateLogTest, CollectsEveryError) {
  InteractionLog log = {Record("u1", "a", -1.0, {0}),
                        Record("u1", "b", 1.0, {std::nan("")}),
                        Record("u1", "c", 1.0, {0}, 0)};
  const LogValidation v = ValidateLog(log, CountSchema(1));
  ASSERT_EQ(v.errors.size(), 3u);
  EXPECT_EQ(v.errors[0].index, 0u);
  EXPECT_EQ(v.errors[1].index, 1u);
  EXPECT_EQ(v.errors[2].index, 2u);
}

TEST(PopularityTest, CountsItems) {
  InteractionLog log = {Record("u1", "A", 1, {}), Record("u2", "A", 1, {}),
                        Record("u3", "A", 1, {}), Record("u1", "B", 1, {})};
  const PopularityTable t = ComputePopularity(log);
  EXPECT_EQ(t.ItemCount("A"), 3u);
  EXPECT_EQ(t.ItemCount("B"), 1u);
  EXPECT_EQ(t.ItemCount("C"), 0u);
}

TEST(PopularityTest, EmptyLog) {
  const PopularityTable t = ComputePopularity({});
  EXPECT_TRUE(t.item_counts.empty());
  EXPECT_TRUE(t.creator_counts.empty());
}

TEST(PopularityTest, SumsCreatorAcrossItems) {
  InteractionLog log = {Record("u1", "A", 1, {}, 1, 1, "c"),
                        Record("u2", "A", 1, {}, 1, 1, "c"),
                        Record("u1", "B", 1, {}, 1, 1, "c")};
  EXPECT_EQ(ComputePopularity(log).CreatorCount("c"), 3u);
}

TEST(FeatureSchemaTest, RejectsMismatchedLengths) {
  EXPECT_THROW(FeatureSchema({"a", "b"}, {FeatureKind::kCount},
                             {Monotonicity::kIncreasing, Monotonicity::kIncreasing}),
               ValidationError);
}

TEST(FeatureSchemaTest, IndexOfAndHash) {
  const FeatureSchema s = CountSchema(3);
  EXPECT_EQ(s.IndexOf("f2"), 2u);
  EXPECT_THROW(s.IndexOf("zzz"), ValidationError);
  EXPECT_EQ(s.Hash().size(), 16u);
  EXPECT_EQ(s.Hash(), CountSchema(3).Hash());
  EXPECT_NE(s.Hash(), CountSchema(2).Hash());
}

TEST(PearsonTest, KnownValues) {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {2, 4, 6, 8};
  const std::vector<double> z = {8, 6, 4, 2};
  EXPECT_NEAR(PearsonCorrelation(x, y), 1.0, 1e-12);
  EXPECT_NEAR(PearsonCorrelation(x, z), -1.0, 1e-12);
  const std::vector<double> c = {1, 1, 1, 1};
  EXPECT_TRUE(std::isnan(PearsonCorrelation(x, c)));
}

}  // namespace
}  // namespace lafb
