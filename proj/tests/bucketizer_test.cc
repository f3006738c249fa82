#include "lafb/bucketizer.h"

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "lafb/rng.h"
#include "test_support.h"

namespace lafb {
namespace {

using testing::CountSchema;
using testing::Record;

std::vector<std::size_t> BucketSizes(const std::vector<double>& values,
                                     const BucketEdges& edges) {
  std::vector<std::size_t> sizes(edges.Buckets(0), 0);
  for (double v : values) ++sizes.at(edges.Assign(0, v));
  return sizes;
}

TEST(FitEdgesTest, EqualMassOnOneToHundred) {
  std::vector<double> values(100);
  std::iota(values.begin(), values.end(), 1.0);
  const std::vector<std::vector<double>> columns = {values};
  const BucketEdges edges = FitEdges(columns, 5);
  // Order statistics at ranks 20, 40, 60, 80 (0-based).
  EXPECT_EQ(edges.cuts(0), (std::vector<double>{21, 41, 61, 81}));
  for (std::size_t n : BucketSizes(values, edges)) EXPECT_EQ(n, 20u);
}

TEST(FitEdgesTest, ConstantFeatureCollapsesToOneBucket) {
  const std::vector<std::vector<double>> columns = {
      std::vector<double>(50, 7.0)};
  const BucketEdges edges = FitEdges(columns, 5);
  EXPECT_EQ(edges.Buckets(0), 1u);
  EXPECT_TRUE(edges.IsDegenerate(0));
  EXPECT_EQ(edges.Assign(0, -100.0), 0u);
  EXPECT_EQ(edges.Assign(0, 100.0), 0u);
}

TEST(FitEdgesTest, TiedCutsCollapse) {
  const std::vector<double> values = {1, 1, 1, 1, 2, 3};
  const std::vector<std::vector<double>> columns = {values};
  const BucketEdges edges = FitEdges(columns, 3);
  // Ranks 2 and 4 give 1 (the minimum, dropped) and 2.
  EXPECT_EQ(edges.cuts(0), (std::vector<double>{2}));
  EXPECT_LE(edges.Buckets(0), 3u);
  for (double v : {-1.0, 1.0, 1.5, 2.0, 3.0, 99.0}) {
    EXPECT_LT(edges.Assign(0, v), edges.Buckets(0));
  }
}

TEST(FitEdgesTest, QuantileBalanceOnTieFreeData) {
  Rng rng(11);
  for (std::size_t n : {97u, 500u, 1001u}) {
    for (std::size_t k : {2u, 3u, 5u, 7u}) {
      std::vector<double> values(n);
      for (double& v : values) v = rng.Normal();
      const std::vector<std::vector<double>> columns = {values};
      const BucketEdges edges = FitEdges(columns, k);
      ASSERT_EQ(edges.Buckets(0), k);
      for (std::size_t size : BucketSizes(values, edges)) {
        EXPECT_GE(size + 1, n / k);
        EXPECT_LE(size, (n + k - 1) / k + 1);
      }
    }
  }
}

TEST(FitEdgesTest, RejectsEmptyLogAndSingleBucket) {
  EXPECT_THROW(FitEdges(InteractionLog{}, CountSchema(1), 5), ValidationError);
  InteractionLog log = {Record("u", "i", 1.0, {1.0})};
  EXPECT_THROW(FitEdges(log, CountSchema(1), 1), ValidationError);
}

TEST(AssignCellTest, Conventions) {
  const BucketEdges edges(3, {{20, 40}, {2, 5}});
  EXPECT_EQ(edges.Assign(0, 5.0), 0u);
  EXPECT_EQ(edges.Assign(0, 20.0), 1u);
  EXPECT_EQ(edges.Assign(0, 40.0), 2u);
  const std::vector<double> b = {25, 3};
  EXPECT_EQ(AssignCell(b, edges), (CellIndex{1, 1}));
}

TEST(AdjustmentTableTest, CellMeanWithoutSmoothing) {
  const BucketEdges edges(2, {{1}});
  InteractionLog log = {Record("u", "a", 2.0, {0}), Record("u", "b", 2.0, {0}),
                        Record("u", "c", 2.0, {0}), Record("u", "d", 6.0, {1})};
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, 0.0, std::nullopt, 0);
  ASSERT_NE(t.FindCell({0}), nullptr);
  EXPECT_DOUBLE_EQ(t.FindCell({0})->factor, 2.0);
  EXPECT_EQ(t.FindCell({0})->count, 3u);
  EXPECT_DOUBLE_EQ(t.global_mean(), 3.0);
}

TEST(AdjustmentTableTest, EmptyBucketTakesGlobalMeanUnderPrior) {
  const BucketEdges edges(3, {{1, 2}});
  InteractionLog log = {Record("u", "a", 2.0, {0}), Record("u", "b", 4.0, {2})};
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, 1.0, std::nullopt, 0);
  EXPECT_EQ(t.Marginal(0, 1).count, 0u);
  EXPECT_DOUBLE_EQ(t.Marginal(0, 1).factor, t.global_mean());
}

TEST(AdjustmentTableTest, ClipCapsExtremeCell) {
  // 99 records of 1.0 and one of 11.0: global mean 1.1, outlier cell mean 10x.
  const BucketEdges edges(2, {{1}});
  InteractionLog log;
  for (int i = 0; i < 99; ++i) log.push_back(Record("u", "a", 1.0, {0}));
  log.push_back(Record("u", "b", 11.0, {1}));
  const AdjustmentTable t =
      AdjustmentTable::Fit(log, edges, 0.0, ClipBounds{0.5, 2.0}, 0);
  EXPECT_NEAR(t.global_mean(), 1.1, 1e-12);
  EXPECT_NEAR(t.FindCell({1})->factor, 2.2, 1e-12);
}

TEST(AdjustmentTableTest, SmoothingFormula) {
  const BucketEdges edges(2, {{1}});
  InteractionLog log = {Record("u", "a", 1.0, {0}), Record("u", "b", 3.0, {0}),
                        Record("u", "c", 8.0, {1})};
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, 2.0, std::nullopt, 0);
  const double gm = 4.0;
  EXPECT_NEAR(t.FindCell({0})->factor, (4.0 + 2 * gm) / 4.0, 1e-12);
  EXPECT_NEAR(t.FindCell({1})->factor, (8.0 + 2 * gm) / 3.0, 1e-12);
}

TEST(LookupTest, PopulatedCellUsesCellFactor) {
  const BucketEdges edges(2, {{1}});
  InteractionLog log;
  for (int i = 0; i < 100; ++i) log.push_back(Record("u", "a", 3.0, {1}));
  for (int i = 0; i < 100; ++i) log.push_back(Record("u", "a", 1.0, {0}));
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, 0.0, std::nullopt, 10);
  const std::vector<double> b = {1};
  EXPECT_DOUBLE_EQ(t.Lookup(b, 10), 3.0);
}

TEST(LookupTest, SparseCellBacksOffToGeometricMeanOfMarginals) {
  // Cell (1,1) holds 2 records. Feature 0 bucket 1 averages 1.5 over 12
  // records; feature 1 bucket 1 averages 2.0 over 12 records.
  const BucketEdges edges(2, {{1}, {1}});
  InteractionLog log;
  for (int i = 0; i < 2; ++i) log.push_back(Record("u", "x", 1.5, {1, 1}));
  for (int i = 0; i < 10; ++i) log.push_back(Record("u", "y", 1.5, {1, 0}));
  for (int i = 0; i < 10; ++i) log.push_back(Record("u", "z", 2.1, {0, 1}));
  for (int i = 0; i < 20; ++i) log.push_back(Record("u", "w", 1.0, {0, 0}));
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, 0.0, std::nullopt, 10);
  ASSERT_NEAR(t.Marginal(0, 1).factor, 1.5, 1e-12);
  ASSERT_NEAR(t.Marginal(1, 1).factor, 2.0, 1e-12);
  const std::vector<double> b = {1, 1};
  EXPECT_NEAR(t.Lookup(b, 10), std::sqrt(3.0), 1e-12);
}

TEST(LookupTest, UnseenCellWithEmptyMarginalsFallsBackToGlobalMean) {
  const BucketEdges edges(3, {{1, 2}, {1, 2}});
  InteractionLog log = {Record("u", "a", 2.0, {0, 0}),
                        Record("u", "b", 4.0, {1, 1})};
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, 0.0, std::nullopt, 1);
  const std::vector<double> b = {5, 5};
  EXPECT_DOUBLE_EQ(t.Lookup(b, 1), t.global_mean());
}

TEST(LookupTest, MonotoneDataGivesMonotoneFactors) {
  Rng rng(3);
  InteractionLog log;
  for (int i = 0; i < 5000; ++i) {
    const double b = rng.Uniform(0.0, 10.0);
    log.push_back(Record("u", "i", 1.0 + b * b, {b}));
  }
  const BucketEdges edges = FitEdges(log, CountSchema(1), 5);
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, BucketizerConfig{});
  double previous = 0.0;
  for (std::uint32_t bucket = 0; bucket < edges.Buckets(0); ++bucket) {
    const CellStats* cell = t.FindCell({bucket});
    ASSERT_NE(cell, nullptr);
    EXPECT_GE(cell->factor, previous);
    previous = cell->factor;
  }
}

TEST(AdjustmentTableTest, JsonRoundTrip) {
  const FeatureSchema schema = CountSchema(2);
  Rng rng(5);
  InteractionLog log;
  for (int i = 0; i < 400; ++i) {
    const double a = static_cast<double>(rng.Index(6));
    const double b = static_cast<double>(rng.Index(4));
    log.push_back(Record("u", "i", 1.0 + a + 0.3 * b + rng.Uniform(), {a, b}));
  }
  const BucketEdges edges = FitEdges(log, schema, 3);
  const AdjustmentTable t = AdjustmentTable::Fit(log, edges, BucketizerConfig{});
  const AdjustmentTable back = AdjustmentTable::FromJson(t.ToJson(schema), &schema);
  EXPECT_EQ(back.edges(), t.edges());
  EXPECT_EQ(back.cell_count(), t.cell_count());
  for (const auto& r : log) {
    EXPECT_DOUBLE_EQ(back.Lookup(r.familiarity.span()),
                     t.Lookup(r.familiarity.span()));
  }
  const FeatureSchema other = testing::AffinitySchema(2);
  EXPECT_THROW(AdjustmentTable::FromJson(t.ToJson(schema), &other),
               ValidationError);
}

}  // namespace
}  // namespace lafb
