#include "lafb/metrics.h"

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "lafb/estimator.h"
#include "lafb/rng.h"
#include "test_support.h"

namespace lafb {
namespace {

using testing::CountSchema;
using testing::Record;

constexpr std::int64_t kT = 1'700'000'000;
constexpr std::int64_t kDay = 86'400;

Interaction Watch(std::string user, std::string item, std::int64_t t, double wt,
                  std::string creator = "c0") {
  return Record(std::move(user), std::move(item), 1.0, {0.0}, t, wt,
                std::move(creator));
}

class ConstantFactor final : public FactorModel {
 public:
  explicit ConstantFactor(double v) : v_(v) {}
  double Factor(std::span<const double>) const override { return v_; }
  double ReferenceMean() const override { return v_; }

 private:
  double v_;
};

TEST(NoveltyTest, FirstSessionIsAllNovel) {
  InteractionLog log = {Watch("u1", "a", kT, 5), Watch("u1", "b", kT + 1, 5),
                        Watch("u2", "a", kT, 3)};
  EXPECT_DOUBLE_EQ(*NovelWatchTimeShare(log), 1.0);
  EXPECT_DOUBLE_EQ(*FamiliarWatchTimeShare(log), 0.0);
}

TEST(NoveltyTest, WindowRuleByHand) {
  // A seen 3 days ago, B never, C seen 20 days ago; history carries no time.
  InteractionLog log = {Watch("u", "A", kT - 3 * kDay, 0),
                        Watch("u", "C", kT - 20 * kDay, 0),
                        Watch("u", "A", kT, 70), Watch("u", "B", kT + 1, 10),
                        Watch("u", "C", kT + 2, 20)};
  EXPECT_NEAR(*NovelWatchTimeShare(log, 14.0), 0.30, 1e-12);
  EXPECT_NEAR(*FamiliarWatchTimeShare(log, 14.0), 0.70, 1e-12);
}

TEST(NoveltyTest, ZeroWindowMakesEverythingNovel) {
  InteractionLog log = {Watch("u", "A", kT, 1), Watch("u", "A", kT + kDay, 4),
                        Watch("u", "A", kT + 2 * kDay, 5)};
  EXPECT_DOUBLE_EQ(*NovelWatchTimeShare(log, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(*FamiliarWatchTimeShare(log, 0.0), 0.0);
}

TEST(NoveltyTest, UnorderedLogUsesTimestamps) {
  InteractionLog log = {Watch("u", "A", kT + kDay, 4), Watch("u", "A", kT, 6)};
  const auto flags = NoveltyFlags(log, 14.0);
  EXPECT_FALSE(flags[0]);
  EXPECT_TRUE(flags[1]);
}

TEST(NoveltyTest, CreatorKey) {
  InteractionLog log = {Watch("u", "A", kT, 1, "c1"), Watch("u", "B", kT + 5, 1, "c1")};
  EXPECT_DOUBLE_EQ(*NovelWatchTimeShare(log, 14.0, NoveltyKey::kItem), 1.0);
  EXPECT_DOUBLE_EQ(*NovelWatchTimeShare(log, 14.0, NoveltyKey::kCreator), 0.5);
}

TEST(NoveltyTest, NoWatchTimeIsUndefined) {
  InteractionLog log = {Watch("u", "A", kT, 0)};
  EXPECT_FALSE(NovelWatchTimeShare(log).has_value());
}

TEST(EmergingTest, ExposureShares) {
  InteractionLog log;
  for (int i = 0; i < 10; ++i) {
    log.push_back(Watch("u", "i", kT + i, 1, i < 2 ? "new" : "old"));
  }
  EXPECT_DOUBLE_EQ(EmergingCreatorExposure(log, EmergingCreatorSet{}), 0.0);
  EXPECT_DOUBLE_EQ(EmergingCreatorExposure(log, EmergingCreatorSet{"new"}), 0.2);
  EXPECT_DOUBLE_EQ(EmergingCreatorExposure(log, EmergingCreatorSet{"new", "old"}),
                   1.0);
  EXPECT_THROW(EmergingCreatorExposure({}, EmergingCreatorSet{}), ValidationError);
}

TEST(EmergingTest, PercentileAndRecencyFlag) {
  CreatorRegistry creators;
  PopularityTable reference;
  for (int c = 0; c < 10; ++c) {
    creators.ids.push_back("c" + std::to_string(c));
    creators.recent.push_back(c % 2 == 0);
    for (int k = 0; k < c; ++k) reference.Record("i", creators.ids.back());
  }
  // Nearest rank: the 10th percentile of {0..9} is 0, the 30th is 2.
  EXPECT_EQ(EmergingCreators(reference, creators, 10.0), (EmergingCreatorSet{"c0"}));
  EXPECT_EQ(EmergingCreators(reference, creators, 30.0),
            (EmergingCreatorSet{"c0", "c2"}));
  creators.recent.assign(10, false);
  EXPECT_TRUE(EmergingCreators(reference, creators, 50.0).empty());
}

ArmSummary ConstantArm(std::string name, double novel_fraction) {
  ArmSummary s;
  s.name = std::move(name);
  for (int u = 0; u < 20; ++u) {
    s.users.push_back("u" + std::to_string(100 + u));
    UserAggregate agg;
    agg.watch_time = 10.0 * (u + 1);
    agg.novel_watch_time = novel_fraction * agg.watch_time;
    agg.impressions = 4;
    s.per_user.push_back(agg);
  }
  return s;
}

TEST(BootstrapTest, IdenticalArmsGiveZero) {
  const ArmSummary a = ConstantArm("a", 0.3);
  for (Metric m : kReportMetrics) {
    const DeltaEstimate d = BootstrapDelta(a, a, m, ReportScale(m), 200, 1);
    EXPECT_EQ(d.point, 0.0);
    EXPECT_TRUE(d.ContainsZero());
  }
}

TEST(BootstrapTest, ConstantMetricsResampleToThemselves) {
  const DeltaEstimate d =
      BootstrapDelta(ConstantArm("a", 0.2), ConstantArm("b", 0.5),
                     Metric::kNovelWtShare, DeltaScale::kDifference, 500, 3);
  EXPECT_NEAR(d.point, 0.3, 1e-12);
  EXPECT_NEAR(d.low, 0.3, 1e-12);
  EXPECT_NEAR(d.high, 0.3, 1e-12);
}

TEST(BootstrapTest, SingleReplicateIsDegenerate) {
  ArmSummary b = ConstantArm("b", 0.5);
  b.per_user[0].novel_watch_time = 0.0;
  const DeltaEstimate d = BootstrapDelta(ConstantArm("a", 0.2), b,
                                         Metric::kNovelWtShare,
                                         DeltaScale::kPercentPoints, 1, 3);
  EXPECT_EQ(d.low, d.point);
  EXPECT_EQ(d.high, d.point);
}

TEST(BootstrapTest, SameSeedSameInterval) {
  ArmSummary b = ConstantArm("b", 0.5);
  Rng rng(2);
  for (auto& u : b.per_user) u.novel_watch_time = rng.Uniform() * u.watch_time;
  const auto x = BootstrapDeltas(ConstantArm("a", 0.2), b, 300, 9);
  const auto y = BootstrapDeltas(ConstantArm("a", 0.2), b, 300, 9);
  for (std::size_t m = 0; m < 4; ++m) {
    EXPECT_EQ(x[m].low, y[m].low);
    EXPECT_EQ(x[m].high, y[m].high);
    EXPECT_LE(x[m].low, x[m].point);
    EXPECT_GE(x[m].high, x[m].point);
  }
}

TEST(ReportTest, ThreeArmsGiveThreeRowsWithZeroControl) {
  const std::vector<ArmSummary> arms = {ConstantArm("control", 0.2),
                                        ConstantArm("t1", 0.3),
                                        ConstantArm("t2", 0.4)};
  MetricsConfig config;
  config.bootstrap_replicates = 50;
  const MetricsReport report = BuildReport(arms, config);
  ASSERT_EQ(report.deltas.size(), 3u);
  for (const auto& d : report.Row("control").deltas) {
    EXPECT_EQ(d.point, 0.0);
    EXPECT_EQ(d.low, 0.0);
    EXPECT_EQ(d.high, 0.0);
  }
  EXPECT_NEAR(report.Row("t2").deltas[1].point, 20.0, 1e-9);
  const std::string csv = report.Table1Csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "method,emerging_creator_exposure_delta_pct,"
            "emerging_creator_exposure_delta_pct_low,"
            "emerging_creator_exposure_delta_pct_high,"
            "novel_wt_share_delta_pp,novel_wt_share_delta_pp_low,"
            "novel_wt_share_delta_pp_high,familiar_wt_share_delta_pp,"
            "familiar_wt_share_delta_pp_low,familiar_wt_share_delta_pp_high,"
            "overall_wt_delta_pct,overall_wt_delta_pct_low,"
            "overall_wt_delta_pct_high");
}

TEST(ReportTest, Scales) {
  EXPECT_EQ(ReportScale(Metric::kEmergingCreatorExposure), DeltaScale::kRelativePercent);
  EXPECT_EQ(ReportScale(Metric::kNovelWtShare), DeltaScale::kPercentPoints);
  EXPECT_EQ(ReportScale(Metric::kFamiliarWtShare), DeltaScale::kPercentPoints);
  EXPECT_EQ(ReportScale(Metric::kOverallWt), DeltaScale::kRelativePercent);
}

TEST(SummarizeTest, MomentsAndDeciles) {
  std::vector<double> v;
  for (int i = 1; i <= 11; ++i) v.push_back(i);
  const DistributionSummary s = Summarize(v);
  EXPECT_EQ(s.count, 11u);
  EXPECT_DOUBLE_EQ(s.mean, 6.0);
  EXPECT_DOUBLE_EQ(s.variance, 10.0);
  for (int d = 0; d < 9; ++d) EXPECT_NEAR(s.deciles[d], 2.0 + d, 1e-12);
}

InteractionLog InflatedLog(std::uint64_t seed, int n) {
  Rng rng(seed);
  InteractionLog log;
  for (int i = 0; i < n; ++i) {
    const double b = static_cast<double>(rng.Index(30));
    const double s = rng.Uniform(0.5, 1.5) * (1.0 + 0.6 * std::log1p(b));
    log.push_back(Record("u", "i", s, {b}));
  }
  return log;
}

TEST(ScoreDistributionTest, ExactMeanLevelsAreOne) {
  const InteractionLog log = InflatedLog(1, 6000);
  const BucketEdges edges = FitEdges(log, CountSchema(1), 5);
  const AdjustmentTable table = AdjustmentTable::Fit(log, edges, 0.0, std::nullopt, 1);
  const auto levels = ScoreDistributionByBucket(log, edges, 0, table, DebiasConfig{});
  ASSERT_EQ(levels.size(), 3u);
  for (const auto& l : levels) EXPECT_NEAR(l.debiased.mean, 1.0, 1e-9);
  EXPECT_GT(levels[2].raw.mean, levels[0].raw.mean);
  const FlatteningResult flat = LevelMeanFlattening(levels);
  EXPECT_GT(flat.raw_variance, 0.0);
  EXPECT_NEAR(flat.debiased_variance, 0.0, 1e-18);
}

TEST(ScoreDistributionTest, SingleLevelMatchesGlobalSummary) {
  InteractionLog log = InflatedLog(2, 500);
  for (auto& r : log) r.familiarity.values = {3.0};
  const BucketEdges edges = FitEdges(log, CountSchema(1), 5);
  const auto levels =
      ScoreDistributionByBucket(log, edges, 0, ConstantFactor(1.0), DebiasConfig{});
  ASSERT_EQ(levels.size(), 1u);
  std::vector<double> all;
  for (const auto& r : log) all.push_back(r.urps);
  const DistributionSummary global = Summarize(all);
  EXPECT_EQ(levels[0].raw.count, global.count);
  EXPECT_DOUBLE_EQ(levels[0].raw.mean, global.mean);
  EXPECT_DOUBLE_EQ(levels[0].raw.variance, global.variance);
  EXPECT_EQ(levels[0].raw.deciles, global.deciles);
}

TEST(EqualMassGroupsTest, RankBased) {
  const std::vector<double> v = {5, 1, 4, 2, 3, 0, 9, 8, 7, 6};
  const auto g = EqualMassGroups(v, 5);
  EXPECT_EQ(g, (std::vector<std::size_t>{2, 0, 2, 1, 1, 0, 4, 4, 3, 3}));
}

TEST(CalibrationTest, ExactModelIsCalibrated) {
  Rng rng(3);
  InteractionLog log;
  for (int i = 0; i < 20'000; ++i) {
    const double b = static_cast<double>(rng.Index(30));
    log.push_back(Record("u", "i", 1.0 + 0.6 * std::log1p(b), {b}));
  }
  TrainConfig config;
  config.seed = 4;
  const RegressorModel model = Train(log, CountSchema(1), config);
  for (const auto& c : CalibrationRatio(model, log, 0, 5)) {
    EXPECT_NEAR(c.ratio, 1.0, 0.02) << "bucket " << c.bucket;
  }
}

TEST(CalibrationTest, ConstantModelRatiosDecrease) {
  const InteractionLog log = InflatedLog(5, 10'000);
  const ConstantFactor ln2(std::numbers::ln2);
  const auto buckets = CalibrationRatio(ln2, log, 0, 5);
  for (std::size_t k = 1; k < buckets.size(); ++k) {
    EXPECT_LT(buckets[k].ratio, buckets[k - 1].ratio);
  }
}

TEST(ShiftTest, DebiasingLowersTopBucket) {
  const InteractionLog log = InflatedLog(6, 6000);
  const BucketEdges edges = FitEdges(log, CountSchema(1), 5);
  const AdjustmentTable table = AdjustmentTable::Fit(log, edges, BucketizerConfig{});
  const auto shift = LabelPredictionShift(log, table, table, DebiasConfig{}, 0, 5);
  EXPECT_LT(shift.back().mean_debiased_label, shift.back().mean_label);
  DebiasConfig off;
  off.strength = 0.0;
  for (const auto& b : LabelPredictionShift(log, table, table, off, 0, 5)) {
    EXPECT_DOUBLE_EQ(b.mean_debiased_label, b.mean_label);
    EXPECT_DOUBLE_EQ(b.mean_debiased_prediction, b.mean_prediction);
  }
  EXPECT_THROW(LabelPredictionShift({}, table, table, DebiasConfig{}, 0, 5),
               ValidationError);
}

}  // namespace
}  // namespace lafb
