#pragma once

// Watch-time and exposure metrics, paired user-level bootstrap deltas, and
// the score-distribution / calibration diagnostics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "lafb/bucketizer.h"
#include "lafb/core.h"
#include "lafb/debias.h"

namespace lafb {

enum class NoveltyKey { kItem, kCreator };

struct MetricsConfig {
  double window_days = 14.0;
  NoveltyKey novelty_key = NoveltyKey::kItem;
  double emerging_percentile = 10.0;
  std::size_t bootstrap_replicates = 1000;
  std::uint64_t bootstrap_seed = 0;

  nlohmann::json ToJson() const;
  static MetricsConfig FromJson(const nlohmann::json& j);
};

// True for records whose item (or creator) the same user did not interact
// with during the preceding window. Each user's records are taken in
// timestamp order, ties in log order.
std::vector<bool> NoveltyFlags(const InteractionLog& log, double window_days,
                               NoveltyKey key = NoveltyKey::kItem);

// Novel watch time / total watch time; nullopt when total watch time is 0.
std::optional<double> NovelWatchTimeShare(const InteractionLog& log,
                                          double window_days = 14.0,
                                          NoveltyKey key = NoveltyKey::kItem);
std::optional<double> FamiliarWatchTimeShare(
    const InteractionLog& log, double window_days = 14.0,
    NoveltyKey key = NoveltyKey::kItem);

struct CreatorRegistry {
  std::vector<std::string> ids;
  std::vector<bool> recent;
};

using EmergingCreatorSet = std::unordered_set<std::string>;

// Recent creators whose exposure in `reference` is at or below the given
// percentile (nearest rank) of exposure over all registered creators.
EmergingCreatorSet EmergingCreators(const PopularityTable& reference,
                                    const CreatorRegistry& creators,
                                    double percentile);

// Fraction of logged impressions that went to emerging creators.
double EmergingCreatorExposure(const InteractionLog& log,
                               const EmergingCreatorSet& emerging);
double EmergingCreatorExposure(const InteractionLog& log,
                               const PopularityTable& reference,
                               const CreatorRegistry& creators,
                               double percentile = 10.0);

struct UserAggregate {
  double watch_time = 0.0;
  double novel_watch_time = 0.0;
  std::uint64_t impressions = 0;
  std::uint64_t emerging_impressions = 0;
};

struct ArmMetrics {
  double overall_wt = 0.0;  // seconds per user-day
  double novel_wt_share = 0.0;
  double familiar_wt_share = 0.0;
  double emerging_creator_exposure = 0.0;

  nlohmann::json ToJson() const;
};

struct ArmSummary {
  std::string name;
  std::vector<std::string> users;  // sorted
  std::vector<UserAggregate> per_user;
  double days = 1.0;
  std::uint64_t interactions = 0;
  ArmMetrics metrics;
};

ArmSummary SummarizeArm(std::string name, const InteractionLog& log,
                        const EmergingCreatorSet& emerging,
                        const MetricsConfig& config, double days);

// Table 1 column order.
enum class Metric {
  kEmergingCreatorExposure = 0,
  kNovelWtShare = 1,
  kFamiliarWtShare = 2,
  kOverallWt = 3,
};
inline constexpr std::array<Metric, 4> kReportMetrics = {
    Metric::kEmergingCreatorExposure, Metric::kNovelWtShare,
    Metric::kFamiliarWtShare, Metric::kOverallWt};

std::string_view ToString(Metric metric);

enum class DeltaScale {
  kDifference,       // b - a
  kPercentPoints,    // 100 * (b - a)
  kRelativePercent,  // 100 * (b / a - 1)
};

// Table 1 units: relative % for exposure and watch time, pp for shares.
DeltaScale ReportScale(Metric metric);

struct DeltaEstimate {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;

  bool ContainsZero() const { return low <= 0.0 && 0.0 <= high; }
  nlohmann::json ToJson() const;
};

// Paired user-level bootstrap of metric(b) - metric(a) on the given scale.
// Users are matched by id; each replicate resamples users with replacement
// and applies the same draw to both arms. The interval is the 2.5/97.5
// percentile pair, widened if needed to cover the point estimate; fewer than
// two replicates yield the degenerate interval at the point.
DeltaEstimate BootstrapDelta(const ArmSummary& a, const ArmSummary& b,
                             Metric metric, DeltaScale scale,
                             std::size_t replicates, std::uint64_t seed);
std::array<DeltaEstimate, 4> BootstrapDeltas(const ArmSummary& a,
                                             const ArmSummary& b,
                                             std::size_t replicates,
                                             std::uint64_t seed);

struct DeltaRow {
  std::string arm;
  std::array<DeltaEstimate, 4> deltas;  // Table 1 column order
};

struct MetricsReport {
  std::vector<std::string> arms;
  std::vector<ArmMetrics> arm_metrics;
  // One row per arm vs the first (control) arm; the control row is zeros.
  std::vector<DeltaRow> deltas;

  const DeltaRow& Row(std::string_view arm) const;
  nlohmann::json ToJson() const;
  // Method, then point/low/high for each Table 1 column.
  std::string Table1Csv() const;
  std::string Table1Markdown() const;
};

MetricsReport BuildReport(std::span<const ArmSummary> summaries,
                          const MetricsConfig& config);

struct DistributionSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  std::array<double, 9> deciles{};  // 10th..90th percentiles
};

DistributionSummary Summarize(std::span<const double> values);

struct LevelDistribution {
  int level = 0;  // 0 low, 1 medium, 2 high
  DistributionSummary raw;
  DistributionSummary debiased;
};

// Raw and debiased score summaries per coarse familiarity level of one
// bucketed feature. Only populated levels are returned.
std::vector<LevelDistribution> ScoreDistributionByBucket(
    const InteractionLog& log, const BucketEdges& edges, std::size_t feature,
    const FactorModel& factors, const DebiasConfig& config);

struct FlatteningResult {
  double raw_variance = 0.0;
  double debiased_variance = 0.0;
  double ratio = 0.0;  // debiased / raw; NaN when raw is 0
};

// Variance across levels of the per-level mean score, each score divided by
// its count-weighted overall mean so raw and debiased share a scale.
FlatteningResult LevelMeanFlattening(std::span<const LevelDistribution> levels);

// Equal-mass grouping by rank: stable sort by value, group = rank * K / n.
std::vector<std::size_t> EqualMassGroups(std::span<const double> values,
                                         std::size_t groups);

struct CalibrationBucket {
  std::size_t bucket = 0;
  std::size_t count = 0;
  double feature_low = 0.0;
  double feature_high = 0.0;
  double mean_prediction = 0.0;
  double mean_label = 0.0;
  double ratio = 0.0;  // NaN for an empty bucket
  bool empty = false;
};

// Per equal-mass bucket of `feature`: mean model factor / mean observed score.
std::vector<CalibrationBucket> CalibrationRatio(const FactorModel& model,
                                                const InteractionLog& log,
                                                std::size_t feature,
                                                std::size_t buckets = 5);

struct ShiftBucket {
  std::size_t bucket = 0;
  std::size_t count = 0;
  double feature_low = 0.0;
  double feature_high = 0.0;
  double mean_label = 0.0;
  double mean_debiased_label = 0.0;
  double mean_prediction = 0.0;
  double mean_debiased_prediction = 0.0;
};

// Label = logged score, prediction = `predictor` factor. Debiased columns are
// multiplied by (reference / max(adj, floor))^strength, with adj from
// `factors`, which keeps them on the raw score scale and leaves them equal
// to the raw columns at strength 0.
std::vector<ShiftBucket> LabelPredictionShift(const InteractionLog& log,
                                              const FactorModel& factors,
                                              const FactorModel& predictor,
                                              const DebiasConfig& config,
                                              std::size_t feature,
                                              std::size_t buckets = 5);

}  // namespace lafb
