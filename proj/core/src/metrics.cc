#include "lafb/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "lafb/rng.h"

namespace lafb {

using nlohmann::json;

namespace {

constexpr double kSecondsPerDay = 86400.0;

// Record indices per user, each list in timestamp order (ties in log order).
std::vector<std::pair<std::string, std::vector<std::size_t>>> UserTimelines(
    const InteractionLog& log) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> timelines;
  for (std::size_t i = 0; i < log.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(log[i].user_id, timelines.size());
    if (inserted) timelines.emplace_back(log[i].user_id, std::vector<std::size_t>{});
    timelines[it->second].second.push_back(i);
  }
  for (auto& [user, idx] : timelines) {
    std::stable_sort(idx.begin(), idx.end(), [&log](std::size_t a, std::size_t b) {
      return log[a].timestamp < log[b].timestamp;
    });
  }
  std::sort(timelines.begin(), timelines.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return timelines;
}

double Quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::nan("");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

json MetricsConfig::ToJson() const {
  return json{{"window_days", window_days},
              {"novelty_key", novelty_key == NoveltyKey::kItem ? "item" : "creator"},
              {"emerging_percentile", emerging_percentile},
              {"bootstrap_replicates", bootstrap_replicates},
              {"bootstrap_seed", bootstrap_seed}};
}

MetricsConfig MetricsConfig::FromJson(const json& j) {
  MetricsConfig c;
  c.window_days = j.value("window_days", c.window_days);
  const std::string key = j.value("novelty_key", std::string("item"));
  if (key == "item") {
    c.novelty_key = NoveltyKey::kItem;
  } else if (key == "creator") {
    c.novelty_key = NoveltyKey::kCreator;
  } else {
    throw ValidationError("novelty_key must be 'item' or 'creator'");
  }
  c.emerging_percentile = j.value("emerging_percentile", c.emerging_percentile);
  c.bootstrap_replicates =
      j.value("bootstrap_replicates", c.bootstrap_replicates);
  c.bootstrap_seed = j.value("bootstrap_seed", c.bootstrap_seed);
  if (!(c.window_days >= 0.0)) {
    throw ValidationError("novelty window must be non-negative");
  }
  if (!(c.emerging_percentile >= 0.0 && c.emerging_percentile <= 100.0)) {
    throw ValidationError("emerging percentile must lie in [0, 100]");
  }
  return c;
}

std::vector<bool> NoveltyFlags(const InteractionLog& log, double window_days,
                               NoveltyKey key) {
  std::vector<bool> novel(log.size(), true);
  const double window = window_days * kSecondsPerDay;
  for (const auto& [user, idx] : UserTimelines(log)) {
    std::unordered_map<std::string_view, std::int64_t> last_seen;
    for (std::size_t i : idx) {
      const Interaction& r = log[i];
      const std::string_view k =
          key == NoveltyKey::kItem ? r.item_id : r.creator_id;
      auto it = last_seen.find(k);
      if (it != last_seen.end() &&
          static_cast<double>(r.timestamp - it->second) < window) {
        novel[i] = false;
      }
      last_seen[k] = r.timestamp;
    }
  }
  return novel;
}

std::optional<double> NovelWatchTimeShare(const InteractionLog& log,
                                          double window_days, NoveltyKey key) {
  const std::vector<bool> novel = NoveltyFlags(log, window_days, key);
  double total = 0.0, novel_wt = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    total += log[i].watch_time;
    if (novel[i]) novel_wt += log[i].watch_time;
  }
  if (total <= 0.0) return std::nullopt;
  return novel_wt / total;
}

std::optional<double> FamiliarWatchTimeShare(const InteractionLog& log,
                                             double window_days,
                                             NoveltyKey key) {
  auto novel = NovelWatchTimeShare(log, window_days, key);
  if (!novel) return std::nullopt;
  return 1.0 - *novel;
}

EmergingCreatorSet EmergingCreators(const PopularityTable& reference,
                                    const CreatorRegistry& creators,
                                    double percentile) {
  EmergingCreatorSet out;
  if (creators.ids.empty()) return out;
  std::vector<std::uint64_t> counts;
  counts.reserve(creators.ids.size());
  for (const auto& id : creators.ids) counts.push_back(reference.CreatorCount(id));
  std::vector<std::uint64_t> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  // Nearest rank: the ceil(p/100 * n)-th smallest value, at least the first.
  const auto rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(sorted.size())));
  const std::uint64_t threshold = sorted[std::max<std::size_t>(rank, 1) - 1];
  for (std::size_t c = 0; c < creators.ids.size(); ++c) {
    const bool recent = c < creators.recent.size() && creators.recent[c];
    if (recent && counts[c] <= threshold) out.insert(creators.ids[c]);
  }
  return out;
}

double EmergingCreatorExposure(const InteractionLog& log,
                               const EmergingCreatorSet& emerging) {
  if (log.empty()) throw ValidationError("exposure of an empty log");
  std::size_t hits = 0;
  for (const auto& r : log) hits += emerging.contains(r.creator_id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(log.size());
}

double EmergingCreatorExposure(const InteractionLog& log,
                               const PopularityTable& reference,
                               const CreatorRegistry& creators,
                               double percentile) {
  return EmergingCreatorExposure(
      log, EmergingCreators(reference, creators, percentile));
}

json ArmMetrics::ToJson() const {
  return json{{"overall_wt", overall_wt},
              {"novel_wt_share", novel_wt_share},
              {"familiar_wt_share", familiar_wt_share},
              {"emerging_creator_exposure_share", emerging_creator_exposure}};
}

namespace {

struct Totals {
  double watch_time = 0.0;
  double novel_watch_time = 0.0;
  double impressions = 0.0;
  double emerging_impressions = 0.0;

  void Add(const UserAggregate& u, double weight) {
    watch_time += weight * u.watch_time;
    novel_watch_time += weight * u.novel_watch_time;
    impressions += weight * static_cast<double>(u.impressions);
    emerging_impressions += weight * static_cast<double>(u.emerging_impressions);
  }
};

double MetricValue(Metric metric, const Totals& t, double users, double days) {
  switch (metric) {
    case Metric::kEmergingCreatorExposure:
      return t.impressions > 0.0 ? t.emerging_impressions / t.impressions : 0.0;
    case Metric::kNovelWtShare:
      return t.watch_time > 0.0 ? t.novel_watch_time / t.watch_time : 0.0;
    case Metric::kFamiliarWtShare:
      return t.watch_time > 0.0 ? 1.0 - t.novel_watch_time / t.watch_time : 0.0;
    case Metric::kOverallWt:
      return users > 0.0 && days > 0.0 ? t.watch_time / (users * days) : 0.0;
  }
  return 0.0;
}

double ApplyScale(DeltaScale scale, double a, double b) {
  switch (scale) {
    case DeltaScale::kDifference:
      return b - a;
    case DeltaScale::kPercentPoints:
      return 100.0 * (b - a);
    case DeltaScale::kRelativePercent:
      if (a == 0.0) return b == 0.0 ? 0.0 : std::nan("");
      return 100.0 * (b / a - 1.0);
  }
  return 0.0;
}

ArmMetrics MetricsFrom(const Totals& t, double users, double days) {
  ArmMetrics m;
  m.overall_wt = MetricValue(Metric::kOverallWt, t, users, days);
  m.novel_wt_share = MetricValue(Metric::kNovelWtShare, t, users, days);
  m.familiar_wt_share = MetricValue(Metric::kFamiliarWtShare, t, users, days);
  m.emerging_creator_exposure =
      MetricValue(Metric::kEmergingCreatorExposure, t, users, days);
  return m;
}

// Aggregates of both arms over the sorted union of their users.
struct PairedUsers {
  std::vector<UserAggregate> a;
  std::vector<UserAggregate> b;
};

PairedUsers Align(const ArmSummary& a, const ArmSummary& b) {
  PairedUsers out;
  std::size_t i = 0, j = 0;
  while (i < a.users.size() || j < b.users.size()) {
    if (j == b.users.size() ||
        (i < a.users.size() && a.users[i] < b.users[j])) {
      out.a.push_back(a.per_user[i++]);
      out.b.emplace_back();
    } else if (i == a.users.size() || b.users[j] < a.users[i]) {
      out.a.emplace_back();
      out.b.push_back(b.per_user[j++]);
    } else {
      out.a.push_back(a.per_user[i++]);
      out.b.push_back(b.per_user[j++]);
    }
  }
  return out;
}

std::array<DeltaEstimate, 4> Bootstrap(const ArmSummary& a, const ArmSummary& b,
                                       std::span<const Metric> metrics,
                                       std::span<const DeltaScale> scales,
                                       std::size_t replicates,
                                       std::uint64_t seed) {
  const PairedUsers paired = Align(a, b);
  const std::size_t n = paired.a.size();
  const auto users = static_cast<double>(n);

  Totals ta, tb;
  for (std::size_t u = 0; u < n; ++u) {
    ta.Add(paired.a[u], 1.0);
    tb.Add(paired.b[u], 1.0);
  }
  std::array<DeltaEstimate, 4> out{};
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    const double point =
        ApplyScale(scales[m], MetricValue(metrics[m], ta, users, a.days),
                   MetricValue(metrics[m], tb, users, b.days));
    out[m] = {point, point, point};
  }
  if (replicates < 2 || n == 0) return out;

  std::vector<std::vector<double>> samples(metrics.size());
  for (auto& s : samples) s.reserve(replicates);
  std::vector<std::uint32_t> multiplicity(n);
  Rng rng(seed);
  for (std::size_t r = 0; r < replicates; ++r) {
    std::fill(multiplicity.begin(), multiplicity.end(), 0);
    for (std::size_t k = 0; k < n; ++k) ++multiplicity[rng.Index(n)];
    Totals ra, rb;
    for (std::size_t u = 0; u < n; ++u) {
      if (multiplicity[u] == 0) continue;
      ra.Add(paired.a[u], multiplicity[u]);
      rb.Add(paired.b[u], multiplicity[u]);
    }
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      samples[m].push_back(
          ApplyScale(scales[m], MetricValue(metrics[m], ra, users, a.days),
                     MetricValue(metrics[m], rb, users, b.days)));
    }
  }
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    auto& s = samples[m];
    if (std::any_of(s.begin(), s.end(), [](double v) { return std::isnan(v); })) {
      out[m].low = out[m].high = std::nan("");
      continue;
    }
    std::sort(s.begin(), s.end());
    out[m].low = std::min(Quantile(s, 0.025), out[m].point);
    out[m].high = std::max(Quantile(s, 0.975), out[m].point);
  }
  return out;
}

}  // namespace

ArmSummary SummarizeArm(std::string name, const InteractionLog& log,
                        const EmergingCreatorSet& emerging,
                        const MetricsConfig& config, double days) {
  ArmSummary summary;
  summary.name = std::move(name);
  summary.days = days;
  summary.interactions = log.size();
  const std::vector<bool> novel =
      NoveltyFlags(log, config.window_days, config.novelty_key);
  std::map<std::string, UserAggregate> per_user;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const Interaction& r = log[i];
    UserAggregate& u = per_user[r.user_id];
    u.watch_time += r.watch_time;
    if (novel[i]) u.novel_watch_time += r.watch_time;
    ++u.impressions;
    if (emerging.contains(r.creator_id)) ++u.emerging_impressions;
  }
  Totals t;
  for (auto& [user, agg] : per_user) {
    summary.users.push_back(user);
    summary.per_user.push_back(agg);
    t.Add(agg, 1.0);
  }
  summary.metrics =
      MetricsFrom(t, static_cast<double>(summary.users.size()), days);
  return summary;
}

std::string_view ToString(Metric metric) {
  switch (metric) {
    case Metric::kEmergingCreatorExposure:
      return "emerging_creator_exposure";
    case Metric::kNovelWtShare:
      return "novel_wt_share";
    case Metric::kFamiliarWtShare:
      return "familiar_wt_share";
    case Metric::kOverallWt:
      return "overall_wt";
  }
  return "unknown";
}

DeltaScale ReportScale(Metric metric) {
  switch (metric) {
    case Metric::kNovelWtShare:
    case Metric::kFamiliarWtShare:
      return DeltaScale::kPercentPoints;
    default:
      return DeltaScale::kRelativePercent;
  }
}

json DeltaEstimate::ToJson() const {
  return json{{"point", point}, {"low", low}, {"high", high}};
}

DeltaEstimate BootstrapDelta(const ArmSummary& a, const ArmSummary& b,
                             Metric metric, DeltaScale scale,
                             std::size_t replicates, std::uint64_t seed) {
  const std::array<Metric, 1> metrics = {metric};
  const std::array<DeltaScale, 1> scales = {scale};
  return Bootstrap(a, b, metrics, scales, replicates, seed)[0];
}

std::array<DeltaEstimate, 4> BootstrapDeltas(const ArmSummary& a,
                                             const ArmSummary& b,
                                             std::size_t replicates,
                                             std::uint64_t seed) {
  std::array<DeltaScale, 4> scales{};
  for (std::size_t m = 0; m < 4; ++m) scales[m] = ReportScale(kReportMetrics[m]);
  return Bootstrap(a, b, kReportMetrics, scales, replicates, seed);
}

const DeltaRow& MetricsReport::Row(std::string_view arm) const {
  for (const auto& row : deltas) {
    if (row.arm == arm) return row;
  }
  throw std::out_of_range("no delta row for arm '" + std::string(arm) + "'");
}

json MetricsReport::ToJson() const {
  json arms_json = json::array();
  for (std::size_t i = 0; i < arms.size(); ++i) {
    json row = arm_metrics[i].ToJson();
    row["arm"] = arms[i];
    arms_json.push_back(row);
  }
  json delta_json = json::array();
  for (const auto& row : deltas) {
    json entry{{"arm", row.arm}};
    for (std::size_t m = 0; m < 4; ++m) {
      json d = row.deltas[m].ToJson();
      d["unit"] = ReportScale(kReportMetrics[m]) == DeltaScale::kPercentPoints
                      ? "pp"
                      : "percent";
      entry[std::string(ToString(kReportMetrics[m]))] = d;
    }
    delta_json.push_back(entry);
  }
  return json{{"arms", arms_json}, {"deltas_vs_control", delta_json}};
}

namespace {

std::string Format(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << v;
  return out.str();
}

}  // namespace

std::string MetricsReport::Table1Csv() const {
  std::ostringstream out;
  out << "method";
  for (Metric m : kReportMetrics) {
    const std::string unit =
        ReportScale(m) == DeltaScale::kPercentPoints ? "pp" : "pct";
    const std::string base = std::string(ToString(m)) + "_delta_" + unit;
    out << ',' << base << ',' << base << "_low," << base << "_high";
  }
  out << '\n';
  for (const auto& row : deltas) {
    out << row.arm;
    for (const auto& d : row.deltas) {
      out << ',' << Format(d.point) << ',' << Format(d.low) << ','
          << Format(d.high);
    }
    out << '\n';
  }
  return out.str();
}

std::string MetricsReport::Table1Markdown() const {
  std::ostringstream out;
  out << "| Method | Emerging Creator Exposure Δ% | Novel WT Share Δpp | "
         "Familiar WT Share Δpp | Overall WT Δ% |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& row : deltas) {
    out << "| " << row.arm;
    for (const auto& d : row.deltas) {
      out << " | " << Format(d.point) << " [" << Format(d.low) << ", "
          << Format(d.high) << "]";
    }
    out << " |\n";
  }
  return out.str();
}

MetricsReport BuildReport(std::span<const ArmSummary> summaries,
                          const MetricsConfig& config) {
  MetricsReport report;
  if (summaries.empty()) return report;
  const ArmSummary& control = summaries.front();
  for (const auto& s : summaries) {
    report.arms.push_back(s.name);
    report.arm_metrics.push_back(s.metrics);
    report.deltas.push_back(
        {s.name, BootstrapDeltas(control, s, config.bootstrap_replicates,
                                 config.bootstrap_seed)});
  }
  return report;
}

DistributionSummary Summarize(std::span<const double> values) {
  DistributionSummary s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = s.variance = std::nan("");
    s.deciles.fill(std::nan(""));
    return s;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  s.mean = mean;
  s.variance = var / static_cast<double>(values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t d = 0; d < 9; ++d) {
    s.deciles[d] = Quantile(sorted, static_cast<double>(d + 1) / 10.0);
  }
  return s;
}

std::vector<LevelDistribution> ScoreDistributionByBucket(
    const InteractionLog& log, const BucketEdges& edges, std::size_t feature,
    const FactorModel& factors, const DebiasConfig& config) {
  if (feature >= edges.arity()) {
    throw ValidationError("distribution feature out of range");
  }
  const double floor = config.Floor(factors.ReferenceMean());
  std::array<std::vector<double>, 3> raw, debiased;
  for (const auto& r : log) {
    const int level = edges.Level(feature, r.familiarity[feature]);
    raw[level].push_back(r.urps);
    debiased[level].push_back(DebiasScore(
        r.urps, factors.Factor(r.familiarity.span()), floor, config.strength));
  }
  std::vector<LevelDistribution> out;
  for (int level = 0; level < 3; ++level) {
    if (raw[level].empty()) continue;
    out.push_back({level, Summarize(raw[level]), Summarize(debiased[level])});
  }
  return out;
}

FlatteningResult LevelMeanFlattening(
    std::span<const LevelDistribution> levels) {
  FlatteningResult result;
  if (levels.empty()) {
    result.ratio = std::nan("");
    return result;
  }
  auto variance = [&levels](bool debiased) {
    double total = 0.0, count = 0.0;
    for (const auto& l : levels) {
      const auto& s = debiased ? l.debiased : l.raw;
      total += s.mean * static_cast<double>(s.count);
      count += static_cast<double>(s.count);
    }
    const double overall = total / count;
    std::vector<double> means;
    for (const auto& l : levels) {
      means.push_back((debiased ? l.debiased.mean : l.raw.mean) / overall);
    }
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    return var / static_cast<double>(means.size());
  };
  result.raw_variance = variance(false);
  result.debiased_variance = variance(true);
  result.ratio = result.raw_variance > 0.0
                     ? result.debiased_variance / result.raw_variance
                     : std::nan("");
  return result;
}

std::vector<std::size_t> EqualMassGroups(std::span<const double> values,
                                         std::size_t groups) {
  if (groups == 0) throw ValidationError("need at least one group");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&values](std::size_t a, std::size_t b) {
                     return values[a] < values[b];
                   });
  std::vector<std::size_t> group(values.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    group[order[rank]] = rank * groups / order.size();
  }
  return group;
}

namespace {

struct GroupedLog {
  std::vector<std::size_t> group;
  std::vector<double> low, high;
  std::vector<std::size_t> count;
};

GroupedLog GroupByFeature(const InteractionLog& log, std::size_t feature,
                          std::size_t buckets) {
  if (buckets == 0) throw ValidationError("need at least one bucket");
  std::vector<double> values(log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (feature >= log[i].familiarity.size()) {
      throw ValidationError("bucket feature out of range");
    }
    values[i] = log[i].familiarity[feature];
  }
  GroupedLog g;
  g.group = EqualMassGroups(values, buckets);
  g.low.assign(buckets, std::numeric_limits<double>::infinity());
  g.high.assign(buckets, -std::numeric_limits<double>::infinity());
  g.count.assign(buckets, 0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const std::size_t b = g.group[i];
    g.low[b] = std::min(g.low[b], values[i]);
    g.high[b] = std::max(g.high[b], values[i]);
    ++g.count[b];
  }
  return g;
}

}  // namespace

std::vector<CalibrationBucket> CalibrationRatio(const FactorModel& model,
                                                const InteractionLog& log,
                                                std::size_t feature,
                                                std::size_t buckets) {
  const GroupedLog g = GroupByFeature(log, feature, buckets);
  std::vector<double> pred(buckets, 0.0), label(buckets, 0.0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    pred[g.group[i]] += model.Factor(log[i].familiarity.span());
    label[g.group[i]] += log[i].urps;
  }
  std::vector<CalibrationBucket> out;
  for (std::size_t b = 0; b < buckets; ++b) {
    CalibrationBucket c;
    c.bucket = b;
    c.count = g.count[b];
    c.empty = c.count == 0;
    if (c.empty) {
      c.feature_low = c.feature_high = std::nan("");
      c.mean_prediction = c.mean_label = c.ratio = std::nan("");
    } else {
      const auto n = static_cast<double>(c.count);
      c.feature_low = g.low[b];
      c.feature_high = g.high[b];
      c.mean_prediction = pred[b] / n;
      c.mean_label = label[b] / n;
      c.ratio = c.mean_prediction / c.mean_label;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<ShiftBucket> LabelPredictionShift(const InteractionLog& log,
                                              const FactorModel& factors,
                                              const FactorModel& predictor,
                                              const DebiasConfig& config,
                                              std::size_t feature,
                                              std::size_t buckets) {
  if (log.empty()) throw ValidationError("label/prediction shift of an empty log");
  config.Validate();
  const GroupedLog g = GroupByFeature(log, feature, buckets);
  const double reference = factors.ReferenceMean();
  const double floor = config.Floor(reference);
  std::vector<ShiftBucket> out(buckets);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto b = log[i].familiarity.span();
    const double adj = factors.Factor(b);
    const double rescale =
        config.strength == 0.0
            ? 1.0
            : std::pow(reference / std::max(adj, floor), config.strength);
    const double prediction = predictor.Factor(b);
    ShiftBucket& s = out[g.group[i]];
    s.mean_label += log[i].urps;
    s.mean_debiased_label += log[i].urps * rescale;
    s.mean_prediction += prediction;
    s.mean_debiased_prediction += prediction * rescale;
  }
  for (std::size_t k = 0; k < buckets; ++k) {
    ShiftBucket& s = out[k];
    s.bucket = k;
    s.count = g.count[k];
    const double n = static_cast<double>(s.count);
    if (s.count == 0) {
      s.feature_low = s.feature_high = std::nan("");
      s.mean_label = s.mean_debiased_label = s.mean_prediction =
          s.mean_debiased_prediction = std::nan("");
      continue;
    }
    s.feature_low = g.low[k];
    s.feature_high = g.high[k];
    s.mean_label /= n;
    s.mean_debiased_label /= n;
    s.mean_prediction /= n;
    s.mean_debiased_prediction /= n;
  }
  return out;
}

}  // namespace lafb
