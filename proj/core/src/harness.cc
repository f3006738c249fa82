#include "lafb/harness.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "lafb/io.h"
#include "lafb/rng.h"

namespace lafb {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string>& KnownPolicies() {
  static const std::set<std::string> policies = {
      "control", "lafb", "log_pop", "user_centric", "item_centric",
      "static_boost"};
  return policies;
}

StratumQuotas QuotasFrom(const json& params) {
  StratumQuotas q;
  q.share = {1.0, 0.4, 0.3};
  if (params.contains("quotas")) {
    const auto& j = params.at("quotas");
    if (!j.is_array() || j.size() != 3) {
      throw ValidationError("quotas must list low, medium and high shares");
    }
    for (std::size_t i = 0; i < 3; ++i) q.share[i] = j.at(i).get<double>();
  }
  q.Validate();
  return q;
}

std::string Fixed(double v, int precision = 6) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << v;
  return out.str();
}

}  // namespace

json ToJson(const BucketizerConfig& config) {
  json clip = nullptr;
  if (config.clip) clip = json{{"low", config.clip->low}, {"high", config.clip->high}};
  return json{{"buckets", config.buckets},
              {"smoothing_prior_weight", config.smoothing_prior_weight},
              {"clip", clip},
              {"min_cell_count", config.min_cell_count}};
}

BucketizerConfig BucketizerConfigFromJson(const json& j) {
  BucketizerConfig c;
  c.buckets = j.value("buckets", c.buckets);
  c.smoothing_prior_weight =
      j.value("smoothing_prior_weight", c.smoothing_prior_weight);
  if (j.contains("clip")) {
    if (j.at("clip").is_null()) {
      c.clip.reset();
    } else {
      ClipBounds b;
      b.low = j.at("clip").value("low", b.low);
      b.high = j.at("clip").value("high", b.high);
      c.clip = b;
    }
  }
  c.min_cell_count = j.value("min_cell_count", c.min_cell_count);
  if (c.buckets < 2) throw ValidationError("need at least 2 buckets");
  if (!(c.smoothing_prior_weight >= 0.0)) {
    throw ValidationError("smoothing prior weight must be non-negative");
  }
  if (c.clip && !(c.clip->low > 0.0 && c.clip->low <= c.clip->high)) {
    throw ValidationError("clip bounds must satisfy 0 < low <= high");
  }
  return c;
}

void ExperimentConfig::Validate() const {
  universe.Validate();
  inflation.Validate();
  session.Validate();
  train.Validate();
  debias.Validate();
  if (session.pool_size > universe.items) {
    throw ValidationError("candidate pool larger than the catalog");
  }
  if (warmup_sessions == 0) throw ValidationError("warm-up needs sessions");
  if (bucketizer.buckets < 2) throw ValidationError("need at least 2 buckets");
  SimulatorSchema().IndexOf(diagnostic_feature);
  if (arms.empty()) throw ValidationError("config lists no arms");
  std::set<std::string> names;
  for (const auto& arm : arms) {
    if (arm.name.empty()) throw ValidationError("arm without a name");
    if (!names.insert(arm.name).second) {
      throw ValidationError("duplicate arm name '" + arm.name + "'");
    }
    if (!KnownPolicies().contains(arm.policy)) {
      throw ValidationError("unknown policy '" + arm.policy + "' in arm '" +
                            arm.name + "'");
    }
  }
  if (arms.front().policy != "control") {
    throw ValidationError("the first arm must use the control policy");
  }
  // Parameter errors surface here rather than mid-run.
  FittedArtifacts none;
  for (const auto& arm : arms) {
    if (arm.policy == "lafb") {
      ParseDebiasMode(arm.params.value("mode", std::string("discrete")));
      if (!(arm.params.value("strength", debias.strength) >= 0.0)) {
        throw ValidationError("lafb strength must be non-negative");
      }
    } else if (arm.policy == "user_centric") {
      SimulatorSchema().IndexOf(
          arm.params.value("feature", std::string("channel_watch_count")));
      QuotasFrom(arm.params);
    } else if (!ArmNeedsArtifacts(arm)) {
      MakePolicy(arm, *this, none);
    }
  }
}

void ExperimentConfig::OverrideSeed(std::uint64_t seed) {
  universe.seed = DeriveSeed(seed, 1);
  warmup_seed = DeriveSeed(seed, 2);
  experiment_seed = DeriveSeed(seed, 3);
  train.seed = DeriveSeed(seed, 4);
  metrics.bootstrap_seed = DeriveSeed(seed, 5);
}

json ExperimentConfig::ToJson() const {
  json arms_json = json::array();
  for (const auto& arm : arms) {
    json a = arm.params;
    a["name"] = arm.name;
    a["policy"] = arm.policy;
    arms_json.push_back(a);
  }
  return json{{"universe", universe.ToJson()},
              {"inflation", inflation.ToJson()},
              {"session", session.ToJson()},
              {"warmup", {{"sessions", warmup_sessions}, {"seed", warmup_seed}}},
              {"experiment", {{"seed", experiment_seed}}},
              {"bucketizer", lafb::ToJson(bucketizer)},
              {"train", train.ToJson()},
              {"debias", debias.ToJson()},
              {"metrics", metrics.ToJson()},
              {"arms", arms_json},
              {"diagnostic_feature", diagnostic_feature},
              {"recovery_samples", recovery_samples},
              {"output", {{"write_logs", write_logs}}}};
}

ExperimentConfig ExperimentConfig::FromJson(const json& j) {
  static const std::set<std::string> keys = {
      "universe", "inflation",  "session", "warmup",
      "experiment", "bucketizer", "train", "debias",
      "metrics",  "arms",       "diagnostic_feature", "recovery_samples",
      "output"};
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  try {
    ExperimentConfig c;
    const json empty = json::object();
    c.universe = UniverseConfig::FromJson(j.value("universe", empty));
    c.inflation = InflationSpec::FromJson(j.value("inflation", empty));
    c.session = SessionConfig::FromJson(j.value("session", empty));
    const json warmup = j.value("warmup", empty);
    c.warmup_sessions = warmup.value("sessions", c.session.sessions);
    c.warmup_seed = warmup.value("seed", c.warmup_seed);
    c.experiment_seed =
        j.value("experiment", empty).value("seed", c.experiment_seed);
    c.bucketizer = BucketizerConfigFromJson(j.value("bucketizer", empty));
    c.train = TrainConfig::FromJson(j.value("train", empty));
    c.debias = DebiasConfig::FromJson(j.value("debias", empty));
    c.metrics = MetricsConfig::FromJson(j.value("metrics", empty));
    for (const auto& a : j.value("arms", json::array())) {
      ArmConfig arm;
      arm.name = a.at("name").get<std::string>();
      arm.policy = a.at("policy").get<std::string>();
      arm.params = a;
      arm.params.erase("name");
      arm.params.erase("policy");
      c.arms.push_back(std::move(arm));
    }
    c.diagnostic_feature = j.value("diagnostic_feature", c.diagnostic_feature);
    c.recovery_samples = j.value("recovery_samples", c.recovery_samples);
    c.write_logs = j.value("output", empty).value("write_logs", c.write_logs);
    c.Validate();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::Load(const fs::path& path) {
  json j;
  try {
    j = ReadJsonFile(path);
  } catch (const json::exception& e) {
    throw ValidationError("cannot parse " + path.string() + ": " + e.what());
  }
  return FromJson(j);
}

FittedArtifacts FitArtifacts(const InteractionLog& log,
                             const FeatureSchema& schema,
                             const ExperimentConfig& config) {
  FittedArtifacts a;
  a.edges = FitEdges(log, schema, config.bucketizer.buckets);
  a.table = std::make_shared<AdjustmentTable>(
      AdjustmentTable::Fit(log, a.edges, config.bucketizer));
  a.model = std::make_shared<RegressorModel>(Train(log, schema, config.train));
  return a;
}

void WriteArtifacts(const FittedArtifacts& artifacts,
                    const FeatureSchema& schema, const fs::path& dir) {
  if (artifacts.table) {
    WriteJsonFile(dir / "table.json", artifacts.table->ToJson(schema));
  }
  if (artifacts.model) {
    WriteJsonFile(dir / "model.json", artifacts.model->ToJson(schema));
  }
}

FittedArtifacts ReadArtifacts(const fs::path& dir, const FeatureSchema& schema) {
  FittedArtifacts a;
  if (fs::exists(dir / "table.json")) {
    auto table = std::make_shared<AdjustmentTable>(
        AdjustmentTable::FromJson(ReadJsonFile(dir / "table.json"), &schema));
    a.edges = table->edges();
    a.table = std::move(table);
  }
  if (fs::exists(dir / "model.json")) {
    a.model = std::make_shared<RegressorModel>(
        RegressorModel::FromJson(ReadJsonFile(dir / "model.json"), &schema));
  }
  return a;
}

bool ArmNeedsArtifacts(const ArmConfig& arm) {
  return arm.policy == "lafb" || arm.policy == "user_centric";
}

std::shared_ptr<const RankingPolicy> MakePolicy(const ArmConfig& arm,
                                                const ExperimentConfig& config,
                                                const FittedArtifacts& artifacts) {
  const json& p = arm.params;
  const FeatureSchema& schema = SimulatorSchema();
  if (arm.policy == "control") return std::make_shared<ControlPolicy>();
  if (arm.policy == "lafb") {
    DebiasConfig debias = config.debias;
    debias.mode = ParseDebiasMode(p.value("mode", std::string("discrete")));
    debias.strength = p.value("strength", debias.strength);
    std::shared_ptr<const FactorModel> factors;
    if (debias.mode == DebiasMode::kDiscrete) {
      factors = artifacts.table;
    } else {
      factors = artifacts.model;
    }
    if (!factors) {
      throw ValidationError("arm '" + arm.name + "' needs a fitted " +
                            std::string(ToString(debias.mode)) + " model");
    }
    return std::make_shared<DebiasPolicy>(std::move(factors), debias);
  }
  if (arm.policy == "log_pop") {
    const double lambda = p.value("lambda", 0.3);
    if (!(lambda >= 0.0)) throw ValidationError("log_pop lambda must be >= 0");
    return std::make_shared<LogPopPolicy>(lambda);
  }
  if (arm.policy == "user_centric") {
    if (artifacts.edges.arity() == 0) {
      throw ValidationError("arm '" + arm.name + "' needs fitted bucket edges");
    }
    const std::size_t feature = schema.IndexOf(
        p.value("feature", std::string("channel_watch_count")));
    return std::make_shared<UserCentricPolicy>(artifacts.edges, feature,
                                               QuotasFrom(p));
  }
  if (arm.policy == "item_centric") {
    return std::make_shared<ItemCentricPolicy>(QuotasFrom(p));
  }
  if (arm.policy == "static_boost") {
    BoostRule rule;
    rule.feature =
        schema.IndexOf(p.value("feature", std::string("item_watch_count")));
    rule.threshold = p.value("threshold", rule.threshold);
    rule.multiplier = p.value("multiplier", rule.multiplier);
    if (!(rule.multiplier > 0.0)) {
      throw ValidationError("static boost multiplier must be positive");
    }
    return std::make_shared<StaticBoostPolicy>(rule);
  }
  throw ValidationError("unknown policy '" + arm.policy + "'");
}

void WriteBundle(const ReportBundle& bundle, const fs::path& dir) {
  WriteJsonFile(dir / "report.json", bundle.report);
  WriteTextFile(dir / "table1.csv", bundle.table1_csv);
  WriteTextFile(dir / "fig3_distribution.csv", bundle.fig3_csv);
  WriteTextFile(dir / "fig4_shift.csv", bundle.fig4_shift_csv);
  WriteTextFile(dir / "fig4_calibration.csv", bundle.fig4_calibration_csv);
}

EmergingCreatorSet EmergingFromWarmup(const InteractionLog& warmup,
                                      const CreatorRegistry& creators,
                                      const MetricsConfig& metrics) {
  return EmergingCreators(ComputePopularity(warmup), creators,
                          metrics.emerging_percentile);
}

std::uint32_t ParseSimulatorIndex(std::string_view id) {
  std::uint32_t value = 0;
  if (id.size() < 2) throw ValidationError("malformed simulator id");
  const auto [ptr, ec] =
      std::from_chars(id.data() + 1, id.data() + id.size(), value);
  if (ec != std::errc() || ptr != id.data() + id.size()) {
    throw ValidationError("malformed simulator id '" + std::string(id) + "'");
  }
  return value;
}

double PopulationMeanQuality(const Universe& universe) {
  double total = 0.0;
  for (std::uint32_t u = 0; u < universe.users(); ++u) {
    double row = 0.0;
    for (std::uint32_t v = 0; v < universe.items(); ++v) {
      row += universe.TrueQuality(u, v);
    }
    total += row / static_cast<double>(universe.items());
  }
  return total / static_cast<double>(universe.users());
}

InteractionLog MeanQualitySample(const InteractionLog& source,
                                 const InflationSpec& spec, double mean_quality,
                                 std::size_t count, std::uint64_t seed) {
  if (source.empty()) throw ValidationError("recovery sample needs a source log");
  InteractionLog out;
  out.reserve(count);
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const Interaction& src = source[rng.Index(source.size())];
    Interaction r;
    r.user_id = src.user_id;
    r.item_id = src.item_id;
    r.creator_id = src.creator_id;
    r.timestamp = src.timestamp;
    r.familiarity = src.familiarity;
    r.urps = mean_quality * spec.Inflation(src.familiarity.span()) *
             std::exp(spec.noise_sigma * rng.Normal());
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

json Check(int id, std::string name, std::optional<bool> passed, json value,
           std::string threshold) {
  return json{{"id", id},
              {"name", std::move(name)},
              {"passed", passed ? json(*passed) : json(nullptr)},
              {"value", std::move(value)},
              {"threshold", std::move(threshold)}};
}

// Per-cell mean of s / factor with an unsmoothed, unclipped table.
json CheckMeanOne(const InteractionLog& log, const BucketEdges& edges) {
  const AdjustmentTable exact = AdjustmentTable::Fit(log, edges, 0.0, std::nullopt, 0);
  std::map<CellIndex, std::pair<double, std::size_t>> cells;
  for (const auto& r : log) {
    const CellIndex cell = AssignCell(r.familiarity.span(), edges);
    const CellStats* stats = exact.FindCell(cell);
    auto& [sum, n] = cells[cell];
    sum += DebiasScore(r.urps, stats->factor, 0.0, 1.0);
    ++n;
  }
  double worst = 0.0;
  for (const auto& [cell, acc] : cells) {
    worst = std::max(worst,
                     std::abs(acc.first / static_cast<double>(acc.second) - 1.0));
  }
  return Check(1, "mean_one_exactness", worst <= 1e-9,
               json{{"max_relative_error", worst}, {"cells", cells.size()}},
               "<= 1e-9 in every populated cell");
}

// Cell factors of the noise-free log against per-cell mean q * g(b).
json CheckDiscreteRecovery(const InteractionLog& warmup,
                           const Universe& universe, const InflationSpec& spec,
                           const BucketEdges& edges) {
  InteractionLog noiseless = warmup;
  std::map<CellIndex, std::pair<double, std::size_t>> oracle;
  for (auto& r : noiseless) {
    const double q = universe.TrueQuality(ParseSimulatorIndex(r.user_id),
                                          ParseSimulatorIndex(r.item_id));
    r.urps = q * spec.Inflation(r.familiarity.span());
    auto& [sum, n] = oracle[AssignCell(r.familiarity.span(), edges)];
    sum += r.urps;
    ++n;
  }
  const AdjustmentTable table =
      AdjustmentTable::Fit(noiseless, edges, 0.0, std::nullopt, 0);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& [cell, acc] : oracle) {
    if (acc.second < 200) continue;
    const double expected = acc.first / static_cast<double>(acc.second);
    worst = std::max(worst,
                     std::abs(table.FindCell(cell)->factor / expected - 1.0));
    ++checked;
  }
  return Check(2, "oracle_recovery_discrete", checked > 0 && worst <= 0.01,
               json{{"max_relative_error", worst}, {"cells_checked", checked}},
               "<= 0.01 for cells with >= 200 samples");
}

struct RecoveryResult {
  double mean_error = 0.0;  // mass-weighted over the central region
  double p95_error = 0.0;
  double max_error = 0.0;
  std::size_t points = 0;
};

// Regressor trained on MeanQualitySample against mean(q) * g(b) * E[noise],
// over warm-up b whose oracle value lies in its central 90%.
RecoveryResult MeasureContinuousRecovery(const Universe& universe,
                                         const InteractionLog& warmup,
                                         const ExperimentConfig& config,
                                         const FeatureSchema& schema) {
  const double mean_q = PopulationMeanQuality(universe);
  const InteractionLog sample =
      MeanQualitySample(warmup, config.inflation, mean_q,
                        config.recovery_samples,
                        DeriveSeed(config.experiment_seed, 101));
  TrainConfig train = config.train;
  train.max_samples = 0;
  const RegressorModel model = Train(sample, schema, train);
  const double noise = config.inflation.NoiseMean();

  const std::size_t stride = std::max<std::size_t>(1, warmup.size() / 20000);
  std::vector<std::pair<double, double>> points;  // (oracle, relative error)
  for (std::size_t i = 0; i < warmup.size(); i += stride) {
    const auto b = warmup[i].familiarity.span();
    const double oracle = mean_q * config.inflation.Inflation(b) * noise;
    points.emplace_back(oracle, std::abs(model.Forward(b) / oracle - 1.0));
  }
  std::sort(points.begin(), points.end());
  const std::size_t lo = points.size() / 20;
  const std::size_t hi = points.size() - points.size() / 20;
  std::vector<double> errors;
  for (std::size_t k = lo; k < hi; ++k) errors.push_back(points[k].second);
  RecoveryResult result;
  result.points = errors.size();
  if (errors.empty()) return result;
  double total = 0.0;
  for (double e : errors) total += e;
  result.mean_error = total / static_cast<double>(errors.size());
  std::sort(errors.begin(), errors.end());
  result.max_error = errors.back();
  result.p95_error = errors[errors.size() * 95 / 100];
  return result;
}

json CheckGradients(const InteractionLog& warmup, const FeatureSchema& schema,
                    const TrainConfig& train) {
  InteractionLog head(warmup.begin(),
                      warmup.begin() + static_cast<std::ptrdiff_t>(
                                           std::min<std::size_t>(64, warmup.size())));
  const RegressionBatch batch = MakeBatch(head);
  const auto normalizers = FitNormalizers(batch.features, batch.arity, schema);
  double mean = 0.0;
  for (double t : batch.targets) mean += t;
  mean /= static_cast<double>(batch.size());
  double worst = 0.0;
  bool passed = true;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const RegressorModel model = RegressorModel::Initialize(
        normalizers, train.hidden, train.activation, DeriveSeed(77, trial), mean);
    GradientCheckOptions options;
    options.sampled_parameters = 16;
    options.seed = trial;
    const GradientCheckReport report = GradientCheck(model, batch, options);
    worst = std::max(worst, report.max_relative_error);
    passed = passed && report.passed;
  }
  return Check(4, "gradient_correctness", passed && worst < 1e-4,
               json{{"max_relative_error", worst},
                    {"settings", 5},
                    {"parameters_per_setting", 16}},
               "< 1e-4");
}

json CorrelationJson(const CorrelationReport& report) {
  json features = json::array();
  for (const auto& f : report.features) {
    features.push_back(json{{"feature", f.feature},
                            {"before", f.before},
                            {"after", f.after},
                            {"attenuation", f.AttenuationRatio()}});
  }
  return json{{"samples", report.samples}, {"features", features}};
}

bool Attenuated(const CorrelationReport& report, const InflationSpec& spec) {
  for (std::size_t i = 0; i < report.features.size(); ++i) {
    if (spec.alpha[i] <= 0.0) continue;
    const auto& f = report.features[i];
    if (!f.defined || !(std::abs(f.after) < 0.25 * std::abs(f.before))) {
      return false;
    }
  }
  return true;
}

// Random slates from the log; pairs sharing a cell must keep their order.
json CheckOrderPreservation(const InteractionLog& log,
                            const AdjustmentTable& table,
                            const DebiasConfig& debias) {
  Rng rng(DeriveSeed(91, log.size()));
  const double floor = debias.Floor(table.ReferenceMean());
  std::size_t pairs = 0, violations = 0;
  for (int slate = 0; slate < 500; ++slate) {
    std::vector<const Interaction*> items;
    for (int k = 0; k < 40; ++k) items.push_back(&log[rng.Index(log.size())]);
    std::vector<CellIndex> cells;
    std::vector<double> scores;
    for (const auto* r : items) {
      cells.push_back(AssignCell(r->familiarity.span(), table.edges()));
      scores.push_back(DebiasScore(r->urps, table.Factor(r->familiarity.span()),
                                   floor, debias.strength));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        if (cells[i] != cells[j]) continue;
        ++pairs;
        const double raw = items[i]->urps - items[j]->urps;
        const double deb = scores[i] - scores[j];
        if ((raw > 0) != (deb > 0) || (raw < 0) != (deb < 0)) ++violations;
      }
    }
  }
  return Check(6, "within_cell_order_preservation", violations == 0,
               json{{"pairs", pairs}, {"violations", violations}},
               "0 violations");
}

json CheckDirectional(const ExperimentConfig& config, const MetricsReport& report) {
  constexpr std::size_t kNovel = 1, kFamiliar = 2, kOverall = 3;
  json arms = json::array();
  bool passed = true;
  bool any_lafb = false;
  std::optional<double> log_pop_familiar;
  for (const auto& arm : config.arms) {
    if (arm.policy == "log_pop") {
      const double v = report.Row(arm.name).deltas[kFamiliar].point;
      log_pop_familiar = log_pop_familiar ? std::min(*log_pop_familiar, v) : v;
    }
  }
  for (const auto& arm : config.arms) {
    if (arm.policy != "lafb") continue;
    any_lafb = true;
    const auto& d = report.Row(arm.name).deltas;
    const bool familiar = d[kFamiliar].high < 0.0;
    const bool novel = d[kNovel].low > 0.0;
    const bool overall = d[kOverall].high >= 0.0;
    const bool ordering =
        !log_pop_familiar || d[kFamiliar].point <= *log_pop_familiar;
    passed = passed && familiar && novel && overall && ordering;
    arms.push_back(json{{"arm", arm.name},
                        {"familiar_ci_below_zero", familiar},
                        {"novel_ci_above_zero", novel},
                        {"overall_wt_not_negative", overall},
                        {"beats_log_pop_familiar", ordering}});
  }
  return Check(7, "directional_table1", any_lafb ? std::optional(passed) : std::nullopt,
               json{{"arms", arms},
                    {"log_pop_familiar_delta_pp",
                     log_pop_familiar ? json(*log_pop_familiar) : json(nullptr)}},
               "familiar < 0 and novel > 0 (CIs exclude 0), familiar delta <= "
               "log_pop, overall WT CI upper >= 0");
}

json CheckAaNullity(const ExperimentConfig& config, const MetricsReport& report) {
  json arms = json::array();
  bool passed = true;
  for (std::size_t a = 1; a < config.arms.size(); ++a) {
    if (config.arms[a].policy != "control") continue;
    const auto& d = report.Row(config.arms[a].name).deltas;
    bool contains = true;
    for (const auto& e : d) contains = contains && e.ContainsZero();
    passed = passed && contains;
    arms.push_back(json{{"arm", config.arms[a].name}, {"all_contain_zero", contains}});
  }
  return Check(11, "aa_nullity",
               arms.empty() ? std::nullopt : std::optional(passed),
               json{{"arms", arms}}, "every delta CI contains 0");
}

void AppendFig3(std::ostringstream& csv, std::string_view mode,
                std::span<const LevelDistribution> levels) {
  static constexpr std::array<const char*, 3> kNames = {"low", "medium", "high"};
  for (const auto& l : levels) {
    csv << mode << ',' << kNames[l.level] << ',' << l.raw.count << ','
        << Fixed(l.raw.mean) << ',' << Fixed(l.raw.variance) << ','
        << Fixed(l.debiased.mean) << ',' << Fixed(l.debiased.variance);
    for (std::size_t d : {0, 4, 8}) csv << ',' << Fixed(l.raw.deciles[d]);
    for (std::size_t d : {0, 4, 8}) csv << ',' << Fixed(l.debiased.deciles[d]);
    csv << '\n';
  }
}

}  // namespace

ReportBundle Evaluate(const EvaluationInputs& in) {
  if (!in.config || !in.universe || !in.schema || !in.artifacts || !in.warmup ||
      !in.control || !in.summaries) {
    throw ValidationError("evaluation inputs incomplete");
  }
  const ExperimentConfig& config = *in.config;
  const FeatureSchema& schema = *in.schema;
  const FittedArtifacts& artifacts = *in.artifacts;
  if (!artifacts.table || !artifacts.model) {
    throw ValidationError("evaluation needs both fitted models");
  }
  const InteractionLog& control = *in.control;
  if (control.empty() || in.warmup->empty()) {
    throw ValidationError("evaluation needs non-empty logs");
  }
  const std::size_t feature = schema.IndexOf(config.diagnostic_feature);

  ReportBundle bundle;
  const MetricsReport report = BuildReport(*in.summaries, config.metrics);
  bundle.table1_csv = report.Table1Csv();

  DebiasConfig discrete = config.debias;
  discrete.mode = DebiasMode::kDiscrete;
  DebiasConfig continuous = config.debias;
  continuous.mode = DebiasMode::kContinuous;
  const FactorModel& table = *artifacts.table;
  const FactorModel& model = *artifacts.model;

  // Fig. 3: score distributions by familiarity level.
  const auto fig3_discrete =
      ScoreDistributionByBucket(control, artifacts.edges, feature, table, discrete);
  const auto fig3_continuous = ScoreDistributionByBucket(
      control, artifacts.edges, feature, model, continuous);
  std::ostringstream fig3;
  fig3 << "mode,level,count,raw_mean,raw_variance,debiased_mean,"
          "debiased_variance,raw_p10,raw_p50,raw_p90,debiased_p10,"
          "debiased_p50,debiased_p90\n";
  AppendFig3(fig3, "discrete", fig3_discrete);
  AppendFig3(fig3, "continuous", fig3_continuous);
  bundle.fig3_csv = fig3.str();
  const FlatteningResult flat_discrete = LevelMeanFlattening(fig3_discrete);
  const FlatteningResult flat_continuous = LevelMeanFlattening(fig3_continuous);

  // Fig. 4: label/prediction shift and calibration.
  std::ostringstream shift;
  shift << "mode,bucket,count,feature_low,feature_high,mean_label,"
           "mean_debiased_label,mean_prediction,mean_debiased_prediction\n";
  for (const auto& [name, factors, cfg] :
       {std::tuple<std::string_view, const FactorModel*, const DebiasConfig*>{
            "discrete", &table, &discrete},
        {"continuous", &model, &continuous}}) {
    for (const auto& b :
         LabelPredictionShift(control, *factors, model, *cfg, feature)) {
      shift << name << ',' << b.bucket << ',' << b.count << ','
            << Fixed(b.feature_low) << ',' << Fixed(b.feature_high) << ','
            << Fixed(b.mean_label) << ',' << Fixed(b.mean_debiased_label) << ','
            << Fixed(b.mean_prediction) << ','
            << Fixed(b.mean_debiased_prediction) << '\n';
    }
  }
  bundle.fig4_shift_csv = shift.str();

  std::ostringstream calibration_csv;
  calibration_csv << "mode,bucket,count,feature_low,feature_high,"
                     "mean_prediction,mean_label,ratio\n";
  std::size_t calibrated = 0;
  json calibration_json = json::object();
  for (const auto& [name, factors] :
       {std::pair<std::string_view, const FactorModel*>{"discrete", &table},
        {"continuous", &model}}) {
    json rows = json::array();
    for (const auto& b : CalibrationRatio(*factors, control, feature)) {
      calibration_csv << name << ',' << b.bucket << ',' << b.count << ','
                      << Fixed(b.feature_low) << ',' << Fixed(b.feature_high)
                      << ',' << Fixed(b.mean_prediction) << ','
                      << Fixed(b.mean_label) << ',' << Fixed(b.ratio) << '\n';
      rows.push_back(b.ratio);
      if (name == "continuous" && !b.empty && b.ratio >= 0.9 && b.ratio <= 1.1) {
        ++calibrated;
      }
    }
    calibration_json[std::string(name)] = rows;
  }
  bundle.fig4_calibration_csv = calibration_csv.str();

  const CorrelationReport corr_discrete =
      ResidualCorrelation(control, schema, table, discrete);
  const CorrelationReport corr_continuous =
      ResidualCorrelation(control, schema, model, continuous);

  const RecoveryResult recovery =
      MeasureContinuousRecovery(*in.universe, *in.warmup, config, schema);

  json checks = json::array();
  checks.push_back(CheckMeanOne(control, artifacts.edges));
  checks.push_back(CheckDiscreteRecovery(*in.warmup, *in.universe,
                                         config.inflation, artifacts.edges));
  checks.push_back(Check(
      3, "oracle_recovery_continuous", recovery.mean_error <= 0.05,
      json{{"mean_relative_error", recovery.mean_error},
           {"p95_relative_error", recovery.p95_error},
           {"max_relative_error", recovery.max_error},
           {"points", recovery.points},
           {"training_samples", config.recovery_samples}},
      "mass-weighted mean relative error <= 0.05 over the central 90% of b"));
  checks.push_back(CheckGradients(*in.warmup, schema, config.train));
  checks.push_back(Check(
      5, "decorrelation_attenuation",
      Attenuated(corr_discrete, config.inflation) &&
          Attenuated(corr_continuous, config.inflation),
      json{{"discrete", CorrelationJson(corr_discrete)},
           {"continuous", CorrelationJson(corr_continuous)}},
      "|corr after| < 0.25 |corr before| for every inflated feature"));
  checks.push_back(
      CheckOrderPreservation(control, *artifacts.table, discrete));
  checks.push_back(CheckDirectional(config, report));
  checks.push_back(Check(8, "calibration", calibrated >= 3,
                         json{{"buckets_within", calibrated},
                              {"ratios", calibration_json}},
                         ">= 3 of 5 continuous buckets in [0.9, 1.1]"));
  checks.push_back(Check(
      9, "fig3_flattening",
      flat_discrete.ratio < 0.25 && flat_continuous.ratio < 0.25,
      json{{"discrete",
            {{"raw_variance", flat_discrete.raw_variance},
             {"debiased_variance", flat_discrete.debiased_variance},
             {"ratio", flat_discrete.ratio}}},
           {"continuous",
            {{"raw_variance", flat_continuous.raw_variance},
             {"debiased_variance", flat_continuous.debiased_variance},
             {"ratio", flat_continuous.ratio}}}},
      "variance ratio < 0.25 in both modes"));
  checks.push_back(Check(10, "determinism", std::nullopt,
                         json{{"note", "compare bundles of two invocations"}},
                         "byte-identical bundles"));
  checks.push_back(CheckAaNullity(config, report));

  bool all = true;
  for (const auto& c : checks) {
    if (c.at("passed").is_boolean()) all = all && c.at("passed").get<bool>();
  }

  json fit{{"cells", artifacts.table->cell_count()},
           {"global_mean", artifacts.table->global_mean()},
           {"edges", artifacts.edges.ToJson()},
           {"model",
            {{"samples", artifacts.model->metadata().samples},
             {"epochs_run", artifacts.model->metadata().epochs_run},
             {"best_epoch", artifacts.model->metadata().best_epoch},
             {"validation_loss", artifacts.model->metadata().validation_loss},
             {"output_scale", artifacts.model->output_scale()}}}};
  json summaries = json::array();
  for (const auto& s : *in.summaries) {
    summaries.push_back(json{{"arm", s.name},
                             {"users", s.users.size()},
                             {"interactions", s.interactions}});
  }
  bundle.report = json{{"config", config.ToJson()},
                       {"schema", ToJson(schema)},
                       {"fit", fit},
                       {"arms", summaries},
                       {"metrics", report.ToJson()},
                       {"diagnostics",
                        {{"diagnostic_feature", config.diagnostic_feature},
                         {"correlation",
                          {{"discrete", CorrelationJson(corr_discrete)},
                           {"continuous", CorrelationJson(corr_continuous)}}}}},
                       {"checks", checks},
                       {"all_passed", all}};
  return bundle;
}

ReportBundle RunPipeline(const ExperimentConfig& config, const fs::path& out) {
  config.Validate();
  const FeatureSchema& schema = SimulatorSchema();
  std::string stage = "simulate";
  std::optional<Universe> universe;
  InteractionLog warmup;
  FittedArtifacts artifacts;
  InteractionLog control;
  const auto partial = [&](const fs::path& dir) {
    WriteJsonFile(dir / "config.json", config.ToJson());
    if (universe) WriteJsonFile(dir / "manifest.json", universe->Manifest());
    if (!warmup.empty()) WriteLogFile(dir / "logs" / "warmup.jsonl", warmup, schema);
    WriteArtifacts(artifacts, schema, dir);
  };
  try {
    universe = Universe::Generate(config.universe);
    SessionConfig warmup_session = config.session;
    warmup_session.sessions = config.warmup_sessions;
    const ControlPolicy warmup_policy;
    warmup = RunArm(*universe, warmup_policy, config.inflation, warmup_session,
                    config.warmup_seed, "warmup")
                 .log;

    stage = "fit";
    artifacts = FitArtifacts(warmup, schema, config);

    stage = "experiment";
    std::vector<ArmSpec> arms;
    for (const auto& arm : config.arms) {
      arms.push_back({arm.name, MakePolicy(arm, config, artifacts)});
    }
    const EmergingCreatorSet emerging =
        EmergingFromWarmup(warmup, universe->Creators(), config.metrics);
    const ExperimentResult result = RunExperiment(
        *universe, arms, config.inflation, config.session,
        config.experiment_seed, emerging, config.metrics, false,
        [&](const ArmRun& run) {
          if (run.name == config.arms.front().name) control = run.log;
          if (config.write_logs) {
            WriteLogFile(out / "logs" / (run.name + ".jsonl"), run.log, schema);
          }
        });

    stage = "evaluate";
    EvaluationInputs inputs;
    inputs.config = &config;
    inputs.universe = &*universe;
    inputs.schema = &schema;
    inputs.artifacts = &artifacts;
    inputs.warmup = &warmup;
    inputs.control = &control;
    inputs.summaries = &result.summaries;
    ReportBundle bundle = Evaluate(inputs);

    stage = "report";
    WriteBundle(bundle, out);
    if (config.write_logs) {
      WriteJsonFile(out / "manifest.json", universe->Manifest());
      WriteLogFile(out / "logs" / "warmup.jsonl", warmup, schema);
      WriteArtifacts(artifacts, schema, out);
    }
    return bundle;
  } catch (const std::exception& e) {
    try {
      partial(out / "failed");
    } catch (...) {
      // Keep the original error.
    }
    throw StageError(stage, e.what());
  }
}

}  // namespace lafb
