#pragma once

// Experiment configuration, the individual pipeline stages and the
// end-to-end run that writes the report bundle.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lafb/bucketizer.h"
#include "lafb/core.h"
#include "lafb/debias.h"
#include "lafb/estimator.h"
#include "lafb/metrics.h"
#include "lafb/simulator.h"

namespace lafb {

// A pipeline stage failed; `stage` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

nlohmann::json ToJson(const BucketizerConfig& config);
BucketizerConfig BucketizerConfigFromJson(const nlohmann::json& j);

// One experiment arm. `policy` is one of control, lafb, log_pop,
// user_centric, item_centric, static_boost; `params` holds its parameters.
struct ArmConfig {
  std::string name;
  std::string policy;
  nlohmann::json params = nlohmann::json::object();
};

struct ExperimentConfig {
  UniverseConfig universe;
  InflationSpec inflation;
  SessionConfig session;
  std::size_t warmup_sessions = 50;
  std::uint64_t warmup_seed = 2;
  std::uint64_t experiment_seed = 3;
  BucketizerConfig bucketizer;
  TrainConfig train;
  DebiasConfig debias;
  MetricsConfig metrics;
  std::vector<ArmConfig> arms;
  // Feature used for the level and equal-mass bucket diagnostics.
  std::string diagnostic_feature = "channel_watch_count";
  // Training samples for the continuous recovery check.
  std::size_t recovery_samples = 100'000;
  bool write_logs = false;

  // Throws ValidationError on unknown policies, duplicate arm names, a
  // first arm that is not a control, or invalid component configs.
  void Validate() const;
  // Replaces every seed with one derived from `seed`.
  void OverrideSeed(std::uint64_t seed);

  nlohmann::json ToJson() const;
  static ExperimentConfig FromJson(const nlohmann::json& j);
  static ExperimentConfig Load(const std::filesystem::path& path);
};

// Factor models fitted on a log.
struct FittedArtifacts {
  BucketEdges edges;
  std::shared_ptr<const AdjustmentTable> table;
  std::shared_ptr<const RegressorModel> model;
};

FittedArtifacts FitArtifacts(const InteractionLog& log,
                             const FeatureSchema& schema,
                             const ExperimentConfig& config);
void WriteArtifacts(const FittedArtifacts& artifacts,
                    const FeatureSchema& schema,
                    const std::filesystem::path& dir);
// Missing files leave the corresponding member empty.
FittedArtifacts ReadArtifacts(const std::filesystem::path& dir,
                              const FeatureSchema& schema);

// True when the arm can be built without fitted artifacts.
bool ArmNeedsArtifacts(const ArmConfig& arm);
std::shared_ptr<const RankingPolicy> MakePolicy(const ArmConfig& arm,
                                                const ExperimentConfig& config,
                                                const FittedArtifacts& artifacts);

struct ReportBundle {
  nlohmann::json report;
  std::string table1_csv;
  std::string fig3_csv;
  std::string fig4_shift_csv;
  std::string fig4_calibration_csv;
};

// Writes report.json, table1.csv, fig3_distribution.csv, fig4_shift.csv and
// fig4_calibration.csv into `dir`.
void WriteBundle(const ReportBundle& bundle, const std::filesystem::path& dir);

// Everything the evaluate stage reads.
struct EvaluationInputs {
  const ExperimentConfig* config = nullptr;
  const Universe* universe = nullptr;
  const FeatureSchema* schema = nullptr;
  const FittedArtifacts* artifacts = nullptr;
  const InteractionLog* warmup = nullptr;
  const InteractionLog* control = nullptr;
  const std::vector<ArmSummary>* summaries = nullptr;
};

// Metrics, diagnostics and acceptance checks for one experiment.
ReportBundle Evaluate(const EvaluationInputs& inputs);

// Emerging creators from the warm-up log.
EmergingCreatorSet EmergingFromWarmup(const InteractionLog& warmup,
                                      const CreatorRegistry& creators,
                                      const MetricsConfig& metrics);

// Simulate, fit, run all arms and evaluate. Writes the bundle (and logs when
// configured) under `out`. On a stage failure, outputs produced so far are
// kept under out/failed/ and StageError is thrown.
ReportBundle RunPipeline(const ExperimentConfig& config,
                         const std::filesystem::path& out);

// Records with b drawn from `source` and urps = mean_quality * g(b) *
// lognormal noise, so E[urps | b] = mean_quality * g(b) * E[noise] exactly.
InteractionLog MeanQualitySample(const InteractionLog& source,
                                 const InflationSpec& spec, double mean_quality,
                                 std::size_t count, std::uint64_t seed);

// Exact mean of true quality over every user-item pair.
double PopulationMeanQuality(const Universe& universe);

// Numeric part of a simulator id such as "u0042".
std::uint32_t ParseSimulatorIndex(std::string_view id);

}  // namespace lafb
