// lafb: simulate, fit, debias, evaluate and report familiarity-debiasing
// experiments.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 stage failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lafb/harness.h"
#include "lafb/io.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

lafb::ExperimentConfig LoadConfig(const CommonOptions& opts) {
  lafb::ExperimentConfig config =
      opts.config.empty() ? lafb::ExperimentConfig::FromJson(json{
                                {"arms", json::array({{{"name", "control"},
                                                       {"policy", "control"}}})}})
                          : lafb::ExperimentConfig::Load(opts.config);
  if (opts.seed) config.OverrideSeed(*opts.seed);
  return config;
}

lafb::FeatureSchema LoadSchema(const std::string& path) {
  if (path.empty()) return lafb::SimulatorSchema();
  return lafb::SchemaFromJson(lafb::ReadJsonFile(path));
}

void RequireFile(const fs::path& path) {
  if (!fs::exists(path)) {
    throw lafb::ValidationError("missing input " + path.string());
  }
}

int Simulate(const CommonOptions& opts, const std::string& artifacts_dir) {
  const lafb::ExperimentConfig config = LoadConfig(opts);
  const fs::path out = opts.out.empty() ? fs::path("sim") : fs::path(opts.out);
  const lafb::FeatureSchema& schema = lafb::SimulatorSchema();
  const auto universe = lafb::Universe::Generate(config.universe);
  lafb::WriteJsonFile(out / "manifest.json", universe.Manifest());
  lafb::WriteJsonFile(out / "schema.json", lafb::ToJson(schema));

  lafb::SessionConfig warmup_session = config.session;
  warmup_session.sessions = config.warmup_sessions;
  const lafb::ControlPolicy control;
  const auto warmup = lafb::RunArm(universe, control, config.inflation,
                                   warmup_session, config.warmup_seed, "warmup");
  lafb::WriteLogFile(out / "logs" / "warmup.jsonl", warmup.log, schema);
  std::cout << "warmup: " << warmup.log.size() << " interactions\n";

  const lafb::FittedArtifacts artifacts = lafb::ReadArtifacts(
      artifacts_dir.empty() ? out : fs::path(artifacts_dir), schema);
  for (const auto& arm : config.arms) {
    std::shared_ptr<const lafb::RankingPolicy> policy;
    try {
      policy = lafb::MakePolicy(arm, config, artifacts);
    } catch (const lafb::ValidationError& e) {
      if (!lafb::ArmNeedsArtifacts(arm)) throw;
      std::cout << arm.name << ": skipped (" << e.what() << ")\n";
      continue;
    }
    const auto run = lafb::RunArm(universe, *policy, config.inflation,
                                  config.session, config.experiment_seed,
                                  arm.name);
    lafb::WriteLogFile(out / "logs" / (arm.name + ".jsonl"), run.log, schema);
    std::cout << arm.name << ": " << run.log.size() << " interactions\n";
  }
  return 0;
}

int Fit(const CommonOptions& opts, const std::string& log_path,
        const std::string& schema_path) {
  const lafb::ExperimentConfig config = LoadConfig(opts);
  RequireFile(log_path);
  const lafb::FeatureSchema schema = LoadSchema(schema_path);
  const lafb::InteractionLog log = lafb::ReadLogFile(log_path, schema);
  const auto validation = lafb::ValidateLog(log, schema);
  if (!validation.ok()) {
    for (const auto& e : validation.errors) {
      std::cerr << "record " << e.index << ": " << e.message << '\n';
    }
    throw lafb::ValidationError("log failed validation");
  }
  const lafb::FittedArtifacts artifacts =
      lafb::FitArtifacts(validation.records, schema, config);
  const fs::path out = opts.out.empty() ? fs::path(".") : fs::path(opts.out);
  lafb::WriteArtifacts(artifacts, schema, out);
  std::cout << "table: " << artifacts.table->cell_count()
            << " cells, global mean " << artifacts.table->global_mean() << '\n'
            << "model: " << artifacts.model->metadata().epochs_run
            << " epochs, validation mse "
            << artifacts.model->metadata().validation_loss << '\n';
  return 0;
}

int Debias(const CommonOptions& opts, const std::string& artifact_path,
           const std::string& log_path, const std::string& schema_path,
           std::optional<double> strength) {
  RequireFile(artifact_path);
  RequireFile(log_path);
  const lafb::FeatureSchema schema = LoadSchema(schema_path);
  const json artifact = lafb::ReadJsonFile(artifact_path);
  std::unique_ptr<lafb::FactorModel> factors;
  lafb::DebiasConfig config =
      opts.config.empty() ? lafb::DebiasConfig{} : LoadConfig(opts).debias;
  const std::string kind = artifact.value("kind", std::string());
  if (kind == "adjustment_table") {
    factors = std::make_unique<lafb::AdjustmentTable>(
        lafb::AdjustmentTable::FromJson(artifact, &schema));
    config.mode = lafb::DebiasMode::kDiscrete;
  } else if (kind == "regressor") {
    factors = std::make_unique<lafb::RegressorModel>(
        lafb::RegressorModel::FromJson(artifact, &schema));
    config.mode = lafb::DebiasMode::kContinuous;
  } else {
    throw lafb::ValidationError("unknown artifact kind '" + kind + "'");
  }
  if (strength) config.strength = *strength;
  config.Validate();

  const lafb::InteractionLog log = lafb::ReadLogFile(log_path, schema);
  const double floor = config.Floor(factors->ReferenceMean());
  std::ofstream file;
  if (!opts.out.empty()) {
    const fs::path out(opts.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    file.open(out);
    if (!file) throw std::runtime_error("cannot write " + out.string());
  }
  std::ostream& sink = opts.out.empty() ? std::cout : file;
  for (const auto& r : log) {
    json j = lafb::ToJson(r, schema);
    const double adj = factors->Factor(r.familiarity.span());
    j["adjustment"] = adj;
    j["debiased_urps"] = lafb::DebiasScore(r.urps, adj, floor, config.strength);
    sink << j.dump() << '\n';
  }
  return 0;
}

int Evaluate(const CommonOptions& opts, const std::string& logs_dir,
             const std::string& artifacts_dir) {
  const lafb::ExperimentConfig config = LoadConfig(opts);
  const fs::path logs(logs_dir);
  const lafb::FeatureSchema schema = fs::exists(logs / ".." / "schema.json")
                                         ? LoadSchema((logs / ".." / "schema.json").string())
                                         : lafb::SimulatorSchema();
  const lafb::FittedArtifacts artifacts =
      lafb::ReadArtifacts(artifacts_dir, schema);
  if (!artifacts.table || !artifacts.model) {
    throw lafb::ValidationError("artifacts directory needs table.json and model.json");
  }
  const auto universe = lafb::Universe::Generate(config.universe);
  RequireFile(logs / "warmup.jsonl");
  const lafb::InteractionLog warmup = lafb::ReadLogFile(logs / "warmup.jsonl", schema);
  const lafb::EmergingCreatorSet emerging =
      lafb::EmergingFromWarmup(warmup, universe.Creators(), config.metrics);

  std::vector<lafb::ArmSummary> summaries;
  lafb::InteractionLog control;
  const auto days = static_cast<double>(std::max<std::size_t>(config.session.sessions, 1));
  for (const auto& arm : config.arms) {
    const fs::path path = logs / (arm.name + ".jsonl");
    RequireFile(path);
    lafb::InteractionLog log = lafb::ReadLogFile(path, schema);
    summaries.push_back(
        lafb::SummarizeArm(arm.name, log, emerging, config.metrics, days));
    if (summaries.size() == 1) control = std::move(log);
  }

  lafb::EvaluationInputs inputs;
  inputs.config = &config;
  inputs.universe = &universe;
  inputs.schema = &schema;
  inputs.artifacts = &artifacts;
  inputs.warmup = &warmup;
  inputs.control = &control;
  inputs.summaries = &summaries;
  const lafb::ReportBundle bundle = lafb::Evaluate(inputs);
  lafb::WriteBundle(bundle, opts.out.empty() ? fs::path("report") : fs::path(opts.out));
  std::cout << bundle.table1_csv;
  return 0;
}

std::string Cell(const json& d) {
  auto num = [](const json& v) {
    if (!v.is_number()) return std::string("nan");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v.get<double>();
    return s.str();
  };
  return num(d.at("point")) + " [" + num(d.at("low")) + ", " +
         num(d.at("high")) + "]";
}

int Report(const CommonOptions& opts, const std::string& in) {
  const fs::path path = fs::is_directory(in) ? fs::path(in) / "report.json" : fs::path(in);
  RequireFile(path);
  const json report = lafb::ReadJsonFile(path);
  std::ostringstream md;
  md << "| Method | Emerging Creator Exposure (%) | Novel WT Share (pp) | "
        "Familiar WT Share (pp) | Overall WT (%) |\n|---|---|---|---|---|\n";
  for (const auto& row : report.at("metrics").at("deltas_vs_control")) {
    md << "| " << row.at("arm").get<std::string>() << " | "
       << Cell(row.at("emerging_creator_exposure")) << " | "
       << Cell(row.at("novel_wt_share")) << " | "
       << Cell(row.at("familiar_wt_share")) << " | "
       << Cell(row.at("overall_wt")) << " |\n";
  }
  md << '\n';
  for (const auto& check : report.at("checks")) {
    const json& passed = check.at("passed");
    md << "- [" << (passed.is_null() ? "n/a" : passed.get<bool>() ? "PASS" : "FAIL")
       << "] " << check.at("id").get<int>() << ' '
       << check.at("name").get<std::string>() << '\n';
  }
  std::cout << md.str();
  if (!opts.out.empty()) lafb::WriteTextFile(opts.out, md.str());
  return 0;
}

int Run(const CommonOptions& opts) {
  const lafb::ExperimentConfig config = LoadConfig(opts);
  const fs::path out = opts.out.empty() ? fs::path("report") : fs::path(opts.out);
  const lafb::ReportBundle bundle = lafb::RunPipeline(config, out);
  std::cout << bundle.table1_csv;
  for (const auto& check : bundle.report.at("checks")) {
    const json& passed = check.at("passed");
    std::cout << "check " << check.at("id").get<int>() << ' '
              << check.at("name").get<std::string>() << ": "
              << (passed.is_null() ? "n/a" : passed.get<bool>() ? "pass" : "fail")
              << '\n';
  }
  return 0;
}

int GradCheck(const CommonOptions& opts, std::size_t settings,
              std::size_t parameters, std::size_t rows) {
  const lafb::ExperimentConfig config = LoadConfig(opts);
  const lafb::FeatureSchema& schema = lafb::SimulatorSchema();
  lafb::UniverseConfig small = config.universe;
  small.users = std::min<std::size_t>(small.users, 50);
  const auto universe = lafb::Universe::Generate(small);
  lafb::SessionConfig session = config.session;
  session.sessions = 5;
  const auto run = lafb::RunArm(universe, lafb::ControlPolicy{}, config.inflation,
                                session, config.warmup_seed, "gradcheck");
  lafb::InteractionLog head(run.log.begin(),
                            run.log.begin() + static_cast<std::ptrdiff_t>(
                                                  std::min(rows, run.log.size())));
  const lafb::RegressionBatch batch = lafb::MakeBatch(head);
  const auto normalizers = lafb::FitNormalizers(batch.features, batch.arity, schema);
  double worst = 0.0;
  bool passed = true;
  json results = json::array();
  for (std::size_t s = 0; s < settings; ++s) {
    const auto model = lafb::RegressorModel::Initialize(
        normalizers, config.train.hidden, config.train.activation,
        lafb::DeriveSeed(config.train.seed, s), 1.0);
    lafb::GradientCheckOptions options;
    options.sampled_parameters = parameters;
    options.seed = s;
    const auto report = lafb::GradientCheck(model, batch, options);
    worst = std::max(worst, report.max_relative_error);
    passed = passed && report.passed;
    results.push_back({{"setting", s},
                       {"max_relative_error", report.max_relative_error},
                       {"passed", report.passed}});
  }
  const json summary{{"settings", results},
                     {"max_relative_error", worst},
                     {"passed", passed}};
  std::cout << summary.dump(2) << '\n';
  if (!opts.out.empty()) lafb::WriteJsonFile(opts.out, summary);
  return passed ? 0 : kExitStage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Familiarity-debiasing experiments"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto add_common = [&opts](CLI::App* cmd) {
    cmd->add_option("--config", opts.config, "Experiment config (JSON)");
    cmd->add_option("--seed", opts.seed, "Derive every seed from this value");
    cmd->add_option("--out", opts.out, "Output path");
  };

  std::string artifacts_dir, log_path, schema_path, artifact_path, logs_dir, in;
  std::optional<double> strength;
  std::size_t settings = 5, parameters = 16, rows = 64;

  auto* simulate = app.add_subcommand("simulate", "Generate warm-up and arm logs");
  add_common(simulate);
  simulate->add_option("--artifacts", artifacts_dir,
                       "Fitted artifacts for arms that need them (default: --out)");

  auto* fit = app.add_subcommand("fit", "Fit the bucket table and regressor");
  add_common(fit);
  fit->add_option("--log", log_path, "Interaction log (JSONL)")->required();
  fit->add_option("--schema", schema_path, "Feature schema (JSON)");

  auto* debias = app.add_subcommand("debias", "Debias the scores of a log");
  add_common(debias);
  debias->add_option("--artifact", artifact_path, "table.json or model.json")->required();
  debias->add_option("--log", log_path, "Interaction log (JSONL)")->required();
  debias->add_option("--schema", schema_path, "Feature schema (JSON)");
  debias->add_option("--strength", strength, "Exponent on the factor");

  auto* evaluate = app.add_subcommand("evaluate", "Metrics and checks from logs");
  add_common(evaluate);
  evaluate->add_option("--logs", logs_dir, "Directory of per-arm logs")->required();
  evaluate->add_option("--artifacts", artifacts_dir, "Directory of fitted artifacts")
      ->required();

  auto* report = app.add_subcommand("report", "Render Table 1 and checks");
  add_common(report);
  report->add_option("--in", in, "report.json or its directory")->required();

  auto* run = app.add_subcommand("run", "Full pipeline");
  add_common(run);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  add_common(gradcheck);
  gradcheck->add_option("--settings", settings, "Random parameter settings");
  gradcheck->add_option("--parameters", parameters, "Sampled parameters per setting");
  gradcheck->add_option("--rows", rows, "Batch rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) return Simulate(opts, artifacts_dir);
    if (*fit) return Fit(opts, log_path, schema_path);
    if (*debias) return Debias(opts, artifact_path, log_path, schema_path, strength);
    if (*evaluate) return Evaluate(opts, logs_dir, artifacts_dir);
    if (*report) return Report(opts, in);
    if (*run) return Run(opts);
    if (*gradcheck) return GradCheck(opts, settings, parameters, rows);
  } catch (const lafb::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const lafb::StageError& e) {
    std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
