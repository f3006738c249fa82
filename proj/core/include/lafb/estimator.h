#pragma once

// Continuous familiarity modeling: a small feed-forward regressor f(b; theta)
// with a softplus output head, trained with mean squared error to predict the
// raw score s from the familiarity vector b.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lafb/core.h"

namespace lafb {

enum class Activation { kSoftplus, kIdentity };

std::string_view ToString(Activation activation);
Activation ParseActivation(std::string_view text);

// Numerically stable log(1 + exp(z)); never returns 0 for finite z.
double Softplus(double z);
double Sigmoid(double z);

// Optional log1p, then standardization.
struct FeatureNormalizer {
  bool log1p = false;
  double mean = 0.0;
  double stddev = 1.0;

  double Apply(double value) const;
};

// Count features get log1p; every feature is standardized with the sample
// mean and standard deviation (1 when the feature is constant).
std::vector<FeatureNormalizer> FitNormalizers(
    std::span<const double> rows, std::size_t arity,
    const FeatureSchema& schema);

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // outputs x inputs, row-major
  std::vector<double> bias;     // outputs
  Activation activation = Activation::kSoftplus;
};

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Gradient with the same shape as the model parameters, layer by layer.
struct Gradient {
  std::vector<LayerGradient> layers;

  std::vector<double> Flatten() const;
};

// Raw familiarity rows (row-major, `arity` columns) and their target scores.
struct RegressionBatch {
  std::size_t arity = 0;
  std::vector<double> features;
  std::vector<double> targets;
  // Rows already passed through the model's normalizers.
  bool normalized = false;

  std::size_t size() const { return targets.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * arity, arity};
  }
};

RegressionBatch MakeBatch(const InteractionLog& log);

struct TrainConfig {
  std::vector<std::size_t> hidden = {32, 16};
  Activation activation = Activation::kSoftplus;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  // Seeded uniform subsample of the log, in log order, when positive.
  std::size_t max_samples = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  std::vector<double> validation_history;
  // Set when the log is smaller than ten batches.
  bool small_sample = false;
};

class RegressorModel final : public FactorModel {
 public:
  RegressorModel() = default;
  // Throws ValidationError unless the layers chain from the normalizer arity
  // to a single output and hold at least one parameter.
  RegressorModel(std::vector<FeatureNormalizer> normalizers,
                 std::vector<DenseLayer> layers, double output_scale = 1.0,
                 double reference_mean = 1.0);

  // Glorot-uniform weights, zero hidden biases, and an output bias placing
  // the initial prediction at output_scale.
  static RegressorModel Initialize(std::vector<FeatureNormalizer> normalizers,
                                   std::span<const std::size_t> hidden,
                                   Activation activation,
                                   std::uint64_t seed,
                                   double output_scale = 1.0);

  std::size_t arity() const { return normalizers_.size(); }
  const std::vector<FeatureNormalizer>& normalizers() const {
    return normalizers_;
  }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  double output_scale() const { return output_scale_; }
  const TrainingMetadata& metadata() const { return metadata_; }
  void set_metadata(TrainingMetadata metadata) {
    metadata_ = std::move(metadata);
  }
  const TrainConfig& train_config() const { return train_config_; }
  void set_train_config(TrainConfig config) {
    train_config_ = std::move(config);
  }
  void set_reference_mean(double mean) { reference_mean_ = mean; }

  std::vector<double> Normalize(std::span<const double> familiarity) const;
  RegressionBatch Normalized(const RegressionBatch& batch) const;

  // output_scale * softplus(last layer); strictly positive.
  double Forward(std::span<const double> familiarity) const;
  double ForwardNormalized(std::span<const double> inputs) const;

  double Factor(std::span<const double> familiarity) const override {
    return Forward(familiarity);
  }
  double ReferenceMean() const override { return reference_mean_; }

  std::size_t ParameterCount() const;
  // Flat view: layer by layer, weights then bias.
  double& Parameter(std::size_t index);
  std::vector<double> Parameters() const;
  void SetParameters(std::span<const double> values);

  nlohmann::json ToJson(const FeatureSchema& schema) const;
  static RegressorModel FromJson(const nlohmann::json& j,
                                 const FeatureSchema* schema = nullptr);

 private:
  std::vector<FeatureNormalizer> normalizers_;
  std::vector<DenseLayer> layers_;
  double output_scale_ = 1.0;
  double reference_mean_ = 1.0;
  TrainConfig train_config_;
  TrainingMetadata metadata_;
};

// Mean over the batch of (f(b) - s)^2. Throws on an empty batch.
double MseLoss(const RegressorModel& model, const RegressionBatch& batch);

// Analytic gradient of MseLoss with respect to every weight and bias.
Gradient Backward(const RegressorModel& model, const RegressionBatch& batch);

// Mini-batch Adam on the MSE objective with seeded shuffling, a held-out
// validation split and early stopping. Returns the parameters with the best
// validation loss. Deterministic for a given log order and seed.
RegressorModel Train(const InteractionLog& log, const FeatureSchema& schema,
                     const TrainConfig& config);
RegressorModel Train(const RegressionBatch& data, const FeatureSchema& schema,
                     const TrainConfig& config);

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Number of randomly sampled parameters; 0 checks all of them.
  std::size_t sampled_parameters = 0;
  std::uint64_t seed = 0;
};

struct GradientCheckEntry {
  std::size_t parameter = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double max_relative_error = 0.0;
  bool passed = false;
};

// Compares Backward against central finite differences. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradientCheckReport GradientCheck(const RegressorModel& model,
                                  const RegressionBatch& batch,
                                  const GradientCheckOptions& options);

}  // namespace lafb
