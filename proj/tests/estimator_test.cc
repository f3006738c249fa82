#include "lafb/estimator.h"

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "lafb/rng.h"
#include "test_support.h"

namespace lafb {
namespace {

using testing::AffinitySchema;
using testing::CountSchema;

// One dense layer of zero weights: the output is scale * softplus(bias).
RegressorModel ConstantModel(std::size_t arity, double bias, double scale) {
  DenseLayer layer;
  layer.inputs = arity;
  layer.outputs = 1;
  layer.weights.assign(arity, 0.0);
  layer.bias = {bias};
  return RegressorModel(std::vector<FeatureNormalizer>(arity), {layer}, scale);
}

RegressionBatch Batch(std::size_t arity, std::vector<double> features,
                      std::vector<double> targets) {
  RegressionBatch b;
  b.arity = arity;
  b.features = std::move(features);
  b.targets = std::move(targets);
  return b;
}

RegressorModel RandomModel(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureNormalizer> norms(3);
  const std::vector<std::size_t> hidden = {6, 4};
  RegressorModel model = RegressorModel::Initialize(
      norms, hidden, Activation::kSoftplus, seed, 1.7);
  std::vector<double> theta = model.Parameters();
  for (double& t : theta) t = rng.Normal(0.0, 0.7);
  model.SetParameters(theta);
  return model;
}

RegressionBatch RandomBatch(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  RegressionBatch b;
  b.arity = 3;
  for (std::size_t i = 0; i < rows; ++i) {
    for (int f = 0; f < 3; ++f) b.features.push_back(rng.Normal());
    b.targets.push_back(rng.Uniform(0.5, 3.0));
  }
  return b;
}

TEST(NormalizeTest, Log1pThenStandardize) {
  FeatureNormalizer n{true, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(n.Apply(0.0), 0.0);
  EXPECT_NEAR(n.Apply(std::numbers::e - 1.0), 1.0, 1e-15);
  FeatureNormalizer m{false, 2.0, 4.0};
  EXPECT_DOUBLE_EQ(m.Apply(10.0), 2.0);
}

TEST(NormalizeTest, TrainingMeansMapToZero) {
  const std::vector<double> rows = {0.1, 5.0, 0.3, 7.0, 0.8, 2.0, 0.2, 9.0};
  const auto norms = FitNormalizers(rows, 2, AffinitySchema(2));
  const double m0 = (0.1 + 0.3 + 0.8 + 0.2) / 4.0;
  const double m1 = (5.0 + 7.0 + 2.0 + 9.0) / 4.0;
  EXPECT_NEAR(norms[0].Apply(m0), 0.0, 1e-12);
  EXPECT_NEAR(norms[1].Apply(m1), 0.0, 1e-12);
}

TEST(NormalizeTest, CountFeaturesUseLogSpace) {
  const std::vector<double> rows = {0.0, 1.0, 3.0, 7.0};
  const auto norms = FitNormalizers(rows, 1, CountSchema(1));
  EXPECT_TRUE(norms[0].log1p);
  const double mean = (std::log(1.0) + std::log(2.0) + std::log(4.0) + std::log(8.0)) / 4.0;
  EXPECT_NEAR(norms[0].mean, mean, 1e-12);
}

TEST(ForwardTest, ZeroParametersGiveLn2) {
  std::vector<FeatureNormalizer> norms(2);
  const std::vector<std::size_t> hidden = {4, 3};
  RegressorModel model =
      RegressorModel::Initialize(norms, hidden, Activation::kSoftplus, 1, 1.0);
  model.SetParameters(std::vector<double>(model.ParameterCount(), 0.0));
  const std::vector<double> b = {3.0, -1.0};
  EXPECT_NEAR(model.Forward(b), std::numbers::ln2, 1e-15);
}

TEST(ForwardTest, DeterministicAndPositive) {
  const RegressorModel model = RandomModel(4);
  const std::vector<double> b = {0.2, -5.0, 40.0};
  const double first = model.Forward(b);
  EXPECT_GT(first, 0.0);
  EXPECT_EQ(model.Forward(b), first);
}

TEST(ModelTest, RejectsZeroParameterModel) {
  EXPECT_THROW(RegressorModel(std::vector<FeatureNormalizer>(2), {}), ValidationError);
}

TEST(MseLossTest, HandExamples) {
  // Predicts exactly 1 everywhere.
  const RegressorModel one = ConstantModel(1, 0.0, 1.0 / std::numbers::ln2);
  EXPECT_NEAR(MseLoss(one, Batch(1, {0.0, 1.0}, {2.0, 0.0})), 1.0, 1e-12);
  EXPECT_NEAR(MseLoss(one, Batch(1, {0.0, 1.0}, {1.0, 1.0})), 0.0, 1e-12);
  const RegressorModel three = ConstantModel(1, 0.0, 3.0 / std::numbers::ln2);
  EXPECT_NEAR(MseLoss(three, Batch(1, {0.0}, {1.0})), 4.0, 1e-12);
  EXPECT_THROW(MseLoss(one, Batch(1, {}, {})), ValidationError);
}

TEST(BackwardTest, ZeroResidualGivesZeroGradient) {
  const RegressorModel model = RandomModel(9);
  RegressionBatch batch = RandomBatch(16, 10);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch.targets[i] = model.Forward(batch.row(i));
  }
  for (double g : Backward(model, batch).Flatten()) EXPECT_EQ(g, 0.0);
}

TEST(BackwardTest, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RegressorModel model = RandomModel(seed);
    const RegressionBatch batch = RandomBatch(32, seed + 100);
    GradientCheckOptions options;
    options.sampled_parameters = 8;
    options.seed = seed;
    const GradientCheckReport report = GradientCheck(model, batch, options);
    EXPECT_EQ(report.entries.size(), 8u);
    EXPECT_TRUE(report.passed) << "max relative error " << report.max_relative_error;
    EXPECT_LT(report.max_relative_error, 1e-4);
  }
}

TEST(BackwardTest, DoublingResidualsDoublesOutputBiasGradient) {
  const RegressorModel model = RandomModel(21);
  RegressionBatch batch = RandomBatch(20, 22);
  RegressionBatch doubled = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double f = model.Forward(batch.row(i));
    doubled.targets[i] = 2.0 * batch.targets[i] - f;
  }
  const double g1 = Backward(model, batch).layers.back().bias[0];
  const double g2 = Backward(model, doubled).layers.back().bias[0];
  EXPECT_NEAR(g2, 2.0 * g1, 1e-12 * std::max(1.0, std::abs(g1)));
}

TEST(GradientCheckTest, ZeroToleranceFails) {
  const RegressorModel model = RandomModel(31);
  GradientCheckOptions options;
  options.tolerance = 0.0;
  EXPECT_FALSE(GradientCheck(model, RandomBatch(8, 32), options).passed);
}

TrainConfig Quick(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  return c;
}

TEST(TrainTest, RecoversAffineGenerator) {
  Rng rng(41);
  RegressionBatch data;
  data.arity = 1;
  for (int i = 0; i < 50'000; ++i) {
    const double b = rng.Uniform();
    data.features.push_back(b);
    data.targets.push_back(1.0 + 0.5 * b);
  }
  const RegressorModel model = Train(data, AffinitySchema(1), Quick(42));
  double worst = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double b = (k + 0.5) / 101.0;
    const double truth = 1.0 + 0.5 * b;
    const std::vector<double> x = {b};
    worst = std::max(worst, std::abs(model.Forward(x) - truth) / truth);
  }
  EXPECT_LT(worst, 0.02);
}

TEST(TrainTest, ConstantTargets) {
  Rng rng(51);
  RegressionBatch data;
  data.arity = 2;
  for (int i = 0; i < 5'000; ++i) {
    data.features.push_back(rng.Uniform(0.0, 20.0));
    data.features.push_back(rng.Uniform());
    data.targets.push_back(3.5);
  }
  const RegressorModel model = Train(data, AffinitySchema(2), Quick(52));
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> x = {rng.Uniform(0.0, 20.0), rng.Uniform()};
    EXPECT_NEAR(model.Forward(x), 3.5, 0.035);
  }
}

TEST(TrainTest, SigmoidProductGenerator) {
  auto truth = [](double b1, double b2) {
    return (1.0 + 1.5 * Sigmoid(b1)) * (1.0 - 0.3 * b2);
  };
  Rng rng(61);
  RegressionBatch data;
  data.arity = 2;
  for (int i = 0; i < 100'000; ++i) {
    const double b1 = rng.Uniform(-4.0, 4.0), b2 = rng.Uniform();
    data.features.insert(data.features.end(), {b1, b2});
    data.targets.push_back(truth(b1, b2));
  }
  const RegressorModel model = Train(data, AffinitySchema(2), Quick(62));
  RegressionBatch held;
  held.arity = 2;
  for (int i = 0; i < 10'000; ++i) {
    const double b1 = rng.Uniform(-4.0, 4.0), b2 = rng.Uniform();
    held.features.insert(held.features.end(), {b1, b2});
    held.targets.push_back(truth(b1, b2));
  }
  EXPECT_LT(MseLoss(model, held), 1e-3);
}

TEST(TrainTest, SameSeedSameParameters) {
  const RegressionBatch data = RandomBatch(3'000, 71);
  TrainConfig c = Quick(72);
  c.max_epochs = 5;
  const RegressorModel a = Train(data, AffinitySchema(3), c);
  const RegressorModel b = Train(data, AffinitySchema(3), c);
  EXPECT_EQ(a.Parameters(), b.Parameters());
  c.seed = 73;
  EXPECT_NE(Train(data, AffinitySchema(3), c).Parameters(), a.Parameters());
}

TEST(TrainTest, JsonRoundTripPreservesPredictions) {
  const FeatureSchema schema = AffinitySchema(3);
  TrainConfig c = Quick(81);
  c.max_epochs = 3;
  const RegressorModel model = Train(RandomBatch(2'000, 80), schema, c);
  const RegressorModel back = RegressorModel::FromJson(model.ToJson(schema), &schema);
  const std::vector<double> b = {0.3, -0.2, 1.1};
  EXPECT_DOUBLE_EQ(back.Forward(b), model.Forward(b));
  EXPECT_EQ(back.Parameters(), model.Parameters());
}

}  // namespace
}  // namespace lafb
