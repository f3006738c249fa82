#include "lafb/estimator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lafb/io.h"
#include "lafb/rng.h"

namespace lafb {

using nlohmann::json;

std::string_view ToString(Activation activation) {
  return activation == Activation::kSoftplus ? "softplus" : "identity";
}

Activation ParseActivation(std::string_view text) {
  if (text == "softplus") return Activation::kSoftplus;
  if (text == "identity") return Activation::kIdentity;
  throw ValidationError("unknown activation '" + std::string(text) + "'");
}

double Softplus(double z) {
  const double v = z > 0.0 ? z + std::log1p(std::exp(-z))
                            : std::log1p(std::exp(z));
  // exp underflows below about -745.
  return std::max(v, std::numeric_limits<double>::denorm_min());
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double Activate(Activation a, double z) {
  return a == Activation::kSoftplus ? Softplus(z) : z;
}

double ActivationDerivative(Activation a, double z) {
  return a == Activation::kSoftplus ? Sigmoid(z) : 1.0;
}

}  // namespace

double FeatureNormalizer::Apply(double value) const {
  const double v = log1p ? std::log1p(std::max(value, 0.0)) : value;
  return (v - mean) / stddev;
}

std::vector<FeatureNormalizer> FitNormalizers(std::span<const double> rows,
                                              std::size_t arity,
                                              const FeatureSchema& schema) {
  if (arity != schema.size()) {
    throw ValidationError("feature rows do not match schema arity");
  }
  const std::size_t n = arity == 0 ? 0 : rows.size() / arity;
  std::vector<FeatureNormalizer> out(arity);
  for (std::size_t f = 0; f < arity; ++f) {
    FeatureNormalizer& norm = out[f];
    norm.log1p = schema.kind(f) == FeatureKind::kCount;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rows[i * arity + f];
      mean += norm.log1p ? std::log1p(std::max(v, 0.0)) : v;
    }
    mean = n > 0 ? mean / static_cast<double>(n) : 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rows[i * arity + f];
      const double d = (norm.log1p ? std::log1p(std::max(v, 0.0)) : v) - mean;
      var += d * d;
    }
    var = n > 0 ? var / static_cast<double>(n) : 0.0;
    norm.mean = mean;
    norm.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return out;
}

std::vector<double> Gradient::Flatten() const {
  std::vector<double> flat;
  for (const auto& layer : layers) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

RegressionBatch MakeBatch(const InteractionLog& log) {
  RegressionBatch batch;
  if (log.empty()) return batch;
  batch.arity = log.front().familiarity.size();
  batch.features.reserve(log.size() * batch.arity);
  batch.targets.reserve(log.size());
  for (const auto& r : log) {
    if (r.familiarity.size() != batch.arity) {
      throw ValidationError("familiarity arity differs across the log");
    }
    batch.features.insert(batch.features.end(), r.familiarity.values.begin(),
                          r.familiarity.values.end());
    batch.targets.push_back(r.urps);
  }
  return batch;
}

void TrainConfig::Validate() const {
  if (hidden.empty() ||
      std::any_of(hidden.begin(), hidden.end(),
                  [](std::size_t h) { return h == 0; })) {
    throw ValidationError("hidden layer sizes must be positive");
  }
  if (!(learning_rate > 0.0)) {
    throw ValidationError("learning rate must be positive");
  }
  if (batch_size == 0 || max_epochs == 0 || patience == 0) {
    throw ValidationError("batch size, epochs and patience must be positive");
  }
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw ValidationError("validation fraction must lie in (0, 0.5]");
  }
}

json TrainConfig::ToJson() const {
  return json{{"hidden", hidden},
              {"activation", ToString(activation)},
              {"learning_rate", learning_rate},
              {"batch_size", batch_size},
              {"max_epochs", max_epochs},
              {"patience", patience},
              {"validation_fraction", validation_fraction},
              {"seed", seed},
              {"max_samples", max_samples}};
}

TrainConfig TrainConfig::FromJson(const json& j) {
  TrainConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.activation = ParseActivation(j.value("activation", std::string("softplus")));
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  c.max_samples = j.value("max_samples", c.max_samples);
  c.Validate();
  return c;
}

RegressorModel::RegressorModel(std::vector<FeatureNormalizer> normalizers,
                               std::vector<DenseLayer> layers,
                               double output_scale, double reference_mean)
    : normalizers_(std::move(normalizers)),
      layers_(std::move(layers)),
      output_scale_(output_scale),
      reference_mean_(reference_mean) {
  if (layers_.empty()) throw ValidationError("regressor has no layers");
  std::size_t width = normalizers_.size();
  if (width == 0) throw ValidationError("regressor has no inputs");
  for (const auto& layer : layers_) {
    if (layer.inputs != width || layer.outputs == 0 ||
        layer.weights.size() != layer.inputs * layer.outputs ||
        layer.bias.size() != layer.outputs) {
      throw ValidationError("regressor layer dimensions do not chain");
    }
    width = layer.outputs;
  }
  if (width != 1) throw ValidationError("regressor must have a single output");
  if (layers_.back().activation != Activation::kSoftplus) {
    throw ValidationError("regressor output head must be softplus");
  }
  if (!(output_scale_ > 0.0)) {
    throw ValidationError("output scale must be positive");
  }
}

RegressorModel RegressorModel::Initialize(
    std::vector<FeatureNormalizer> normalizers,
    std::span<const std::size_t> hidden, Activation activation,
    std::uint64_t seed, double output_scale) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t width = normalizers.size();
  std::vector<std::size_t> sizes(hidden.begin(), hidden.end());
  sizes.push_back(1);
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    DenseLayer layer;
    layer.inputs = width;
    layer.outputs = sizes[l];
    layer.activation =
        l + 1 == sizes.size() ? Activation::kSoftplus : activation;
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    layer.weights.resize(layer.inputs * layer.outputs);
    for (double& w : layer.weights) w = rng.Uniform(-limit, limit);
    layer.bias.assign(layer.outputs, 0.0);
    width = layer.outputs;
    layers.push_back(std::move(layer));
  }
  // softplus(log(e - 1)) = 1
  layers.back().bias[0] = std::log(std::exp(1.0) - 1.0);
  return RegressorModel(std::move(normalizers), std::move(layers),
                        output_scale, output_scale);
}

std::vector<double> RegressorModel::Normalize(
    std::span<const double> familiarity) const {
  if (familiarity.size() != normalizers_.size()) {
    throw ValidationError("familiarity arity does not match the regressor");
  }
  std::vector<double> out(familiarity.size());
  for (std::size_t f = 0; f < out.size(); ++f) {
    out[f] = normalizers_[f].Apply(familiarity[f]);
  }
  return out;
}

RegressionBatch RegressorModel::Normalized(const RegressionBatch& batch) const {
  if (batch.normalized) return batch;
  if (batch.arity != normalizers_.size()) {
    throw ValidationError("batch arity does not match the regressor");
  }
  RegressionBatch out = batch;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t f = 0; f < batch.arity; ++f) {
      double& v = out.features[i * batch.arity + f];
      v = normalizers_[f].Apply(v);
    }
  }
  out.normalized = true;
  return out;
}

double RegressorModel::ForwardNormalized(std::span<const double> inputs) const {
  thread_local std::vector<double> current;
  thread_local std::vector<double> next;
  current.assign(inputs.begin(), inputs.end());
  double z = 0.0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    const bool last = l + 1 == layers_.size();
    next.resize(layer.outputs);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double* w = layer.weights.data() + o * layer.inputs;
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < layer.inputs; ++i) acc += w[i] * current[i];
      next[o] = last ? acc : Activate(layer.activation, acc);
    }
    if (last) z = next[0];
    std::swap(current, next);
  }
  return output_scale_ * Softplus(z);
}

double RegressorModel::Forward(std::span<const double> familiarity) const {
  if (familiarity.size() != normalizers_.size()) {
    throw ValidationError("familiarity arity does not match the regressor");
  }
  thread_local std::vector<double> x;
  x.resize(familiarity.size());
  for (std::size_t f = 0; f < x.size(); ++f) {
    x[f] = normalizers_[f].Apply(familiarity[f]);
  }
  return ForwardNormalized(x);
}

std::size_t RegressorModel::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

double& RegressorModel::Parameter(std::size_t index) {
  for (auto& layer : layers_) {
    if (index < layer.weights.size()) return layer.weights[index];
    index -= layer.weights.size();
    if (index < layer.bias.size()) return layer.bias[index];
    index -= layer.bias.size();
  }
  throw std::out_of_range("parameter index out of range");
}

std::vector<double> RegressorModel::Parameters() const {
  std::vector<double> flat;
  flat.reserve(ParameterCount());
  for (const auto& layer : layers_) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void RegressorModel::SetParameters(std::span<const double> values) {
  if (values.size() != ParameterCount()) {
    throw std::invalid_argument("parameter vector has the wrong length");
  }
  std::size_t k = 0;
  for (auto& layer : layers_) {
    for (double& w : layer.weights) w = values[k++];
    for (double& b : layer.bias) b = values[k++];
  }
}

namespace {

// Adds d(weight * (f(x) - target)^2)/d(theta) into `grad` (flat layout) and
// returns f(x).
double AccumulateGradient(const std::vector<DenseLayer>& layers,
                          double output_scale, std::span<const double> x,
                          double target, double weight,
                          std::vector<double>& grad) {
  thread_local std::vector<std::vector<double>> pre;
  thread_local std::vector<std::vector<double>> post;
  thread_local std::vector<double> delta;
  thread_local std::vector<double> upstream;
  const std::size_t depth = layers.size();
  pre.resize(depth);
  post.resize(depth + 1);
  post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < depth; ++l) {
    const DenseLayer& layer = layers[l];
    pre[l].resize(layer.outputs);
    post[l + 1].resize(layer.outputs);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double* w = layer.weights.data() + o * layer.inputs;
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < layer.inputs; ++i) acc += w[i] * post[l][i];
      pre[l][o] = acc;
      post[l + 1][o] = Activate(layer.activation, acc);
    }
  }
  const double y = output_scale * post[depth][0];
  const double dy = 2.0 * weight * (y - target);

  std::vector<std::size_t> offsets(depth);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    offsets[l] = offset;
    offset += layers[l].weights.size() + layers[l].bias.size();
  }

  delta.assign(1, dy * output_scale * Sigmoid(pre[depth - 1][0]));
  for (std::size_t l = depth; l-- > 0;) {
    const DenseLayer& layer = layers[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + layer.weights.size();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* row = gw + o * layer.inputs;
      for (std::size_t i = 0; i < layer.inputs; ++i) row[i] += d * post[l][i];
      gb[o] += d;
    }
    if (l == 0) break;
    upstream.assign(layer.inputs, 0.0);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* w = layer.weights.data() + o * layer.inputs;
      for (std::size_t i = 0; i < layer.inputs; ++i) upstream[i] += w[i] * d;
    }
    const DenseLayer& below = layers[l - 1];
    for (std::size_t i = 0; i < layer.inputs; ++i) {
      upstream[i] *= ActivationDerivative(below.activation, pre[l - 1][i]);
    }
    std::swap(delta, upstream);
  }
  return y;
}

Gradient Unflatten(const std::vector<DenseLayer>& layers,
                   const std::vector<double>& flat) {
  Gradient g;
  std::size_t k = 0;
  for (const auto& layer : layers) {
    LayerGradient lg;
    lg.weights.assign(flat.begin() + static_cast<std::ptrdiff_t>(k),
                      flat.begin() + static_cast<std::ptrdiff_t>(
                                         k + layer.weights.size()));
    k += layer.weights.size();
    lg.bias.assign(flat.begin() + static_cast<std::ptrdiff_t>(k),
                   flat.begin() +
                       static_cast<std::ptrdiff_t>(k + layer.bias.size()));
    k += layer.bias.size();
    g.layers.push_back(std::move(lg));
  }
  return g;
}

double MeanSquaredError(const RegressorModel& model,
                        const RegressionBatch& normalized,
                        std::span<const std::size_t> rows) {
  double sum = 0.0;
  for (std::size_t i : rows) {
    const double r =
        model.ForwardNormalized(normalized.row(i)) - normalized.targets[i];
    sum += r * r;
  }
  return sum / static_cast<double>(rows.size());
}

}  // namespace

double MseLoss(const RegressorModel& model, const RegressionBatch& batch) {
  if (batch.size() == 0) throw ValidationError("MSE of an empty batch");
  const RegressionBatch normalized = model.Normalized(batch);
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), 0);
  return MeanSquaredError(model, normalized, rows);
}

Gradient Backward(const RegressorModel& model, const RegressionBatch& batch) {
  std::vector<double> grad(model.ParameterCount(), 0.0);
  if (batch.size() == 0) return Unflatten(model.layers(), grad);
  const RegressionBatch normalized = model.Normalized(batch);
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    AccumulateGradient(model.layers(), model.output_scale(),
                       normalized.row(i), normalized.targets[i], weight, grad);
  }
  return Unflatten(model.layers(), grad);
}

RegressorModel Train(const InteractionLog& log, const FeatureSchema& schema,
                     const TrainConfig& config) {
  if (log.empty()) throw ValidationError("cannot train on an empty log");
  return Train(MakeBatch(log), schema, config);
}

RegressorModel Train(const RegressionBatch& data, const FeatureSchema& schema,
                     const TrainConfig& config) {
  config.Validate();
  if (data.size() == 0) throw ValidationError("cannot train on an empty log");
  if (data.normalized) {
    throw ValidationError("training expects raw familiarity features");
  }
  if (data.size() < 2) {
    throw ValidationError("training needs at least two samples");
  }

  RegressionBatch samples;
  if (config.max_samples > 0 && data.size() > config.max_samples) {
    // Seeded uniform subset kept in log order. A fixed stride would alias
    // with periodic log layouts such as fixed-size slates.
    samples.arity = data.arity;
    std::vector<std::size_t> index(data.size());
    std::iota(index.begin(), index.end(), 0);
    Rng pick(DeriveSeed(config.seed, 3));
    for (std::size_t k = 0; k < config.max_samples; ++k) {
      std::swap(index[k], index[k + pick.Index(index.size() - k)]);
    }
    index.resize(config.max_samples);
    std::sort(index.begin(), index.end());
    for (std::size_t i : index) {
      const auto row = data.row(i);
      samples.features.insert(samples.features.end(), row.begin(), row.end());
      samples.targets.push_back(data.targets[i]);
    }
  } else {
    samples = data;
  }
  const std::size_t n = samples.size();

  double target_mean = 0.0;
  for (double t : samples.targets) target_mean += t;
  target_mean /= static_cast<double>(n);
  if (!(target_mean > 0.0)) {
    throw ValidationError("training targets must have a positive mean");
  }

  auto normalizers = FitNormalizers(samples.features, samples.arity, schema);
  RegressorModel model = RegressorModel::Initialize(
      normalizers, config.hidden, config.activation,
      DeriveSeed(config.seed, 1), target_mean);
  model.set_reference_mean(target_mean);
  model.set_train_config(config);
  const RegressionBatch normalized = model.Normalized(samples);

  Rng rng(DeriveSeed(config.seed, 2));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order.begin(), order.end());
  const std::size_t n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(config.validation_fraction *
                                         static_cast<double>(n))),
      1, n - 1);
  std::vector<std::size_t> validation(order.begin(),
                                      order.begin() +
                                          static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(
      order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  const std::size_t p = model.ParameterCount();
  std::vector<double> theta = model.Parameters();
  std::vector<double> m(p, 0.0), v(p, 0.0), grad(p, 0.0);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEpsilon = 1e-8;
  std::uint64_t step = 0;

  TrainingMetadata meta;
  meta.seed = config.seed;
  meta.samples = n;
  meta.small_sample = n < 10 * config.batch_size;
  std::vector<double> best_theta = theta;
  double best_val = MeanSquaredError(model, normalized, validation);
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.Shuffle(train.begin(), train.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train.size();
         start += config.batch_size) {
      const std::size_t end = std::min(train.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = train[k];
        const double y =
            AccumulateGradient(model.layers(), model.output_scale(),
                               normalized.row(i), normalized.targets[i],
                               weight, grad);
        const double r = y - normalized.targets[i];
        epoch_loss += r * r;
      }
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t k = 0; k < p; ++k) {
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * grad[k];
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
        theta[k] -= config.learning_rate * (m[k] / c1) /
                    (std::sqrt(v[k] / c2) + kEpsilon);
      }
      model.SetParameters(theta);
    }
    const double val = MeanSquaredError(model, normalized, validation);
    meta.validation_history.push_back(val);
    meta.epochs_run = epoch;
    meta.train_loss = epoch_loss / static_cast<double>(train.size());
    if (val < best_val) {
      best_val = val;
      best_theta = theta;
      meta.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }

  model.SetParameters(best_theta);
  meta.validation_loss = best_val;
  meta.train_loss = MeanSquaredError(model, normalized, train);
  model.set_metadata(std::move(meta));
  return model;
}

GradientCheckReport GradientCheck(const RegressorModel& model,
                                  const RegressionBatch& batch,
                                  const GradientCheckOptions& options) {
  const RegressionBatch normalized = model.Normalized(batch);
  const std::vector<double> analytic = Backward(model, normalized).Flatten();
  const std::size_t p = model.ParameterCount();

  std::vector<std::size_t> indices;
  if (options.sampled_parameters == 0 || options.sampled_parameters >= p) {
    indices.resize(p);
    std::iota(indices.begin(), indices.end(), 0);
  } else {
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), 0);
    Rng rng(options.seed);
    rng.Shuffle(all.begin(), all.end());
    indices.assign(all.begin(),
                   all.begin() +
                       static_cast<std::ptrdiff_t>(options.sampled_parameters));
    std::sort(indices.begin(), indices.end());
  }

  GradientCheckReport report;
  RegressorModel probe = model;
  for (std::size_t k : indices) {
    const double original = probe.Parameter(k);
    probe.Parameter(k) = original + options.step;
    const double up = MseLoss(probe, normalized);
    probe.Parameter(k) = original - options.step;
    const double down = MseLoss(probe, normalized);
    probe.Parameter(k) = original;
    GradientCheckEntry e;
    e.parameter = k;
    e.analytic = analytic[k];
    e.numeric = (up - down) / (2.0 * options.step);
    const double scale =
        std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-6});
    e.relative_error = std::abs(e.analytic - e.numeric) / scale;
    report.max_relative_error =
        std::max(report.max_relative_error, e.relative_error);
    report.entries.push_back(e);
  }
  report.passed = !report.entries.empty() &&
                  report.max_relative_error < options.tolerance;
  return report;
}

json RegressorModel::ToJson(const FeatureSchema& schema) const {
  json norms = json::array();
  for (const auto& n : normalizers_) {
    norms.push_back(json{{"log1p", n.log1p}, {"mean", n.mean}, {"std", n.stddev}});
  }
  json layers = json::array();
  for (const auto& l : layers_) {
    layers.push_back(json{{"inputs", l.inputs},
                          {"outputs", l.outputs},
                          {"activation", ToString(l.activation)},
                          {"weights", l.weights},
                          {"bias", l.bias}});
  }
  json training{{"seed", metadata_.seed},
                {"samples", metadata_.samples},
                {"epochs_run", metadata_.epochs_run},
                {"best_epoch", metadata_.best_epoch},
                {"train_loss", metadata_.train_loss},
                {"validation_loss", metadata_.validation_loss},
                {"validation_history", metadata_.validation_history},
                {"small_sample", metadata_.small_sample}};
  return json{{"kind", "regressor"},
              {"schema_hash", schema.Hash()},
              {"schema", lafb::ToJson(schema)},
              {"normalizers", norms},
              {"layers", layers},
              {"output_scale", output_scale_},
              {"reference_mean", reference_mean_},
              {"config", train_config_.ToJson()},
              {"training", training}};
}

RegressorModel RegressorModel::FromJson(const json& j,
                                        const FeatureSchema* schema) {
  try {
    if (schema != nullptr &&
        j.at("schema_hash").get<std::string>() != schema->Hash()) {
      throw ValidationError("regressor was trained on another schema");
    }
    std::vector<FeatureNormalizer> norms;
    for (const auto& n : j.at("normalizers")) {
      norms.push_back({n.at("log1p").get<bool>(), n.at("mean").get<double>(),
                       n.at("std").get<double>()});
    }
    std::vector<DenseLayer> layers;
    for (const auto& l : j.at("layers")) {
      DenseLayer layer;
      layer.inputs = l.at("inputs").get<std::size_t>();
      layer.outputs = l.at("outputs").get<std::size_t>();
      layer.activation = ParseActivation(l.at("activation").get<std::string>());
      layer.weights = l.at("weights").get<std::vector<double>>();
      layer.bias = l.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(layer));
    }
    RegressorModel model(std::move(norms), std::move(layers),
                         j.at("output_scale").get<double>(),
                         j.at("reference_mean").get<double>());
    if (j.contains("config")) {
      model.train_config_ = TrainConfig::FromJson(j.at("config"));
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      model.metadata_.seed = t.value("seed", std::uint64_t{0});
      model.metadata_.samples = t.value("samples", std::size_t{0});
      model.metadata_.epochs_run = t.value("epochs_run", std::size_t{0});
      model.metadata_.best_epoch = t.value("best_epoch", std::size_t{0});
      model.metadata_.train_loss = t.value("train_loss", 0.0);
      model.metadata_.validation_loss = t.value("validation_loss", 0.0);
      model.metadata_.validation_history =
          t.value("validation_history", std::vector<double>{});
      model.metadata_.small_sample = t.value("small_sample", false);
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed regressor: ") + e.what());
  }
}

}  // namespace lafb
