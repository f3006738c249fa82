#include "lafb/debias.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lafb {

using nlohmann::json;

std::string_view ToString(DebiasMode mode) {
  return mode == DebiasMode::kDiscrete ? "discrete" : "continuous";
}

DebiasMode ParseDebiasMode(std::string_view text) {
  if (text == "discrete") return DebiasMode::kDiscrete;
  if (text == "continuous") return DebiasMode::kContinuous;
  throw ValidationError("unknown debias mode '" + std::string(text) + "'");
}

void DebiasConfig::Validate() const {
  if (!(floor_fraction > 0.0)) {
    throw ValidationError("debias floor must be positive");
  }
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw ValidationError("debias strength must lie in [0, 1]");
  }
}

json DebiasConfig::ToJson() const {
  return json{{"mode", ToString(mode)},
              {"floor_fraction", floor_fraction},
              {"strength", strength}};
}

DebiasConfig DebiasConfig::FromJson(const json& j) {
  DebiasConfig c;
  if (j.contains("mode")) c.mode = ParseDebiasMode(j.at("mode").get<std::string>());
  c.floor_fraction = j.value("floor_fraction", c.floor_fraction);
  c.strength = j.value("strength", c.strength);
  c.Validate();
  return c;
}

double DebiasScore(double score, double adjustment, double floor,
                   double strength) {
  if (!(score > 0.0) || !(adjustment > 0.0)) {
    throw ValidationError("debias_score needs positive score and factor");
  }
  const double divisor = std::max(adjustment, floor);
  if (strength == 1.0) return score / divisor;
  if (strength == 0.0) return score;
  return score / std::pow(divisor, strength);
}

double DebiasScore(double score, double adjustment, const DebiasConfig& config,
                   double reference_mean) {
  return DebiasScore(score, adjustment, config.Floor(reference_mean),
                     config.strength);
}

json CombinerWeights::ToJson() const {
  return json{{"score_weight", score_weight}, {"quality", quality}};
}

CombinerWeights CombinerWeights::FromJson(const json& j) {
  CombinerWeights w;
  w.score_weight = j.value("score_weight", 1.0);
  if (j.contains("quality")) {
    w.quality = j.at("quality").get<std::map<std::string, double>>();
  }
  return w;
}

double RankScore(const SlateCandidate& candidate,
                 const CombinerWeights& weights) {
  if (!candidate.debiased_score) {
    throw ValidationError("rank_score needs a debiased score");
  }
  for (const auto& [name, value] : candidate.quality) {
    if (!(value > 0.0)) {
      throw ValidationError("non-positive quality signal '" + name + "'");
    }
  }
  if (weights.score_weight == 1.0 && weights.quality.empty()) {
    return *candidate.debiased_score;
  }
  double log_score = weights.score_weight * std::log(*candidate.debiased_score);
  for (const auto& [name, w] : weights.quality) {
    if (w == 0.0) continue;
    auto it = candidate.quality.find(name);
    if (it == candidate.quality.end()) {
      throw ValidationError("candidate lacks weighted quality signal '" +
                            name + "'");
    }
    log_score += w * std::log(it->second);
  }
  return std::exp(log_score);
}

std::vector<SlateCandidate> DebiasSlate(std::vector<SlateCandidate> slate,
                                        const FactorModel& factors,
                                        const DebiasConfig& config,
                                        const CombinerWeights& weights) {
  config.Validate();
  const double floor = config.Floor(factors.ReferenceMean());
  for (auto& c : slate) {
    const double adj = factors.Factor(c.familiarity.span());
    c.debiased_score = DebiasScore(c.urps, adj, floor, config.strength);
    c.final_score = RankScore(c, weights);
  }
  std::sort(slate.begin(), slate.end(),
            [](const SlateCandidate& a, const SlateCandidate& b) {
              if (*a.final_score != *b.final_score) {
                return *a.final_score > *b.final_score;
              }
              return a.item_id < b.item_id;
            });
  return slate;
}

double FeatureCorrelation::AttenuationRatio() const {
  if (!defined || before == 0.0) return std::nan("");
  return std::abs(after) / std::abs(before);
}

CorrelationReport ResidualCorrelation(const InteractionLog& log,
                                      const FeatureSchema& schema,
                                      const FactorModel& factors,
                                      const DebiasConfig& config) {
  config.Validate();
  const std::size_t n = log.size();
  CorrelationReport report;
  report.samples = n;
  report.low_sample = n < 30;

  const double floor = config.Floor(factors.ReferenceMean());
  std::vector<double> raw(n), debiased(n), column(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = log[i].urps;
    debiased[i] = DebiasScore(raw[i], factors.Factor(log[i].familiarity.span()),
                              floor, config.strength);
  }
  for (std::size_t f = 0; f < schema.size(); ++f) {
    for (std::size_t i = 0; i < n; ++i) column[i] = log[i].familiarity[f];
    FeatureCorrelation entry;
    entry.feature = schema.name(f);
    entry.before = PearsonCorrelation(column, raw);
    entry.after = PearsonCorrelation(column, debiased);
    entry.defined = std::isfinite(entry.before) && std::isfinite(entry.after);
    report.features.push_back(entry);
  }
  return report;
}

json ToJson(const SlateCandidate& c, const FeatureSchema& schema) {
  json fam = json::object();
  for (std::size_t i = 0; i < c.familiarity.size() && i < schema.size(); ++i) {
    fam[schema.name(i)] = c.familiarity.values[i];
  }
  json j{{"item_id", c.item_id},
         {"creator_id", c.creator_id},
         {"urps", c.urps},
         {"familiarity", fam}};
  if (!c.quality.empty()) j["quality"] = c.quality;
  if (c.debiased_score) j["debiased_score"] = *c.debiased_score;
  if (c.final_score) j["final_score"] = *c.final_score;
  return j;
}

SlateCandidate SlateCandidateFromJson(const json& j,
                                      const FeatureSchema& schema) {
  try {
    SlateCandidate c;
    c.item_id = j.at("item_id").get<std::string>();
    c.creator_id = j.value("creator_id", std::string());
    c.urps = j.at("urps").get<double>();
    const json& fam = j.at("familiarity");
    for (const auto& name : schema.names()) {
      if (!fam.contains(name)) {
        throw ValidationError("candidate " + c.item_id + " lacks feature '" +
                              name + "'");
      }
      c.familiarity.values.push_back(fam.at(name).get<double>());
    }
    if (j.contains("quality")) {
      c.quality = j.at("quality").get<std::map<std::string, double>>();
    }
    if (!(c.urps > 0.0) || !std::isfinite(c.urps)) {
      throw ValidationError("candidate " + c.item_id + " has non-positive URPS");
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed slate candidate: ") +
                          e.what());
  }
}

}  // namespace lafb
