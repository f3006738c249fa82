#pragma once

// Score correction: divide the raw score by the estimated debiasing factor,
// recombine with other quality signals in the final ranking function, and
// measure how much familiarity/score correlation the correction removes.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lafb/core.h"

namespace lafb {

enum class DebiasMode { kDiscrete, kContinuous };

std::string_view ToString(DebiasMode mode);
DebiasMode ParseDebiasMode(std::string_view text);

struct DebiasConfig {
  DebiasMode mode = DebiasMode::kDiscrete;
  // Divisor floor as a fraction of the factor model's reference mean.
  double floor_fraction = 0.05;
  // Exponent applied to the floored factor; 0 disables debiasing.
  double strength = 1.0;

  void Validate() const;
  double Floor(double reference_mean) const {
    return floor_fraction * reference_mean;
  }
  nlohmann::json ToJson() const;
  static DebiasConfig FromJson(const nlohmann::json& j);
};

// s / max(adj, floor)^strength. Throws ValidationError unless s > 0 and
// adj > 0.
double DebiasScore(double score, double adjustment, double floor,
                   double strength);
double DebiasScore(double score, double adjustment, const DebiasConfig& config,
                   double reference_mean);

// Weights of the geometric final-score combiner
//   R = exp(w0 * ln s_debias + sum_j w_j * ln X_j).
struct CombinerWeights {
  double score_weight = 1.0;
  std::map<std::string, double> quality;

  nlohmann::json ToJson() const;
  static CombinerWeights FromJson(const nlohmann::json& j);
};

struct SlateCandidate {
  std::string item_id;
  std::string creator_id;
  double urps = 0.0;
  FamiliarityVector familiarity;
  std::map<std::string, double> quality;
  std::optional<double> debiased_score;
  std::optional<double> final_score;
};

// Requires debiased_score. Signals missing from `weights` have weight 0; a
// weighted signal missing from the candidate, or any non-positive signal, is a
// ValidationError.
double RankScore(const SlateCandidate& candidate,
                 const CombinerWeights& weights);

// Looks up each candidate's factor, fills debiased and final scores and
// returns candidates by descending final score, ties by item_id.
std::vector<SlateCandidate> DebiasSlate(std::vector<SlateCandidate> slate,
                                        const FactorModel& factors,
                                        const DebiasConfig& config,
                                        const CombinerWeights& weights = {});

struct FeatureCorrelation {
  std::string feature;
  double before = 0.0;  // Pearson(b_i, s); NaN when undefined
  double after = 0.0;   // Pearson(b_i, s_debias); NaN when undefined
  bool defined = false;

  // |after| / |before|; NaN when undefined.
  double AttenuationRatio() const;
};

struct CorrelationReport {
  std::vector<FeatureCorrelation> features;
  std::size_t samples = 0;
  bool low_sample = false;  // fewer than 30 records
};

CorrelationReport ResidualCorrelation(const InteractionLog& log,
                                      const FeatureSchema& schema,
                                      const FactorModel& factors,
                                      const DebiasConfig& config);

nlohmann::json ToJson(const SlateCandidate& candidate,
                      const FeatureSchema& schema);
SlateCandidate SlateCandidateFromJson(const nlohmann::json& j,
                                      const FeatureSchema& schema);

}  // namespace lafb
