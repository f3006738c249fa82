#pragma once

// Popularity-oriented comparators: log-popularity penalization, user- and
// item-centric quota re-ranking, and a static boost for unfamiliar content.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lafb/bucketizer.h"

namespace lafb {

// s / (1 + popularity)^lambda_pop.
double LogPopPenalize(double score, double popularity, double lambda_pop);

enum class Stratum : std::uint8_t { kLow = 0, kMedium = 1, kHigh = 2 };

// Maximum share of the position budget each stratum may take during the
// greedy admission pass.
struct StratumQuotas {
  std::array<double, 3> share = {1.0, 1.0, 1.0};

  // Throws ValidationError unless every share is in [0, 1] and they sum to at
  // least 1.
  void Validate() const;
  double operator[](Stratum s) const {
    return share[static_cast<std::size_t>(s)];
  }
};

// `order` lists candidate indices by descending score; `strata[i]` is the
// stratum of candidate i. Scanning by score, a candidate is admitted while its
// stratum holds fewer than quota * budget admitted entries and fewer than
// `budget` candidates are admitted overall. The result is the admitted
// candidates followed by every other candidate in score order, so it is
// always a permutation of `order`.
std::vector<std::size_t> QuotaRerank(std::span<const std::size_t> order,
                                     std::span<const Stratum> strata,
                                     const StratumQuotas& quotas,
                                     std::size_t budget);

// Strata from the user's own familiarity level on one bucketed feature.
std::vector<Stratum> FamiliarityStrata(std::span<const double> feature_values,
                                       const BucketEdges& edges,
                                       std::size_t feature);

// Lower and upper tercile cut points of a catalog-wide popularity vector.
std::array<double, 2> PopularityTerciles(std::span<const std::uint64_t> counts);

// kHigh strictly above the upper cut, kMedium strictly above the lower cut,
// kLow otherwise (ties at a cut fall to the lower stratum).
std::vector<Stratum> PopularityStrata(std::span<const double> popularity,
                                      const std::array<double, 2>& terciles);

inline std::vector<std::size_t> UserCentricRerank(
    std::span<const std::size_t> order, std::span<const Stratum> strata,
    const StratumQuotas& quotas, std::size_t budget) {
  return QuotaRerank(order, strata, quotas, budget);
}

inline std::vector<std::size_t> ItemCentricRerank(
    std::span<const std::size_t> order, std::span<const Stratum> strata,
    const StratumQuotas& quotas, std::size_t budget) {
  return QuotaRerank(order, strata, quotas, budget);
}

// Fixed multiplier for candidates whose feature lies below a threshold.
struct BoostRule {
  std::size_t feature = 0;
  double threshold = 1.0;
  double multiplier = 1.3;
};

double StaticBoost(double score, std::span<const double> familiarity,
                   const BoostRule& rule);

}  // namespace lafb
