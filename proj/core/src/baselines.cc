#include "lafb/baselines.h"

#include <algorithm>
#include <cmath>

namespace lafb {

double LogPopPenalize(double score, double popularity, double lambda_pop) {
  if (!(lambda_pop >= 0.0)) {
    throw ValidationError("log-pop strength must be non-negative");
  }
  if (!(popularity >= 0.0)) {
    throw ValidationError("popularity must be non-negative");
  }
  if (lambda_pop == 0.0 || popularity == 0.0) return score;
  return score / std::pow(1.0 + popularity, lambda_pop);
}

void StratumQuotas::Validate() const {
  double total = 0.0;
  for (double s : share) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw ValidationError("stratum quotas must lie in [0, 1]");
    }
    total += s;
  }
  if (total < 1.0) throw ValidationError("stratum quotas must sum to at least 1");
}

std::vector<std::size_t> QuotaRerank(std::span<const std::size_t> order,
                                     std::span<const Stratum> strata,
                                     const StratumQuotas& quotas,
                                     std::size_t budget) {
  quotas.Validate();
  std::vector<std::size_t> out;
  out.reserve(order.size());
  std::vector<bool> admitted(order.size(), false);
  std::array<std::size_t, 3> taken = {0, 0, 0};
  const double positions = static_cast<double>(budget);
  for (std::size_t k = 0; k < order.size() && out.size() < budget; ++k) {
    const Stratum s = strata[order[k]];
    auto& count = taken[static_cast<std::size_t>(s)];
    if (static_cast<double>(count) < quotas[s] * positions) {
      ++count;
      admitted[k] = true;
      out.push_back(order[k]);
    }
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!admitted[k]) out.push_back(order[k]);
  }
  return out;
}

std::vector<Stratum> FamiliarityStrata(std::span<const double> feature_values,
                                       const BucketEdges& edges,
                                       std::size_t feature) {
  std::vector<Stratum> out;
  out.reserve(feature_values.size());
  for (double v : feature_values) {
    out.push_back(static_cast<Stratum>(edges.Level(feature, v)));
  }
  return out;
}

std::array<double, 2> PopularityTerciles(std::span<const std::uint64_t> counts) {
  if (counts.empty()) return {0.0, 0.0};
  std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return {static_cast<double>(sorted[n / 3]),
          static_cast<double>(sorted[2 * n / 3])};
}

std::vector<Stratum> PopularityStrata(std::span<const double> popularity,
                                      const std::array<double, 2>& terciles) {
  std::vector<Stratum> out;
  out.reserve(popularity.size());
  for (double p : popularity) {
    if (p > terciles[1]) {
      out.push_back(Stratum::kHigh);
    } else if (p > terciles[0]) {
      out.push_back(Stratum::kMedium);
    } else {
      out.push_back(Stratum::kLow);
    }
  }
  return out;
}

double StaticBoost(double score, std::span<const double> familiarity,
                   const BoostRule& rule) {
  if (rule.feature >= familiarity.size()) {
    throw ValidationError("boost rule feature out of range");
  }
  return familiarity[rule.feature] < rule.threshold ? score * rule.multiplier
                                                    : score;
}

}  // namespace lafb
