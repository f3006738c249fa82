#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lafb/core.h"

namespace lafb::testing {

inline Interaction Record(std::string user, std::string item, double urps,
                          std::vector<double> features,
                          std::int64_t timestamp = 1'700'000'000,
                          double watch_time = 1.0,
                          std::string creator = "c0") {
  Interaction r;
  r.user_id = std::move(user);
  r.item_id = std::move(item);
  r.creator_id = std::move(creator);
  r.timestamp = timestamp;
  r.watch_time = watch_time;
  r.urps = urps;
  r.familiarity.values = std::move(features);
  return r;
}

inline FeatureSchema CountSchema(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("f" + std::to_string(i));
  return FeatureSchema(names, std::vector<FeatureKind>(n, FeatureKind::kCount),
                       std::vector<Monotonicity>(n, Monotonicity::kIncreasing));
}

inline FeatureSchema AffinitySchema(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("a" + std::to_string(i));
  return FeatureSchema(names,
                       std::vector<FeatureKind>(n, FeatureKind::kAffinity),
                       std::vector<Monotonicity>(n, Monotonicity::kIncreasing));
}

}  // namespace lafb::testing
