#include "lafb/core.h"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <utility>

namespace lafb {

std::string_view ToString(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kCount:
      return "count";
    case FeatureKind::kRecency:
      return "recency";
    case FeatureKind::kAffinity:
      return "affinity";
  }
  return "unknown";
}

std::string_view ToString(Monotonicity monotonicity) {
  return monotonicity == Monotonicity::kIncreasing ? "increasing"
                                                   : "decreasing";
}

FeatureKind ParseFeatureKind(std::string_view text) {
  if (text == "count") return FeatureKind::kCount;
  if (text == "recency") return FeatureKind::kRecency;
  if (text == "affinity") return FeatureKind::kAffinity;
  throw ValidationError("unknown feature kind '" + std::string(text) + "'");
}

Monotonicity ParseMonotonicity(std::string_view text) {
  if (text == "increasing") return Monotonicity::kIncreasing;
  if (text == "decreasing") return Monotonicity::kDecreasing;
  throw ValidationError("unknown monotonicity '" + std::string(text) + "'");
}

FeatureSchema::FeatureSchema(std::vector<std::string> names,
                             std::vector<FeatureKind> kinds,
                             std::vector<Monotonicity> monotonicity)
    : names_(std::move(names)),
      kinds_(std::move(kinds)),
      monotonicity_(std::move(monotonicity)) {
  if (names_.empty()) {
    throw ValidationError("feature schema needs at least one feature");
  }
  if (kinds_.size() != names_.size() ||
      monotonicity_.size() != names_.size()) {
    throw ValidationError(
        "feature schema names, kinds and monotonicity differ in length");
  }
  std::set<std::string_view> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) {
      throw ValidationError("duplicate feature name '" + name + "'");
    }
  }
}

std::size_t FeatureSchema::IndexOf(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ValidationError("feature '" + std::string(name) +
                        "' is not in the schema");
}

std::string FeatureSchema::Hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t i = 0; i < names_.size(); ++i) {
    mix(names_[i]);
    mix(ToString(kinds_[i]));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

LogValidation ValidateLog(InteractionLog interactions,
                          const FeatureSchema& schema) {
  LogValidation result;
  const std::size_t n = schema.size();
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const Interaction& r = interactions[i];
    auto fail = [&](std::string message) {
      result.errors.push_back({i, std::move(message) + " at index " +
                                      std::to_string(i)});
    };
    if (r.familiarity.size() != n) {
      fail("arity mismatch: " + std::to_string(r.familiarity.size()) +
           " features, schema has " + std::to_string(n));
    }
    for (std::size_t f = 0; f < r.familiarity.size(); ++f) {
      if (!std::isfinite(r.familiarity.values[f])) {
        const std::string name = f < n ? schema.name(f) : std::to_string(f);
        fail("non-finite feature '" + name + "'");
      }
    }
    if (!std::isfinite(r.urps) || r.urps <= 0.0) fail("non-positive URPS");
    if (!std::isfinite(r.watch_time) || r.watch_time < 0.0) {
      fail("negative watch time");
    }
    if (r.timestamp <= 0) fail("non-positive timestamp");
  }
  if (result.errors.empty()) result.records = std::move(interactions);
  return result;
}

std::uint64_t PopularityTable::ItemCount(const std::string& item_id) const {
  auto it = item_counts.find(item_id);
  return it == item_counts.end() ? 0 : it->second;
}

std::uint64_t PopularityTable::CreatorCount(
    const std::string& creator_id) const {
  auto it = creator_counts.find(creator_id);
  return it == creator_counts.end() ? 0 : it->second;
}

void PopularityTable::Record(const std::string& item_id,
                             const std::string& creator_id) {
  ++item_counts[item_id];
  ++creator_counts[creator_id];
}

PopularityTable ComputePopularity(const InteractionLog& interactions) {
  PopularityTable table;
  for (const auto& r : interactions) table.Record(r.item_id, r.creator_id);
  return table;
}

double PearsonCorrelation(std::span<const double> x,
                          std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("correlation samples differ in length");
  }
  const std::size_t n = x.size();
  if (n < 2) return std::nan("");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace lafb
