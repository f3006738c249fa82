#pragma once

// Domain model shared by every LAFB module: interactions, familiarity
// features, the feature schema, log validation and global popularity.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lafb {

// Thrown when an input violates a documented contract. The CLI maps it to
// exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class FeatureKind { kCount, kRecency, kAffinity };
enum class Monotonicity { kIncreasing, kDecreasing };

std::string_view ToString(FeatureKind kind);
std::string_view ToString(Monotonicity monotonicity);
FeatureKind ParseFeatureKind(std::string_view text);
Monotonicity ParseMonotonicity(std::string_view text);

// Names, kinds and monotonicity hints of the n familiarity features. The order
// here is the order of every FamiliarityVector in a run.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<std::string> names, std::vector<FeatureKind> kinds,
                std::vector<Monotonicity> monotonicity);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<FeatureKind>& kinds() const { return kinds_; }
  const std::vector<Monotonicity>& monotonicity() const {
    return monotonicity_;
  }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  FeatureKind kind(std::size_t i) const { return kinds_.at(i); }

  // Index of `name`, or throws ValidationError.
  std::size_t IndexOf(std::string_view name) const;

  // Stable 64-bit FNV-1a digest of names and kinds, as 16 hex digits.
  std::string Hash() const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<FeatureKind> kinds_;
  std::vector<Monotonicity> monotonicity_;
};

// b_{u,v}: familiarity feature values in schema order.
struct FamiliarityVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const { return values; }

  bool operator==(const FamiliarityVector&) const = default;
};

// One logged user-item event.
struct Interaction {
  std::string user_id;
  std::string item_id;
  std::string creator_id;
  std::int64_t timestamp = 0;  // seconds since epoch
  double watch_time = 0.0;     // seconds
  double urps = 0.0;           // s_{u,v}
  FamiliarityVector familiarity;

  bool operator==(const Interaction&) const = default;
};

using InteractionLog = std::vector<Interaction>;

struct RecordError {
  std::size_t index = 0;
  std::string message;
};

struct LogValidation {
  InteractionLog records;          // empty when errors is non-empty
  std::vector<RecordError> errors;  // in record order

  bool ok() const { return errors.empty(); }
};

// Checks every record against the Interaction and schema invariants. Either
// every record is returned, or none and the full error list.
LogValidation ValidateLog(InteractionLog interactions,
                          const FeatureSchema& schema);

// Cumulative exposure counts keyed by item and by creator.
struct PopularityTable {
  std::unordered_map<std::string, std::uint64_t> item_counts;
  std::unordered_map<std::string, std::uint64_t> creator_counts;

  std::uint64_t ItemCount(const std::string& item_id) const;
  std::uint64_t CreatorCount(const std::string& creator_id) const;
  // Adds one exposure of `item_id` owned by `creator_id`.
  void Record(const std::string& item_id, const std::string& creator_id);
};

PopularityTable ComputePopularity(const InteractionLog& interactions);

// Estimator of the debiasing factor E[s | b]. Implemented by the empirical
// bucket table and by the learned regressor.
class FactorModel {
 public:
  virtual ~FactorModel() = default;
  // Always positive and finite for finite input of the right arity.
  virtual double Factor(std::span<const double> familiarity) const = 0;
  // Mean raw score of the data the factors were fitted on.
  virtual double ReferenceMean() const = 0;
};

// Population Pearson correlation of two equally sized samples. Returns NaN
// when either side has zero variance or fewer than two points.
double PearsonCorrelation(std::span<const double> x, std::span<const double> y);

}  // namespace lafb
