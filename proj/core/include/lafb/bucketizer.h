#pragma once

// Discrete familiarity modeling: equal-mass bucket edges per feature, the
// multi-feature bucket cell, and the empirical-mean adjustment table Adj_b
// with smoothing toward the global mean, clipping and a sparse-cell back-off.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lafb/core.h"

namespace lafb {

// Interior cut points per feature. A value equal to a cut point belongs to the
// upper bucket, so bucket(v) = number of cuts <= v.
class BucketEdges {
 public:
  BucketEdges() = default;
  BucketEdges(std::size_t requested_buckets,
              std::vector<std::vector<double>> cuts);

  std::size_t arity() const { return cuts_.size(); }
  std::size_t requested_buckets() const { return requested_buckets_; }
  const std::vector<double>& cuts(std::size_t feature) const {
    return cuts_.at(feature);
  }
  // Effective bucket count after tie collapse.
  std::size_t Buckets(std::size_t feature) const {
    return cuts_.at(feature).size() + 1;
  }
  // True when a feature collapsed to a single bucket.
  bool IsDegenerate(std::size_t feature) const { return Buckets(feature) == 1; }

  std::uint32_t Assign(std::size_t feature, double value) const;

  // Coarse familiarity level of a bucket: floor(3 * bucket / Buckets), so
  // the bottom, middle and top thirds of buckets map to 0, 1, 2.
  int Level(std::size_t feature, double value) const;

  nlohmann::json ToJson() const;
  static BucketEdges FromJson(const nlohmann::json& j);

  bool operator==(const BucketEdges&) const = default;

 private:
  std::size_t requested_buckets_ = 0;
  std::vector<std::vector<double>> cuts_;
};

// Cut i (1 <= i < K) is the order statistic at 0-based rank floor(i*N/K).
// Duplicate cuts and cuts at the feature minimum are dropped, so tied data
// yields fewer effective buckets. Throws ValidationError on an empty log or
// K < 2.
BucketEdges FitEdges(const InteractionLog& log, const FeatureSchema& schema,
                     std::size_t buckets);
BucketEdges FitEdges(std::span<const std::vector<double>> columns,
                     std::size_t buckets);

using CellIndex = std::vector<std::uint32_t>;

CellIndex AssignCell(std::span<const double> familiarity,
                     const BucketEdges& edges);

struct ClipBounds {
  double low = 0.5;   // multiplier of the global mean
  double high = 2.0;  // multiplier of the global mean
};

struct BucketizerConfig {
  std::size_t buckets = 5;
  double smoothing_prior_weight = 10.0;
  std::optional<ClipBounds> clip = ClipBounds{};
  std::uint64_t min_cell_count = 50;
};

struct CellStats {
  double factor = 0.0;
  std::uint64_t count = 0;
};

class AdjustmentTable final : public FactorModel {
 public:
  AdjustmentTable() = default;

  // Cell factor = (sum of s in cell + m * global_mean) / (count + m), then
  // clipped into [clip.low, clip.high] * global_mean. Per-feature marginal
  // tables use the same rule.
  static AdjustmentTable Fit(const InteractionLog& log, BucketEdges edges,
                             double smoothing_prior_weight,
                             std::optional<ClipBounds> clip,
                             std::uint64_t min_cell_count);
  static AdjustmentTable Fit(const InteractionLog& log, BucketEdges edges,
                             const BucketizerConfig& config) {
    return Fit(log, std::move(edges), config.smoothing_prior_weight,
               config.clip, config.min_cell_count);
  }

  // Cell factor when the cell holds at least `min_cell_count` records, else
  // the geometric mean of the populated per-feature marginal factors, else
  // the global mean.
  double Lookup(std::span<const double> familiarity,
                std::uint64_t min_cell_count) const;
  double Lookup(std::span<const double> familiarity) const {
    return Lookup(familiarity, min_cell_count_);
  }

  double Factor(std::span<const double> familiarity) const override {
    return Lookup(familiarity);
  }
  double ReferenceMean() const override { return global_mean_; }

  const CellStats* FindCell(const CellIndex& index) const;
  const CellStats& Marginal(std::size_t feature, std::uint32_t bucket) const {
    return marginals_.at(feature).at(bucket);
  }

  const BucketEdges& edges() const { return edges_; }
  double global_mean() const { return global_mean_; }
  double smoothing_prior_weight() const { return smoothing_prior_weight_; }
  const std::optional<ClipBounds>& clip() const { return clip_; }
  std::uint64_t min_cell_count() const { return min_cell_count_; }
  std::size_t cell_count() const { return cells_.size(); }

  // Visits populated cells in ascending multi-index order.
  template <typename Fn>
  void ForEachCell(Fn&& fn) const {
    for (std::uint64_t key : SortedKeys()) fn(Decode(key), cells_.at(key));
  }

  nlohmann::json ToJson(const FeatureSchema& schema) const;
  // Verifies the stored schema hash against `schema` when one is given.
  static AdjustmentTable FromJson(const nlohmann::json& j,
                                  const FeatureSchema* schema = nullptr);

 private:
  std::uint64_t Encode(const CellIndex& index) const;
  CellIndex Decode(std::uint64_t key) const;
  std::vector<std::uint64_t> SortedKeys() const;
  double Shrink(double sum, std::uint64_t count) const;

  BucketEdges edges_;
  double global_mean_ = 1.0;
  double smoothing_prior_weight_ = 0.0;
  std::optional<ClipBounds> clip_;
  std::uint64_t min_cell_count_ = 0;
  std::unordered_map<std::uint64_t, CellStats> cells_;
  std::vector<std::vector<CellStats>> marginals_;
};

}  // namespace lafb
