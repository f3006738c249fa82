#include "lafb/bucketizer.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "lafb/io.h"

namespace lafb {

using nlohmann::json;

BucketEdges::BucketEdges(std::size_t requested_buckets,
                         std::vector<std::vector<double>> cuts)
    : requested_buckets_(requested_buckets), cuts_(std::move(cuts)) {
  for (const auto& c : cuts_) {
    for (std::size_t i = 1; i < c.size(); ++i) {
      if (!(c[i - 1] < c[i])) {
        throw ValidationError("bucket cut points must be strictly increasing");
      }
    }
  }
}

std::uint32_t BucketEdges::Assign(std::size_t feature, double value) const {
  const auto& c = cuts_.at(feature);
  return static_cast<std::uint32_t>(
      std::upper_bound(c.begin(), c.end(), value) - c.begin());
}

int BucketEdges::Level(std::size_t feature, double value) const {
  const auto k = Buckets(feature);
  return static_cast<int>(3 * Assign(feature, value) / k);
}

json BucketEdges::ToJson() const {
  return json{{"requested_buckets", requested_buckets_}, {"cuts", cuts_}};
}

BucketEdges BucketEdges::FromJson(const json& j) {
  return BucketEdges(j.at("requested_buckets").get<std::size_t>(),
                     j.at("cuts").get<std::vector<std::vector<double>>>());
}

BucketEdges FitEdges(std::span<const std::vector<double>> columns,
                     std::size_t buckets) {
  if (buckets < 2) throw ValidationError("need at least 2 buckets per feature");
  if (columns.empty() || columns.front().empty()) {
    throw ValidationError("cannot fit bucket edges on an empty log");
  }
  std::vector<std::vector<double>> cuts;
  cuts.reserve(columns.size());
  for (const auto& column : columns) {
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::vector<double> c;
    for (std::size_t i = 1; i < buckets; ++i) {
      const double cut = sorted[i * n / buckets];
      if (cut <= sorted.front()) continue;  // would leave bucket 0 empty
      if (!c.empty() && cut <= c.back()) continue;
      c.push_back(cut);
    }
    cuts.push_back(std::move(c));
  }
  return BucketEdges(buckets, std::move(cuts));
}

BucketEdges FitEdges(const InteractionLog& log, const FeatureSchema& schema,
                     std::size_t buckets) {
  if (log.empty()) {
    throw ValidationError("cannot fit bucket edges on an empty log");
  }
  std::vector<std::vector<double>> columns(schema.size());
  for (auto& c : columns) c.reserve(log.size());
  for (const auto& r : log) {
    if (r.familiarity.size() != schema.size()) {
      throw ValidationError("familiarity arity does not match schema");
    }
    for (std::size_t f = 0; f < schema.size(); ++f) {
      columns[f].push_back(r.familiarity.values[f]);
    }
  }
  return FitEdges(columns, buckets);
}

CellIndex AssignCell(std::span<const double> familiarity,
                     const BucketEdges& edges) {
  if (familiarity.size() != edges.arity()) {
    throw ValidationError("familiarity arity does not match bucket edges");
  }
  CellIndex index(familiarity.size());
  for (std::size_t f = 0; f < familiarity.size(); ++f) {
    index[f] = edges.Assign(f, familiarity[f]);
  }
  return index;
}

std::uint64_t AdjustmentTable::Encode(const CellIndex& index) const {
  std::uint64_t key = 0;
  for (std::size_t f = 0; f < index.size(); ++f) {
    key = key * edges_.Buckets(f) + index[f];
  }
  return key;
}

CellIndex AdjustmentTable::Decode(std::uint64_t key) const {
  CellIndex index(edges_.arity());
  for (std::size_t f = edges_.arity(); f-- > 0;) {
    const auto k = edges_.Buckets(f);
    index[f] = static_cast<std::uint32_t>(key % k);
    key /= k;
  }
  return index;
}

std::vector<std::uint64_t> AdjustmentTable::SortedKeys() const {
  std::vector<std::uint64_t> keys;
  keys.reserve(cells_.size());
  for (const auto& [key, stats] : cells_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

double AdjustmentTable::Shrink(double sum, std::uint64_t count) const {
  const double m = smoothing_prior_weight_;
  double factor = (sum + m * global_mean_) / (static_cast<double>(count) + m);
  if (clip_) {
    factor = std::clamp(factor, clip_->low * global_mean_,
                        clip_->high * global_mean_);
  }
  return factor;
}

AdjustmentTable AdjustmentTable::Fit(const InteractionLog& log,
                                     BucketEdges edges,
                                     double smoothing_prior_weight,
                                     std::optional<ClipBounds> clip,
                                     std::uint64_t min_cell_count) {
  if (log.empty()) throw ValidationError("cannot fit a table on an empty log");
  if (!(smoothing_prior_weight >= 0.0)) {
    throw ValidationError("smoothing prior weight must be non-negative");
  }
  if (clip && !(clip->low > 0.0 && clip->low <= clip->high)) {
    throw ValidationError("clip bounds must satisfy 0 < low <= high");
  }

  AdjustmentTable table;
  table.edges_ = std::move(edges);
  table.smoothing_prior_weight_ = smoothing_prior_weight;
  table.clip_ = clip;
  table.min_cell_count_ = min_cell_count;

  const std::size_t arity = table.edges_.arity();
  struct Accumulator {
    double sum = 0.0;
    std::uint64_t count = 0;
  };
  std::unordered_map<std::uint64_t, Accumulator> cells;
  std::vector<std::vector<Accumulator>> marginals(arity);
  for (std::size_t f = 0; f < arity; ++f) {
    marginals[f].resize(table.edges_.Buckets(f));
  }

  double total = 0.0;
  for (const auto& r : log) {
    const CellIndex index = AssignCell(r.familiarity.span(), table.edges_);
    auto& cell = cells[table.Encode(index)];
    cell.sum += r.urps;
    ++cell.count;
    for (std::size_t f = 0; f < arity; ++f) {
      marginals[f][index[f]].sum += r.urps;
      ++marginals[f][index[f]].count;
    }
    total += r.urps;
  }
  table.global_mean_ = total / static_cast<double>(log.size());

  for (const auto& [key, acc] : cells) {
    table.cells_[key] = {table.Shrink(acc.sum, acc.count), acc.count};
  }
  table.marginals_.resize(arity);
  for (std::size_t f = 0; f < arity; ++f) {
    for (const auto& acc : marginals[f]) {
      CellStats stats{table.global_mean_, acc.count};
      if (acc.count > 0 || smoothing_prior_weight > 0.0) {
        stats.factor = table.Shrink(acc.sum, acc.count);
      }
      table.marginals_[f].push_back(stats);
    }
  }
  return table;
}

const CellStats* AdjustmentTable::FindCell(const CellIndex& index) const {
  auto it = cells_.find(Encode(index));
  return it == cells_.end() ? nullptr : &it->second;
}

double AdjustmentTable::Lookup(std::span<const double> familiarity,
                               std::uint64_t min_cell_count) const {
  const CellIndex index = AssignCell(familiarity, edges_);
  if (const CellStats* cell = FindCell(index);
      cell != nullptr && cell->count >= min_cell_count && cell->count > 0) {
    return cell->factor;
  }
  double log_sum = 0.0;
  int used = 0;
  for (std::size_t f = 0; f < index.size(); ++f) {
    const CellStats& m = marginals_[f][index[f]];
    if (m.count == 0 || m.count < min_cell_count) continue;
    log_sum += std::log(m.factor);
    ++used;
  }
  if (used > 0) return std::exp(log_sum / used);
  return global_mean_;
}

json AdjustmentTable::ToJson(const FeatureSchema& schema) const {
  json cells = json::array();
  ForEachCell([&cells](const CellIndex& index, const CellStats& stats) {
    cells.push_back(
        json{{"index", index}, {"factor", stats.factor}, {"count", stats.count}});
  });
  json marginals = json::array();
  for (const auto& per_feature : marginals_) {
    json entries = json::array();
    for (const auto& m : per_feature) {
      entries.push_back(json{{"factor", m.factor}, {"count", m.count}});
    }
    marginals.push_back(std::move(entries));
  }
  json config{{"smoothing_prior_weight", smoothing_prior_weight_},
              {"min_cell_count", min_cell_count_},
              {"clip", clip_ ? json::array({clip_->low, clip_->high})
                             : json(nullptr)}};
  return json{{"kind", "adjustment_table"},
              {"schema_hash", schema.Hash()},
              {"schema", lafb::ToJson(schema)},
              {"edges", edges_.ToJson()},
              {"global_mean", global_mean_},
              {"config", config},
              {"cells", cells},
              {"marginals", marginals}};
}

AdjustmentTable AdjustmentTable::FromJson(const json& j,
                                          const FeatureSchema* schema) {
  try {
    if (schema != nullptr &&
        j.at("schema_hash").get<std::string>() != schema->Hash()) {
      throw ValidationError("adjustment table was fitted on another schema");
    }
    AdjustmentTable table;
    table.edges_ = BucketEdges::FromJson(j.at("edges"));
    table.global_mean_ = j.at("global_mean").get<double>();
    const json& config = j.at("config");
    table.smoothing_prior_weight_ =
        config.at("smoothing_prior_weight").get<double>();
    table.min_cell_count_ = config.at("min_cell_count").get<std::uint64_t>();
    if (!config.at("clip").is_null()) {
      table.clip_ = ClipBounds{config.at("clip").at(0).get<double>(),
                               config.at("clip").at(1).get<double>()};
    }
    for (const auto& c : j.at("cells")) {
      const auto index = c.at("index").get<CellIndex>();
      if (index.size() != table.edges_.arity()) {
        throw ValidationError("cell index arity does not match edges");
      }
      for (std::size_t f = 0; f < index.size(); ++f) {
        if (index[f] >= table.edges_.Buckets(f)) {
          throw ValidationError("cell index out of range");
        }
      }
      table.cells_[table.Encode(index)] = {c.at("factor").get<double>(),
                                           c.at("count").get<std::uint64_t>()};
    }
    for (const auto& per_feature : j.at("marginals")) {
      std::vector<CellStats> entries;
      for (const auto& m : per_feature) {
        entries.push_back(
            {m.at("factor").get<double>(), m.at("count").get<std::uint64_t>()});
      }
      table.marginals_.push_back(std::move(entries));
    }
    if (table.marginals_.size() != table.edges_.arity()) {
      throw ValidationError("marginal tables do not match edges");
    }
    for (std::size_t f = 0; f < table.edges_.arity(); ++f) {
      if (table.marginals_[f].size() != table.edges_.Buckets(f)) {
        throw ValidationError("marginal table size does not match edges");
      }
    }
    return table;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed adjustment table: ") +
                          e.what());
  }
}

}  // namespace lafb
