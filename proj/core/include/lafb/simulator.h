#pragma once

// Synthetic user-item universe with a known familiarity-inflation process and
// a closed-loop session generator. Because the observed score is
//   urps = quality(u, v) * g(b) * lognormal noise,
// the conditional mean E[urps | b, quality] is known exactly, which gives the
// recovery tests an oracle.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lafb/baselines.h"
#include "lafb/bucketizer.h"
#include "lafb/core.h"
#include "lafb/debias.h"
#include "lafb/metrics.h"
#include "lafb/rng.h"

namespace lafb {

// Feature order of every simulator log.
enum SimFeature : std::size_t {
  kItemWatchCount = 0,
  kChannelWatchCount = 1,
  kDaysSinceLastInteraction = 2,
  kCreatorAffinity = 3,
  kSimFeatureCount = 4,
};

const FeatureSchema& SimulatorSchema();

struct UniverseConfig {
  std::size_t users = 2000;
  std::size_t items = 20000;
  std::size_t creators = 500;
  std::size_t latent_dim = 8;
  double creator_size_exponent = 1.2;
  double recent_creator_fraction = 0.2;
  std::uint64_t seed = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  static UniverseConfig FromJson(const nlohmann::json& j);
};

class Universe {
 public:
  static Universe Generate(const UniverseConfig& config);

  const UniverseConfig& config() const { return config_; }
  std::size_t users() const { return config_.users; }
  std::size_t items() const { return config_.items; }
  std::size_t creators() const { return config_.creators; }

  // exp(<user, item> / sqrt(d)).
  double TrueQuality(std::uint32_t user, std::uint32_t item) const;

  std::uint32_t CreatorOf(std::uint32_t item) const {
    return item_creator_[item];
  }
  bool IsRecentCreator(std::uint32_t creator) const {
    return creator_recent_[creator] != 0;
  }
  std::span<const double> UserVector(std::uint32_t user) const;
  std::span<const double> ItemVector(std::uint32_t item) const;

  // Zero-padded so lexicographic order equals numeric order.
  std::string UserId(std::uint32_t user) const;
  std::string ItemId(std::uint32_t item) const;
  std::string CreatorId(std::uint32_t creator) const;

  CreatorRegistry Creators() const;
  // Config, creator flags and item-to-creator map.
  nlohmann::json Manifest() const;

 private:
  UniverseConfig config_;
  std::vector<double> user_vectors_;
  std::vector<double> item_vectors_;
  std::vector<std::uint32_t> item_creator_;
  std::vector<std::uint8_t> creator_recent_;
  double inv_sqrt_dim_ = 1.0;
};

// g(b) = prod_i (1 + alpha_i * h_i(b_i)) with h = log1p for counts,
// exp(-b / tau) for recency and identity for affinity; multiplicative
// lognormal noise exp(sigma * Z).
struct InflationSpec {
  std::array<double, kSimFeatureCount> alpha = {0.6, 0.6, 0.4, 0.3};
  double recency_tau_days = 7.0;
  double noise_sigma = 0.2;

  double Inflation(std::span<const double> familiarity) const;
  // E[exp(sigma * Z)] = exp(sigma^2 / 2).
  double NoiseMean() const;

  void Validate() const;
  nlohmann::json ToJson() const;
  static InflationSpec FromJson(const nlohmann::json& j);
};

struct SessionConfig {
  std::size_t sessions = 50;
  std::size_t pool_size = 200;
  std::size_t slate_size = 10;
  std::size_t consume_top_k = 10;
  // Mean watch time of an item of unit de-inflated score, in seconds.
  double watch_time_scale = 60.0;
  // Exponential decay rate of creator affinity per session.
  double affinity_rate = 0.1;
  // Recency value reported for never-watched items. Beyond any reachable
  // gap for runs shorter than the horizon, and large enough that the
  // recency inflation term is negligible (exp(-60 / 7) < 2e-4).
  double recency_horizon_days = 60.0;
  std::int64_t epoch_start = 1'700'000'000;

  void Validate() const;
  nlohmann::json ToJson() const;
  static SessionConfig FromJson(const nlohmann::json& j);
};

// Ground truth recorded next to each logged interaction.
struct InteractionTruth {
  double quality = 0.0;
  double inflation = 0.0;
  double noise = 0.0;
};

// Candidates scored for one user at one step, in sampling order.
struct CandidatePool {
  std::size_t arity = kSimFeatureCount;
  std::vector<std::uint32_t> items;
  std::vector<std::uint32_t> creators;
  std::vector<double> urps;
  std::vector<double> features;  // size() x arity
  std::vector<double> quality;
  std::vector<double> inflation;
  std::vector<double> noise;

  std::size_t size() const { return items.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * arity, arity};
  }
  void Clear();
};

struct PolicyContext {
  std::uint32_t user = 0;
  std::int64_t day = 0;
  // Cumulative impressions per item within the current arm.
  std::span<const std::uint64_t> item_exposure;
  // Catalog popularity terciles, refreshed once per session.
  std::array<double, 2> popularity_terciles = {0.0, 0.0};
};

// Maps a scored candidate pool to an ordering; the first slate_size entries
// form the slate. Implementations must not draw randomness so arms stay
// paired.
class RankingPolicy {
 public:
  virtual ~RankingPolicy() = default;
  virtual void Rank(const CandidatePool& pool, const PolicyContext& context,
                    std::size_t slate_size,
                    std::vector<std::size_t>& order) const = 0;
};

// Ranks by a per-candidate score, descending, ties by item index.
class ScoringPolicy : public RankingPolicy {
 public:
  void Rank(const CandidatePool& pool, const PolicyContext& context,
            std::size_t slate_size,
            std::vector<std::size_t>& order) const override;

 protected:
  virtual double Score(const CandidatePool& pool, std::size_t i,
                       const PolicyContext& context) const = 0;
};

// Production control: raw URPS.
class ControlPolicy final : public ScoringPolicy {
 protected:
  double Score(const CandidatePool& pool, std::size_t i,
               const PolicyContext&) const override {
    return pool.urps[i];
  }
};

// Treatment: URPS divided by the debiasing factor.
class DebiasPolicy final : public ScoringPolicy {
 public:
  DebiasPolicy(std::shared_ptr<const FactorModel> factors, DebiasConfig config);

 protected:
  double Score(const CandidatePool& pool, std::size_t i,
               const PolicyContext& context) const override;

 private:
  std::shared_ptr<const FactorModel> factors_;
  DebiasConfig config_;
  double floor_ = 0.0;
};

class LogPopPolicy final : public ScoringPolicy {
 public:
  explicit LogPopPolicy(double lambda_pop) : lambda_pop_(lambda_pop) {}

 protected:
  double Score(const CandidatePool& pool, std::size_t i,
               const PolicyContext& context) const override;

 private:
  double lambda_pop_;
};

class StaticBoostPolicy final : public ScoringPolicy {
 public:
  explicit StaticBoostPolicy(BoostRule rule) : rule_(rule) {}

 protected:
  double Score(const CandidatePool& pool, std::size_t i,
               const PolicyContext& context) const override;

 private:
  BoostRule rule_;
};

// Control ordering followed by greedy quota admission over familiarity strata
// of one bucketed feature.
class UserCentricPolicy final : public RankingPolicy {
 public:
  UserCentricPolicy(BucketEdges edges, std::size_t feature,
                    StratumQuotas quotas);
  void Rank(const CandidatePool& pool, const PolicyContext& context,
            std::size_t slate_size,
            std::vector<std::size_t>& order) const override;

 private:
  BucketEdges edges_;
  std::size_t feature_;
  StratumQuotas quotas_;
};

// Control ordering followed by greedy quota admission over global item
// popularity terciles.
class ItemCentricPolicy final : public RankingPolicy {
 public:
  explicit ItemCentricPolicy(StratumQuotas quotas);
  void Rank(const CandidatePool& pool, const PolicyContext& context,
            std::size_t slate_size,
            std::vector<std::size_t>& order) const override;

 private:
  StratumQuotas quotas_;
};

// Per-user familiarity state and per-arm exposure counters.
class SessionState {
 public:
  SessionState(const Universe& universe, std::uint64_t seed);

  std::int64_t day() const { return day_; }
  std::span<const std::uint64_t> item_exposure() const {
    return item_exposure_;
  }

  // Familiarity of (user, item) on the current day, in SimulatorSchema
  // order.
  void Familiarity(std::uint32_t user, std::uint32_t item,
                   const SessionConfig& session, std::span<double> out) const;

  std::uint32_t ItemWatchCount(std::uint32_t user, std::uint32_t item) const;
  double CreatorAffinity(std::uint32_t user, std::uint32_t creator,
                         const SessionConfig& session) const;

  // Records one session's consumed items for `user` and the impressions.
  void Consume(std::uint32_t user, std::span<const std::uint32_t> items,
               const SessionConfig& session);
  void AdvanceDay() { ++day_; }

  Rng& UserRng(std::uint32_t user) { return users_[user].rng; }

 private:
  struct ItemHistory {
    std::uint32_t count = 0;
    std::int64_t last_day = 0;
  };
  struct CreatorHistory {
    std::uint32_t watch_count = 0;
    double affinity = 0.0;  // value as of affinity_day
    std::int64_t affinity_day = 0;
  };
  struct UserState {
    std::unordered_map<std::uint32_t, ItemHistory> items;
    std::unordered_map<std::uint32_t, CreatorHistory> creators;
    Rng rng;
  };

  const Universe* universe_;
  std::vector<UserState> users_;
  std::vector<std::uint64_t> item_exposure_;
  std::int64_t day_ = 0;
};

// Observed URPS and familiarity for (user, item) under the current state.
// Always consumes one normal draw from `rng`.
struct Observation {
  double urps = 0.0;
  FamiliarityVector familiarity;
  InteractionTruth truth;
};
Observation ObserveUrps(const Universe& universe, std::uint32_t user,
                        std::uint32_t item, const SessionState& state,
                        const InflationSpec& spec,
                        const SessionConfig& session, Rng& rng);

struct ArmRun {
  std::string name;
  InteractionLog log;
  std::vector<InteractionTruth> truth;
};

// Runs every user for one session under `policy`, appending the consumed
// top-k of each slate to `run`, then advances the day.
void StepSession(const Universe& universe, SessionState& state,
                 const RankingPolicy& policy, const InflationSpec& spec,
                 const SessionConfig& session, ArmRun& run);

// A full arm from a fresh state: `session.sessions` steps with user streams
// derived from (seed, user id).
ArmRun RunArm(const Universe& universe, const RankingPolicy& policy,
              const InflationSpec& spec, const SessionConfig& session,
              std::uint64_t seed, std::string name);

struct ArmSpec {
  std::string name;
  std::shared_ptr<const RankingPolicy> policy;
};

struct ExperimentResult {
  std::vector<ArmRun> runs;  // empty unless keep_logs
  std::vector<ArmSummary> summaries;
  MetricsReport report;
};

// Runs all arms with identical universe and per-user random streams. The
// first arm is the control. `on_arm` sees each finished arm before its log is
// dropped.
ExperimentResult RunExperiment(
    const Universe& universe, std::span<const ArmSpec> arms,
    const InflationSpec& spec, const SessionConfig& session,
    std::uint64_t seed, const EmergingCreatorSet& emerging,
    const MetricsConfig& metrics, bool keep_logs = false,
    const std::function<void(const ArmRun&)>& on_arm = {});

}  // namespace lafb
