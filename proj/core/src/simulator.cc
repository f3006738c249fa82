#include "lafb/simulator.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lafb {

using nlohmann::json;

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

// Stream ids below are disjoint from user ids shifted by kUserStreamBase.
constexpr std::uint64_t kVectorStream = 1;
constexpr std::uint64_t kCreatorStream = 2;
constexpr std::uint64_t kUserStreamBase = 1'000;

std::string PaddedId(char prefix, std::uint32_t value, std::size_t count) {
  std::size_t width = 1;
  for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10; n /= 10) ++width;
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

}  // namespace

const FeatureSchema& SimulatorSchema() {
  static const FeatureSchema schema(
      {"item_watch_count", "channel_watch_count", "days_since_last_interaction",
       "creator_affinity"},
      {FeatureKind::kCount, FeatureKind::kCount, FeatureKind::kRecency,
       FeatureKind::kAffinity},
      {Monotonicity::kIncreasing, Monotonicity::kIncreasing,
       Monotonicity::kDecreasing, Monotonicity::kIncreasing});
  return schema;
}

void UniverseConfig::Validate() const {
  if (users == 0 || items == 0 || creators == 0 || latent_dim == 0) {
    throw ValidationError("universe sizes must be positive");
  }
  if (creators > items) {
    throw ValidationError("every creator needs at least one item");
  }
  if (items > std::numeric_limits<std::uint32_t>::max() ||
      users > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("universe too large");
  }
  if (!(creator_size_exponent >= 0.0) || !std::isfinite(creator_size_exponent)) {
    throw ValidationError("creator size exponent must be finite and >= 0");
  }
  if (!(recent_creator_fraction >= 0.0 && recent_creator_fraction <= 1.0)) {
    throw ValidationError("recent creator fraction must lie in [0, 1]");
  }
}

json UniverseConfig::ToJson() const {
  return json{{"users", users},
              {"items", items},
              {"creators", creators},
              {"latent_dim", latent_dim},
              {"creator_size_exponent", creator_size_exponent},
              {"recent_creator_fraction", recent_creator_fraction},
              {"seed", seed}};
}

UniverseConfig UniverseConfig::FromJson(const json& j) {
  UniverseConfig c;
  c.users = j.value("users", c.users);
  c.items = j.value("items", c.items);
  c.creators = j.value("creators", c.creators);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.creator_size_exponent =
      j.value("creator_size_exponent", c.creator_size_exponent);
  c.recent_creator_fraction =
      j.value("recent_creator_fraction", c.recent_creator_fraction);
  c.seed = j.value("seed", c.seed);
  c.Validate();
  return c;
}

Universe Universe::Generate(const UniverseConfig& config) {
  config.Validate();
  Universe u;
  u.config_ = config;
  const std::size_t d = config.latent_dim;
  u.inv_sqrt_dim_ = 1.0 / std::sqrt(static_cast<double>(d));

  Rng vectors(DeriveSeed(config.seed, kVectorStream));
  u.user_vectors_.resize(config.users * d);
  for (double& x : u.user_vectors_) x = vectors.Normal();
  u.item_vectors_.resize(config.items * d);
  for (double& x : u.item_vectors_) x = vectors.Normal();

  // Creator c has weight (c + 1)^-exponent. Each creator gets one item, the
  // rest are drawn from the weights.
  Rng creators(DeriveSeed(config.seed, kCreatorStream));
  std::vector<double> cumulative(config.creators);
  double total = 0.0;
  for (std::size_t c = 0; c < config.creators; ++c) {
    total += std::pow(static_cast<double>(c + 1), -config.creator_size_exponent);
    cumulative[c] = total;
  }
  u.item_creator_.resize(config.items);
  for (std::size_t v = 0; v < config.items; ++v) {
    if (v < config.creators) {
      u.item_creator_[v] = static_cast<std::uint32_t>(v);
      continue;
    }
    const double r = creators.Uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    u.item_creator_[v] = static_cast<std::uint32_t>(
        std::min<std::size_t>(it - cumulative.begin(), config.creators - 1));
  }
  // Creator ids carry no size information: shuffle which index owns which
  // block of items.
  std::vector<std::uint32_t> relabel(config.creators);
  std::iota(relabel.begin(), relabel.end(), 0);
  creators.Shuffle(relabel.begin(), relabel.end());
  for (auto& c : u.item_creator_) c = relabel[c];

  std::vector<std::uint32_t> order(config.creators);
  std::iota(order.begin(), order.end(), 0);
  creators.Shuffle(order.begin(), order.end());
  const auto recent = static_cast<std::size_t>(std::llround(
      config.recent_creator_fraction * static_cast<double>(config.creators)));
  u.creator_recent_.assign(config.creators, 0);
  for (std::size_t k = 0; k < recent; ++k) u.creator_recent_[order[k]] = 1;
  return u;
}

double Universe::TrueQuality(std::uint32_t user, std::uint32_t item) const {
  const auto a = UserVector(user);
  const auto b = ItemVector(item);
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  return std::exp(dot * inv_sqrt_dim_);
}

std::span<const double> Universe::UserVector(std::uint32_t user) const {
  const std::size_t d = config_.latent_dim;
  return {user_vectors_.data() + static_cast<std::size_t>(user) * d, d};
}

std::span<const double> Universe::ItemVector(std::uint32_t item) const {
  const std::size_t d = config_.latent_dim;
  return {item_vectors_.data() + static_cast<std::size_t>(item) * d, d};
}

std::string Universe::UserId(std::uint32_t user) const {
  return PaddedId('u', user, config_.users);
}
std::string Universe::ItemId(std::uint32_t item) const {
  return PaddedId('i', item, config_.items);
}
std::string Universe::CreatorId(std::uint32_t creator) const {
  return PaddedId('c', creator, config_.creators);
}

CreatorRegistry Universe::Creators() const {
  CreatorRegistry registry;
  for (std::uint32_t c = 0; c < config_.creators; ++c) {
    registry.ids.push_back(CreatorId(c));
    registry.recent.push_back(IsRecentCreator(c));
  }
  return registry;
}

json Universe::Manifest() const {
  std::vector<std::size_t> sizes(config_.creators, 0);
  for (auto c : item_creator_) ++sizes[c];
  json creators = json::array();
  for (std::uint32_t c = 0; c < config_.creators; ++c) {
    creators.push_back(json{{"id", CreatorId(c)},
                            {"recent", IsRecentCreator(c)},
                            {"items", sizes[c]}});
  }
  return json{{"config", config_.ToJson()},
              {"creators", creators},
              {"item_creator", item_creator_}};
}

double InflationSpec::Inflation(std::span<const double> b) const {
  if (b.size() != kSimFeatureCount) {
    throw ValidationError("inflation expects the simulator feature arity");
  }
  double g = 1.0;
  g *= 1.0 + alpha[kItemWatchCount] * std::log1p(std::max(b[kItemWatchCount], 0.0));
  g *= 1.0 + alpha[kChannelWatchCount] *
                 std::log1p(std::max(b[kChannelWatchCount], 0.0));
  g *= 1.0 + alpha[kDaysSinceLastInteraction] *
                 std::exp(-b[kDaysSinceLastInteraction] / recency_tau_days);
  g *= 1.0 + alpha[kCreatorAffinity] * b[kCreatorAffinity];
  return g;
}

double InflationSpec::NoiseMean() const {
  return std::exp(0.5 * noise_sigma * noise_sigma);
}

void InflationSpec::Validate() const {
  for (double a : alpha) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw ValidationError("inflation alpha must be finite and >= 0");
    }
  }
  if (!(recency_tau_days > 0.0)) {
    throw ValidationError("recency tau must be positive");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("noise sigma must be finite and >= 0");
  }
}

json InflationSpec::ToJson() const {
  json a = json::object();
  const auto& names = SimulatorSchema().names();
  for (std::size_t i = 0; i < kSimFeatureCount; ++i) a[names[i]] = alpha[i];
  return json{{"alpha", a},
              {"recency_tau_days", recency_tau_days},
              {"noise_sigma", noise_sigma}};
}

InflationSpec InflationSpec::FromJson(const json& j) {
  InflationSpec s;
  if (j.contains("alpha")) {
    const auto& names = SimulatorSchema().names();
    for (const auto& [key, value] : j.at("alpha").items()) {
      const auto it = std::find(names.begin(), names.end(), key);
      if (it == names.end()) {
        throw ValidationError("unknown inflation feature '" + key + "'");
      }
      s.alpha[static_cast<std::size_t>(it - names.begin())] = value.get<double>();
    }
  }
  s.recency_tau_days = j.value("recency_tau_days", s.recency_tau_days);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.Validate();
  return s;
}

void SessionConfig::Validate() const {
  if (pool_size == 0) throw ValidationError("pool size must be positive");
  if (slate_size > pool_size) {
    throw ValidationError("slate size exceeds candidate pool size");
  }
  if (consume_top_k > slate_size) {
    throw ValidationError("consume_top_k exceeds slate size");
  }
  if (!(watch_time_scale >= 0.0) || !std::isfinite(watch_time_scale)) {
    throw ValidationError("watch time scale must be finite and >= 0");
  }
  if (!(affinity_rate > 0.0 && affinity_rate <= 1.0)) {
    throw ValidationError("affinity rate must lie in (0, 1]");
  }
  if (!(recency_horizon_days >= 0.0)) {
    throw ValidationError("recency horizon must be non-negative");
  }
}

json SessionConfig::ToJson() const {
  return json{{"sessions", sessions},
              {"pool_size", pool_size},
              {"slate_size", slate_size},
              {"consume_top_k", consume_top_k},
              {"watch_time_scale", watch_time_scale},
              {"affinity_rate", affinity_rate},
              {"recency_horizon_days", recency_horizon_days},
              {"epoch_start", epoch_start}};
}

SessionConfig SessionConfig::FromJson(const json& j) {
  SessionConfig c;
  c.sessions = j.value("sessions", c.sessions);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.slate_size = j.value("slate_size", c.slate_size);
  c.consume_top_k = j.value("consume_top_k", c.consume_top_k);
  c.watch_time_scale = j.value("watch_time_scale", c.watch_time_scale);
  c.affinity_rate = j.value("affinity_rate", c.affinity_rate);
  c.recency_horizon_days = j.value("recency_horizon_days", c.recency_horizon_days);
  c.epoch_start = j.value("epoch_start", c.epoch_start);
  c.Validate();
  return c;
}

void CandidatePool::Clear() {
  items.clear();
  creators.clear();
  urps.clear();
  features.clear();
  quality.clear();
  inflation.clear();
  noise.clear();
}

// Policies.

void ScoringPolicy::Rank(const CandidatePool& pool, const PolicyContext& context,
                         std::size_t slate_size,
                         std::vector<std::size_t>& order) const {
  thread_local std::vector<double> scores;
  scores.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    scores[i] = Score(pool, i, context);
  }
  order.resize(pool.size());
  std::iota(order.begin(), order.end(), 0);
  const auto by_score = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pool.items[a] < pool.items[b];
  };
  const std::size_t top = std::min(slate_size, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top),
                    order.end(), by_score);
}

DebiasPolicy::DebiasPolicy(std::shared_ptr<const FactorModel> factors,
                           DebiasConfig config)
    : factors_(std::move(factors)), config_(config) {
  if (!factors_) throw ValidationError("debias policy needs a factor model");
  config_.Validate();
  floor_ = config_.Floor(factors_->ReferenceMean());
}

double DebiasPolicy::Score(const CandidatePool& pool, std::size_t i,
                           const PolicyContext&) const {
  return DebiasScore(pool.urps[i], factors_->Factor(pool.row(i)), floor_,
                     config_.strength);
}

double LogPopPolicy::Score(const CandidatePool& pool, std::size_t i,
                           const PolicyContext& context) const {
  return LogPopPenalize(
      pool.urps[i], static_cast<double>(context.item_exposure[pool.items[i]]),
      lambda_pop_);
}

double StaticBoostPolicy::Score(const CandidatePool& pool, std::size_t i,
                                const PolicyContext&) const {
  return StaticBoost(pool.urps[i], pool.row(i), rule_);
}

namespace {

void ControlOrder(const CandidatePool& pool, std::vector<std::size_t>& order) {
  order.resize(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&pool](std::size_t a, std::size_t b) {
    if (pool.urps[a] != pool.urps[b]) return pool.urps[a] > pool.urps[b];
    return pool.items[a] < pool.items[b];
  });
}

}  // namespace

UserCentricPolicy::UserCentricPolicy(BucketEdges edges, std::size_t feature,
                                     StratumQuotas quotas)
    : edges_(std::move(edges)), feature_(feature), quotas_(quotas) {
  if (feature_ >= edges_.arity()) {
    throw ValidationError("user-centric feature out of range");
  }
  quotas_.Validate();
}

void UserCentricPolicy::Rank(const CandidatePool& pool, const PolicyContext&,
                             std::size_t slate_size,
                             std::vector<std::size_t>& order) const {
  ControlOrder(pool, order);
  std::vector<double> values(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) values[i] = pool.row(i)[feature_];
  const auto strata = FamiliarityStrata(values, edges_, feature_);
  order = UserCentricRerank(order, strata, quotas_, slate_size);
}

ItemCentricPolicy::ItemCentricPolicy(StratumQuotas quotas) : quotas_(quotas) {
  quotas_.Validate();
}

void ItemCentricPolicy::Rank(const CandidatePool& pool,
                             const PolicyContext& context,
                             std::size_t slate_size,
                             std::vector<std::size_t>& order) const {
  ControlOrder(pool, order);
  std::vector<double> popularity(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    popularity[i] = static_cast<double>(context.item_exposure[pool.items[i]]);
  }
  const auto strata = PopularityStrata(popularity, context.popularity_terciles);
  order = ItemCentricRerank(order, strata, quotas_, slate_size);
}

// Session state.

SessionState::SessionState(const Universe& universe, std::uint64_t seed)
    : universe_(&universe), item_exposure_(universe.items(), 0) {
  users_.resize(universe.users());
  for (std::size_t u = 0; u < users_.size(); ++u) {
    users_[u].rng = Rng(DeriveSeed(seed, kUserStreamBase + u));
  }
}

std::uint32_t SessionState::ItemWatchCount(std::uint32_t user,
                                           std::uint32_t item) const {
  const auto& items = users_[user].items;
  const auto it = items.find(item);
  return it == items.end() ? 0 : it->second.count;
}

double SessionState::CreatorAffinity(std::uint32_t user, std::uint32_t creator,
                                     const SessionConfig& session) const {
  const auto& creators = users_[user].creators;
  const auto it = creators.find(creator);
  if (it == creators.end() || it->second.affinity == 0.0) return 0.0;
  // Stored value is as of the end of affinity_day; every later completed
  // session applied one decay step with zero share.
  const std::int64_t idle = day_ - it->second.affinity_day - 1;
  if (idle <= 0) return it->second.affinity;
  return it->second.affinity *
         std::pow(1.0 - session.affinity_rate, static_cast<double>(idle));
}

void SessionState::Familiarity(std::uint32_t user, std::uint32_t item,
                               const SessionConfig& session,
                               std::span<double> out) const {
  const UserState& state = users_[user];
  const std::uint32_t creator = universe_->CreatorOf(item);
  const auto item_it = state.items.find(item);
  if (item_it == state.items.end()) {
    out[kItemWatchCount] = 0.0;
    out[kDaysSinceLastInteraction] = session.recency_horizon_days;
  } else {
    out[kItemWatchCount] = item_it->second.count;
    out[kDaysSinceLastInteraction] =
        static_cast<double>(day_ - item_it->second.last_day);
  }
  const auto creator_it = state.creators.find(creator);
  out[kChannelWatchCount] =
      creator_it == state.creators.end() ? 0.0 : creator_it->second.watch_count;
  out[kCreatorAffinity] = CreatorAffinity(user, creator, session);
}

void SessionState::Consume(std::uint32_t user,
                           std::span<const std::uint32_t> items,
                           const SessionConfig& session) {
  if (items.empty()) return;
  UserState& state = users_[user];
  const double share = 1.0 / static_cast<double>(items.size());
  std::unordered_map<std::uint32_t, double> session_share;
  for (std::uint32_t item : items) {
    ItemHistory& h = state.items[item];
    ++h.count;
    h.last_day = day_;
    const std::uint32_t creator = universe_->CreatorOf(item);
    ++state.creators[creator].watch_count;
    session_share[creator] += share;
    ++item_exposure_[item];
  }
  // Creators with zero share decay lazily; only touched ones update here.
  for (const auto& [creator, s] : session_share) {
    CreatorHistory& h = state.creators[creator];
    const double current = CreatorAffinity(user, creator, session);
    h.affinity = std::min(
        1.0, (1.0 - session.affinity_rate) * current + session.affinity_rate * s);
    h.affinity_day = day_;
  }
}

Observation ObserveUrps(const Universe& universe, std::uint32_t user,
                        std::uint32_t item, const SessionState& state,
                        const InflationSpec& spec, const SessionConfig& session,
                        Rng& rng) {
  Observation obs;
  obs.familiarity.values.resize(kSimFeatureCount);
  state.Familiarity(user, item, session, obs.familiarity.values);
  obs.truth.quality = universe.TrueQuality(user, item);
  obs.truth.inflation = spec.Inflation(obs.familiarity.span());
  obs.truth.noise = std::exp(spec.noise_sigma * rng.Normal());
  obs.urps = obs.truth.quality * obs.truth.inflation * obs.truth.noise;
  return obs;
}

namespace {

// Floyd's algorithm: `count` distinct indices from [0, n) in a fixed number
// of draws. `mark` holds a per-call stamp so it never needs clearing.
void SamplePool(Rng& rng, std::size_t n, std::size_t count,
                std::vector<std::uint32_t>& mark, std::uint32_t stamp,
                std::vector<std::uint32_t>& out) {
  out.clear();
  for (std::size_t j = n - count; j < n; ++j) {
    auto t = static_cast<std::uint32_t>(rng.Index(j + 1));
    if (mark[t] == stamp) t = static_cast<std::uint32_t>(j);
    mark[t] = stamp;
    out.push_back(t);
  }
}

}  // namespace

void StepSession(const Universe& universe, SessionState& state,
                 const RankingPolicy& policy, const InflationSpec& spec,
                 const SessionConfig& session, ArmRun& run) {
  session.Validate();
  if (session.pool_size > universe.items()) {
    throw ValidationError("candidate pool larger than the catalog");
  }
  const std::size_t k = session.consume_top_k;
  // Exposure seen by popularity-aware policies is frozen for the whole
  // session so user order cannot matter.
  const std::vector<std::uint64_t> exposure(state.item_exposure().begin(),
                                            state.item_exposure().end());
  PolicyContext context;
  context.day = state.day();
  context.item_exposure = exposure;
  context.popularity_terciles = PopularityTerciles(exposure);

  thread_local std::vector<std::uint32_t> mark;
  thread_local std::uint32_t stamp = 0;
  if (mark.size() < universe.items()) {
    mark.assign(universe.items(), 0);
    stamp = 0;
  }
  CandidatePool pool;
  std::vector<std::uint32_t> sampled;
  std::vector<std::size_t> order;
  std::vector<std::uint32_t> consumed;
  const std::int64_t day_start =
      session.epoch_start + state.day() * kSecondsPerDay;

  for (std::uint32_t user = 0; user < universe.users(); ++user) {
    Rng& rng = state.UserRng(user);
    if (++stamp == 0) {
      std::fill(mark.begin(), mark.end(), 0);
      stamp = 1;
    }
    SamplePool(rng, universe.items(), session.pool_size, mark, stamp, sampled);

    pool.Clear();
    pool.features.resize(sampled.size() * kSimFeatureCount);
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      const std::uint32_t item = sampled[i];
      std::span<double> b(pool.features.data() + i * kSimFeatureCount,
                          kSimFeatureCount);
      state.Familiarity(user, item, session, b);
      const double q = universe.TrueQuality(user, item);
      const double g = spec.Inflation(b);
      const double eps = std::exp(spec.noise_sigma * rng.Normal());
      pool.items.push_back(item);
      pool.creators.push_back(universe.CreatorOf(item));
      pool.quality.push_back(q);
      pool.inflation.push_back(g);
      pool.noise.push_back(eps);
      pool.urps.push_back(q * g * eps);
    }

    context.user = user;
    policy.Rank(pool, context, session.slate_size, order);
    if (order.size() != pool.size()) {
      throw std::logic_error("policy returned a partial ordering");
    }

    consumed.clear();
    const std::string user_id = universe.UserId(user);
    for (std::size_t pos = 0; pos < k; ++pos) {
      const std::size_t i = order[pos];
      Interaction r;
      r.user_id = user_id;
      r.item_id = universe.ItemId(pool.items[i]);
      r.creator_id = universe.CreatorId(pool.creators[i]);
      r.timestamp = day_start + static_cast<std::int64_t>(pos);
      // Watch time follows the uninflated appeal of the item.
      r.watch_time = session.watch_time_scale * pool.quality[i] *
                     pool.noise[i] * rng.Uniform(0.5, 1.5);
      r.urps = pool.urps[i];
      const auto b = pool.row(i);
      r.familiarity.values.assign(b.begin(), b.end());
      run.log.push_back(std::move(r));
      run.truth.push_back({pool.quality[i], pool.inflation[i], pool.noise[i]});
      consumed.push_back(pool.items[i]);
    }
    state.Consume(user, consumed, session);
  }
  state.AdvanceDay();
}

ArmRun RunArm(const Universe& universe, const RankingPolicy& policy,
              const InflationSpec& spec, const SessionConfig& session,
              std::uint64_t seed, std::string name) {
  spec.Validate();
  session.Validate();
  ArmRun run;
  run.name = std::move(name);
  const std::size_t expected =
      universe.users() * session.sessions * session.consume_top_k;
  run.log.reserve(expected);
  run.truth.reserve(expected);
  SessionState state(universe, seed);
  for (std::size_t s = 0; s < session.sessions; ++s) {
    StepSession(universe, state, policy, spec, session, run);
  }
  return run;
}

ExperimentResult RunExperiment(const Universe& universe,
                               std::span<const ArmSpec> arms,
                               const InflationSpec& spec,
                               const SessionConfig& session, std::uint64_t seed,
                               const EmergingCreatorSet& emerging,
                               const MetricsConfig& metrics, bool keep_logs,
                               const std::function<void(const ArmRun&)>& on_arm) {
  if (arms.empty()) throw ValidationError("experiment needs at least a control arm");
  for (const auto& arm : arms) {
    if (!arm.policy) {
      throw ValidationError("arm '" + arm.name + "' has no policy");
    }
  }
  ExperimentResult result;
  const auto days = static_cast<double>(std::max<std::size_t>(session.sessions, 1));
  for (const auto& arm : arms) {
    ArmRun run = RunArm(universe, *arm.policy, spec, session, seed, arm.name);
    result.summaries.push_back(
        SummarizeArm(arm.name, run.log, emerging, metrics, days));
    if (on_arm) on_arm(run);
    if (keep_logs) result.runs.push_back(std::move(run));
  }
  result.report = BuildReport(result.summaries, metrics);
  return result;
}

}  // namespace lafb
