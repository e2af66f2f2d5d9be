// Copyright 2026 The fairrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "fairrec/hrl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fairrec/errors.hpp"
#include "fairrec/kernels.hpp"
#include "fairrec/metrics.hpp"

namespace fairrec::hrl {

namespace {

constexpr int kActionDim = 2;
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

ManagerAction squash(std::span<const double> raw) {
  return {softplus(raw[0]), softplus(raw[1])};
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::DsrmHrl:
      return "DSRM-HRL";
    case Variant::Flat:
      return "FLAT";
    case Variant::HrlRaw:
      return "HRL-RAW";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "DSRM-HRL") return Variant::DsrmHrl;
  if (name == "FLAT") return Variant::Flat;
  if (name == "HRL-RAW") return Variant::HrlRaw;
  throw ConfigError("hrl.variant", "unknown variant '" + name +
                                       "' (expected DSRM-HRL, FLAT or HRL-RAW)");
}

bool uses_denoiser(Variant v) { return v != Variant::HrlRaw; }

double squashed_gaussian_log_prob(std::span<const double> raw, std::span<const double> mean,
                                  std::span<const double> log_std) {
  if (raw.size() != mean.size() || raw.size() != log_std.size())
    throw ShapeError("squashed_gaussian_log_prob: size mismatch");
  double lp = 0.0;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double sd = std::exp(log_std[j]);
    const double zscore = (raw[j] - mean[j]) / sd;
    lp += -0.5 * zscore * zscore - log_std[j] - kLogSqrt2Pi;
    // d softplus(u)/du = sigmoid(u); log sigmoid(u) = -softplus(-u).
    lp += softplus(-raw[j]);
  }
  return lp;
}

ManagerPolicy::ManagerPolicy(int state_dim, const std::vector<int>& hidden,
                             nn::Activation activation, double init_log_std,
                             std::uint64_t seed)
    : log_std_(kActionDim, init_log_std) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(kActionDim);
  net_ = nn::Mlp(sizes, activation, seed);
  clamp_log_std();
}

Vec ManagerPolicy::mean(std::span<const double> state) const {
  Vec mu = net_.forward(state);
  if (!all_finite(mu)) throw PolicyFault("manager produced a non-finite mean");
  return mu;
}

ManagerSample ManagerPolicy::act(std::span<const double> state, Rng& rng, bool greedy) const {
  const Vec mu = mean(state);
  ManagerSample out;
  out.raw = mu;
  if (!greedy)
    for (int j = 0; j < kActionDim; ++j) out.raw[j] += std::exp(log_std_[j]) * rng.normal();
  out.action = squash(out.raw);
  out.log_prob = squashed_gaussian_log_prob(out.raw, mu, log_std_);
  if (!std::isfinite(out.log_prob) || !std::isfinite(out.action.omega_acc) ||
      !std::isfinite(out.action.omega_fair))
    throw PolicyFault("manager produced a non-finite action");
  return out;
}

double ManagerPolicy::log_prob(std::span<const double> state, std::span<const double> raw) const {
  return squashed_gaussian_log_prob(raw, mean(state), log_std_);
}

double ManagerPolicy::entropy() const {
  double h = 0.0;
  for (double ls : log_std_) h += ls + 0.5 + kLogSqrt2Pi;
  return h;
}

void ManagerPolicy::clamp_log_std() {
  for (double& ls : log_std_) ls = std::clamp(ls, kMinLogStd, kMaxLogStd);
}

Vec score_items(std::span<const double> state, const ManagerAction& z,
                const env::ItemCatalog& catalog) {
  return kernels::score_items_parallel(state, z.omega_acc, z.omega_fair, catalog);
}

std::vector<int> select_slate(std::span<const double> scores, int k) {
  if (k < 0 || k > static_cast<int>(scores.size()))
    throw InvalidActionError("select_slate: k = " + std::to_string(k) + " exceeds " +
                             std::to_string(scores.size()) + " items");
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  ids.resize(k);
  return ids;
}

void ExposureLedger::record(std::span<const int> slate) {
  for (int item : slate) {
    if (item < 0 || item >= static_cast<int>(counts_.size()))
      throw ConsistencyError("ExposureLedger: unknown item");
    ++counts_[item];
  }
  lists_.emplace_back(slate.begin(), slate.end());
}

void ExposureLedger::reset(int n_items) {
  counts_.assign(n_items, 0);
  lists_.clear();
}

std::int64_t ExposureLedger::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

double shaped_reward(double reward, const ExposureLedger& ledger, double lambda) {
  if (lambda == 0.0) return reward;
  return reward - lambda * metrics::gini(std::span<const std::int64_t>(ledger.counts()));
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      const std::vector<bool>& dones, double next_value, double gamma,
                      double lam_gae, bool normalize) {
  const std::size_t n = rewards.size();
  if (n == 0) throw std::invalid_argument("compute_gae: empty trajectory");
  if (values.size() != n || dones.size() != n)
    throw ShapeError("compute_gae: rewards/values/dones length mismatch");
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double gae = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_v = t + 1 < n ? values[t + 1] : next_value;
    const double nonterminal = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_v * nonterminal - values[t];
    gae = delta + gamma * lam_gae * nonterminal * gae;
    out.advantages[t] = gae;
    out.returns[t] = gae + values[t];
  }
  if (normalize && n >= 2) {
    const auto ms = metrics::mean_std(out.advantages);
    const double sd = ms.std > 1e-12 ? ms.std : 1.0;
    for (double& a : out.advantages) a = (a - ms.mean) / sd;
  }
  return out;
}

double clipped_objective(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double surrogate_objective(const ManagerPolicy& policy, std::span<const PpoSample> batch,
                           double clip_eps) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const PpoSample& s : batch) {
    const double ratio = std::exp(policy.log_prob(s.state, s.raw) - s.old_log_prob);
    if (std::isfinite(ratio)) total += clipped_objective(ratio, s.advantage, clip_eps);
  }
  return total / static_cast<double>(batch.size());
}

PpoTrainer::PpoTrainer(ManagerPolicy& policy, nn::Mlp& value_net, const HrlConfig& config)
    : policy_(policy),
      value_(value_net),
      config_(config),
      policy_adam_({.lr = config.policy_lr}, policy.net()),
      value_adam_({.lr = config.value_lr}, value_net) {
  log_std_slot_ = policy_adam_.add_slot(policy_.log_std().size());
}

PpoStats PpoTrainer::minibatch_step(std::span<const PpoSample> batch, bool train_policy) {
  PpoStats stats;
  const std::size_t n = batch.size();
  if (n == 0) return stats;
  const double inv_n = 1.0 / static_cast<double>(n);
  const int d = policy_.net().input_size();
  std::vector<double> inputs(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(batch[i].state.size()) != d)
      throw ShapeError("ppo_update: state dimension mismatch");
    std::copy(batch[i].state.begin(), batch[i].state.end(), inputs.begin() + i * d);
  }

  if (train_policy) {
    const Vec log_std = policy_.log_std();
    Vec inv_var(kActionDim);
    for (int j = 0; j < kActionDim; ++j) inv_var[j] = std::exp(-2.0 * log_std[j]);
    std::vector<double> d_log_std(n * kActionDim, 0.0);
    std::vector<char> dropped(n, 0);
    const kernels::OutputGrad grad = [&](std::size_t i, std::span<const double> mu,
                                         std::span<double> dy) {
      const PpoSample& s = batch[i];
      const double lp = squashed_gaussian_log_prob(s.raw, mu, log_std);
      const double ratio = std::exp(lp - s.old_log_prob);
      if (!std::isfinite(ratio)) {
        dropped[i] = 1;
        return 0.0;
      }
      const double a = s.advantage;
      const double objective = clipped_objective(ratio, a, config_.clip_eps);
      // Gradient flows only through the unclipped branch of the min.
      const bool active = ratio * a <= objective;
      const double coef = active ? a * ratio : 0.0;
      for (int j = 0; j < kActionDim; ++j) {
        const double diff = s.raw[j] - mu[j];
        dy[j] = -coef * diff * inv_var[j] * inv_n;
        d_log_std[i * kActionDim + j] = -coef * (diff * diff * inv_var[j] - 1.0) * inv_n;
      }
      return -objective;
    };
    auto res = kernels::batch_gradients_parallel(policy_.net(), inputs, n, grad);
    Vec g_log_std(kActionDim, -config_.entropy_coef);
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < kActionDim; ++j) g_log_std[j] += d_log_std[i * kActionDim + j];
    stats.dropped = static_cast<std::size_t>(std::count(dropped.begin(), dropped.end(), 1));
    stats.surrogate = -res.loss * inv_n;
    policy_adam_.step(policy_.net(), res.grads);
    policy_adam_.step(policy_.log_std(), g_log_std, log_std_slot_);
    policy_.clamp_log_std();
  }

  const kernels::OutputGrad vgrad = [&](std::size_t i, std::span<const double> v,
                                        std::span<double> dy) {
    const double diff = v[0] - batch[i].ret;
    dy[0] = 2.0 * diff * inv_n;
    return diff * diff;
  };
  auto vres = kernels::batch_gradients_parallel(value_, inputs, n, vgrad);
  stats.value_loss = vres.loss * inv_n;
  value_adam_.step(value_, vres.grads);
  stats.entropy = policy_.entropy();
  return stats;
}

PpoStats PpoTrainer::policy_step(std::span<const PpoSample> batch) {
  return minibatch_step(batch, true);
}

PpoStats PpoTrainer::update(std::span<const PpoSample> batch, Rng& rng, bool train_policy) {
  PpoStats last;
  if (batch.empty()) return last;
  const std::size_t mb = static_cast<std::size_t>(std::max(1, config_.minibatch));
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PpoSample> chunk;
  for (int epoch = 0; epoch < config_.ppo_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
    PpoStats epoch_stats;
    double weight = 0.0;
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      chunk.clear();
      for (std::size_t i = start; i < end; ++i) chunk.push_back(batch[order[i]]);
      const PpoStats s = minibatch_step(chunk, train_policy);
      const double w = static_cast<double>(chunk.size());
      epoch_stats.surrogate += w * s.surrogate;
      epoch_stats.value_loss += w * s.value_loss;
      epoch_stats.dropped += s.dropped;
      weight += w;
    }
    epoch_stats.surrogate /= weight;
    epoch_stats.value_loss /= weight;
    epoch_stats.entropy = policy_.entropy();
    last = epoch_stats;
  }
  return last;
}

Agent::Agent(Variant variant, int state_dim, const HrlConfig& config,
             std::optional<dsrm::Denoiser> denoiser, dsrm::DiffusionSchedule schedule,
             std::uint64_t seed)
    : variant_(variant),
      state_dim_(state_dim),
      config_(config),
      denoiser_(std::move(denoiser)),
      schedule_(std::move(schedule)) {
  config_.variant = variant;
  if (uses_denoiser(variant) && !denoiser_)
    throw ConfigError("hrl.variant", to_string(variant) + " requires a trained denoiser");
  if (denoiser_ && denoiser_->dim() != state_dim)
    throw ShapeError("Agent: denoiser dimension " + std::to_string(denoiser_->dim()) +
                     " does not match state dimension " + std::to_string(state_dim));
  manager_ = ManagerPolicy(state_dim, config_.hidden, nn::Activation::Tanh,
                           config_.init_log_std, mix_seed(seed, 0x3a11a6e7ULL));
  std::vector<int> vsizes{state_dim};
  vsizes.insert(vsizes.end(), config_.hidden.begin(), config_.hidden.end());
  vsizes.push_back(1);
  value_ = nn::Mlp(vsizes, nn::Activation::Tanh, mix_seed(seed, 0x7a1c4eULL));
}

Vec Agent::policy_state(const env::ObservedState& observed, Rng& rng) const {
  if (static_cast<int>(observed.vec.size()) != state_dim_)
    throw ShapeError("Agent: observation dimension mismatch");
  const bool purify = purify_override.value_or(uses_denoiser(variant_));
  if (!purify) return observed.vec;
  if (!denoiser_) throw ConfigError("hrl.variant", "purified state requested without denoiser");
  return dsrm::purify(observed, *denoiser_, schedule_, purify_mode, rng, ancestral_start)
      .vec;
}

ManagerSample Agent::decide(std::span<const double> state, Rng& rng, bool greedy) const {
  if (variant_ == Variant::Flat) {
    ManagerSample s;
    s.action = {config_.flat_omega_acc, config_.flat_omega_fair};
    return s;
  }
  return manager_.act(state, rng, greedy);
}

double Agent::value(std::span<const double> state) const { return value_.forward(state)[0]; }

EpisodeResult run_episode(env::Environment& env, const Agent& agent,
                          std::uint64_t session_seed, RunMode mode, Rng& rng) {
  const bool greedy = mode == RunMode::Eval;
  const int interval = std::max(1, agent.config().manager_interval);
  const auto& catalog = env.catalog();
  if (catalog.dim != agent.state_dim())
    throw ShapeError("run_episode: environment and agent dimensions differ");

  EpisodeResult result;
  ExposureLedger ledger(catalog.n_items);
  env::ObservedState obs = env.reset(session_seed);
  ManagerSample current;
  for (int t = 0; !env.done(); ++t) {
    Transition tr;
    tr.state = agent.policy_state(obs, rng);
    tr.decision = t % interval == 0;
    if (tr.decision) current = agent.decide(tr.state, rng, greedy);
    tr.raw = current.raw;
    tr.action = current.action;
    tr.log_prob = current.log_prob;
    const Vec scores = score_items(tr.state, current.action, catalog);
    tr.slate = select_slate(scores, env.config().slate_size);
    const env::StepResult step = env.step(tr.slate);
    ledger.record(tr.slate);
    tr.env_reward = step.reward;
    tr.shaped_reward = shaped_reward(step.reward, ledger, agent.config().lambda_fair);
    if (mode == RunMode::Train) tr.value = agent.value(tr.state);
    tr.done = step.done;
    obs = step.next;
    result.trajectory.steps.push_back(std::move(tr));
  }
  result.outcome = env.outcome();
  return result;
}

std::uint64_t session_seed(std::uint64_t run_seed, std::uint64_t episode) {
  return (run_seed << 20) + (episode & ((1ULL << 20) - 1));
}

std::vector<TrainLogRow> train_agent(env::Environment& env, Agent& agent,
                                     std::uint64_t run_seed) {
  const HrlConfig& cfg = agent.config();
  PpoTrainer trainer(agent.manager(), agent.value_net(), cfg);
  Rng rng(mix_seed(run_seed, 0x5eedULL));
  std::vector<TrainLogRow> log;
  long steps = 0;
  std::uint64_t episode = 0;
  int update = 0;
  while (steps < cfg.total_steps) {
    std::vector<Transition> buffer;
    int episodes = 0;
    long lens = 0;
    while (static_cast<int>(buffer.size()) < cfg.batch_steps &&
           steps + static_cast<long>(buffer.size()) < cfg.total_steps) {
      EpisodeResult ep = run_episode(env, agent, session_seed(run_seed, episode++),
                                     RunMode::Train, rng);
      lens += ep.outcome.length;
      ++episodes;
      for (auto& tr : ep.trajectory.steps) buffer.push_back(std::move(tr));
    }
    steps += static_cast<long>(buffer.size());

    // Manager-level samples: one per decision, rewards summed over the
    // decision interval.
    std::vector<std::size_t> decisions;
    Vec rewards, values;
    std::vector<bool> dones;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      if (buffer[i].decision) {
        decisions.push_back(i);
        rewards.push_back(0.0);
        values.push_back(buffer[i].value);
        dones.push_back(false);
      }
      rewards.back() += buffer[i].shaped_reward;
      if (buffer[i].done) dones.back() = true;
    }
    const GaeResult gae = compute_gae(rewards, values, dones, 0.0, cfg.gamma, cfg.lam_gae);

    std::vector<PpoSample> samples;
    samples.reserve(decisions.size());
    double omega_acc = 0.0, omega_fair = 0.0;
    for (std::size_t k = 0; k < decisions.size(); ++k) {
      const Transition& tr = buffer[decisions[k]];
      omega_acc += tr.action.omega_acc;
      omega_fair += tr.action.omega_fair;
      samples.push_back({tr.state, tr.raw, tr.log_prob, gae.advantages[k], gae.returns[k]});
    }
    const PpoStats stats = trainer.update(samples, rng, agent.variant() != Variant::Flat);

    TrainLogRow row;
    row.update = update++;
    row.surrogate = stats.surrogate;
    row.value_loss = stats.value_loss;
    row.entropy = stats.entropy;
    row.mean_omega_acc = omega_acc / static_cast<double>(decisions.size());
    row.mean_omega_fair = omega_fair / static_cast<double>(decisions.size());
    row.env_steps = steps;
    row.episodes = episodes;
    row.mean_len = episodes > 0 ? static_cast<double>(lens) / episodes : 0.0;
    log.push_back(row);
  }
  return log;
}

std::vector<env::SessionOutcome> evaluate(env::Environment& env, const Agent& agent,
                                          std::uint64_t run_seed, int episodes) {
  Rng rng(mix_seed(run_seed, 0xe7a1ULL));
  std::vector<env::SessionOutcome> out;
  out.reserve(episodes);
  for (int e = 0; e < episodes; ++e)
    out.push_back(
        run_episode(env, agent, session_seed(run_seed, e), RunMode::Eval, rng).outcome);
  return out;
}

}  // namespace fairrec::hrl
