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
//
// Two-level recommender policy. The manager reads the (purified) state and
// emits non-negative weights (omega_acc, omega_fair); the worker turns those
// weights into a slate by scoring every item:
//
//   score(i) = omega_acc * cos(state, e_i) - omega_fair * log(1 + exposure_i)
//
// The worker has no parameters, so PPO only ever touches the manager and the
// value baseline; the two levels cannot share gradients.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairrec/diffusion.hpp"
#include "fairrec/env.hpp"
#include "fairrec/linalg.hpp"
#include "fairrec/nn.hpp"
#include "fairrec/rng.hpp"

namespace fairrec::hrl {

// Non-finite policy output.
class PolicyFault : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ManagerAction {
  double omega_acc = 0.0;
  double omega_fair = 0.0;
};

enum class Variant { DsrmHrl, Flat, HrlRaw };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
bool uses_denoiser(Variant v);

struct ManagerSample {
  ManagerAction action;
  Vec raw;  // pre-softplus point
  double log_prob = 0.0;
};

// log density of softplus(u), u ~ N(mean, exp(log_std)^2), evaluated at the
// pre-squash point `raw`.
double squashed_gaussian_log_prob(std::span<const double> raw, std::span<const double> mean,
                                  std::span<const double> log_std);

class ManagerPolicy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  ManagerPolicy() = default;
  ManagerPolicy(int state_dim, const std::vector<int>& hidden, nn::Activation activation,
                double init_log_std, std::uint64_t seed);

  // Greedy returns softplus(mean).
  ManagerSample act(std::span<const double> state, Rng& rng, bool greedy) const;
  Vec mean(std::span<const double> state) const;
  double log_prob(std::span<const double> state, std::span<const double> raw) const;
  // Differential entropy of the pre-squash Gaussian.
  double entropy() const;
  void clamp_log_std();

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }
  Vec& log_std() { return log_std_; }
  const Vec& log_std() const { return log_std_; }

 private:
  nn::Mlp net_;
  Vec log_std_;
};

// Worker scores for every item (OpenMP kernel).
Vec score_items(std::span<const double> state, const ManagerAction& z,
                const env::ItemCatalog& catalog);

// Top-k by score, ties broken by lower item id.
std::vector<int> select_slate(std::span<const double> scores, int k);

// Exposure counts for the current episode.
class ExposureLedger {
 public:
  explicit ExposureLedger(int n_items = 0) : counts_(n_items, 0) {}
  void record(std::span<const int> slate);
  void reset(int n_items);
  const std::vector<std::int64_t>& counts() const { return counts_; }
  const std::vector<std::vector<int>>& lists() const { return lists_; }
  std::int64_t total() const;

 private:
  std::vector<std::int64_t> counts_;
  std::vector<std::vector<int>> lists_;
};

// r - lambda * gini(episode exposure counts).
double shaped_reward(double reward, const ExposureLedger& ledger, double lambda);

struct GaeResult {
  Vec advantages;
  Vec returns;
};

// Generalised advantage estimation over a flat buffer that may span several
// episodes. `next_value` bootstraps the final step when it is not terminal.
// Advantages are standardised when `normalize` and the buffer has >= 2 steps;
// returns always use the raw advantages.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      const std::vector<bool>& dones, double next_value, double gamma,
                      double lam_gae, bool normalize = true);

// min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)
double clipped_objective(double ratio, double advantage, double clip_eps);

struct HrlConfig {
  double gamma = 0.99;
  double lam_gae = 0.95;
  double clip_eps = 0.2;
  double lambda_fair = 0.5;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  double entropy_coef = 0.01;
  int ppo_epochs = 4;
  int batch_steps = 2048;
  int minibatch = 256;
  int manager_interval = 1;
  int total_steps = 20000;
  std::vector<int> hidden{64, 64};
  double init_log_std = -0.5;
  // Fixed weights used by the FLAT variant.
  double flat_omega_acc = 1.0;
  double flat_omega_fair = 0.005;
  Variant variant = Variant::DsrmHrl;
};

struct PpoSample {
  Vec state;
  Vec raw;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct PpoStats {
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  std::size_t dropped = 0;
};

// Mean clipped surrogate of `policy` on `batch`.
double surrogate_objective(const ManagerPolicy& policy, std::span<const PpoSample> batch,
                           double clip_eps);

class PpoTrainer {
 public:
  PpoTrainer(ManagerPolicy& policy, nn::Mlp& value_net, const HrlConfig& config);

  // Clipped-surrogate epochs over shuffled minibatches, entropy bonus,
  // value regression to returns. `train_policy = false` fits only the value
  // net. Reported losses are from the last epoch.
  PpoStats update(std::span<const PpoSample> batch, Rng& rng, bool train_policy = true);

  // A single gradient step on the whole batch; exposed for tests.
  PpoStats policy_step(std::span<const PpoSample> batch);

 private:
  PpoStats minibatch_step(std::span<const PpoSample> batch, bool train_policy);

  ManagerPolicy& policy_;
  nn::Mlp& value_;
  HrlConfig config_;
  nn::Adam policy_adam_;
  nn::Adam value_adam_;
  int log_std_slot_ = -1;
};

struct Transition {
  Vec state;
  Vec raw;
  ManagerAction action;
  double log_prob = 0.0;
  std::vector<int> slate;
  double env_reward = 0.0;
  double shaped_reward = 0.0;
  double value = 0.0;
  bool done = false;
  bool decision = true;  // manager acted at this step
};

struct Trajectory {
  std::vector<Transition> steps;
};

class Agent {
 public:
  Agent() = default;
  // DSRM variants require a denoiser and schedule; HRL-RAW ignores them.
  Agent(Variant variant, int state_dim, const HrlConfig& config,
        std::optional<dsrm::Denoiser> denoiser, dsrm::DiffusionSchedule schedule,
        std::uint64_t seed);

  Vec policy_state(const env::ObservedState& observed, Rng& rng) const;
  ManagerSample decide(std::span<const double> state, Rng& rng, bool greedy) const;
  double value(std::span<const double> state) const;

  Variant variant() const { return variant_; }
  int state_dim() const { return state_dim_; }
  ManagerPolicy& manager() { return manager_; }
  const ManagerPolicy& manager() const { return manager_; }
  nn::Mlp& value_net() { return value_; }
  const nn::Mlp& value_net() const { return value_; }
  const std::optional<dsrm::Denoiser>& denoiser() const { return denoiser_; }
  const dsrm::DiffusionSchedule& schedule() const { return schedule_; }
  const HrlConfig& config() const { return config_; }
  HrlConfig& config() { return config_; }
  dsrm::PurifyMode purify_mode = dsrm::PurifyMode::Deterministic;
  // Start the reverse chain from pure noise instead of the diffused input.
  bool ancestral_start = false;
  // Overrides the variant's state source (used for raw-vs-purified studies).
  std::optional<bool> purify_override;

 private:
  Variant variant_ = Variant::DsrmHrl;
  int state_dim_ = 0;
  HrlConfig config_;
  ManagerPolicy manager_;
  nn::Mlp value_;
  std::optional<dsrm::Denoiser> denoiser_;
  dsrm::DiffusionSchedule schedule_;
};

enum class RunMode { Train, Eval };

struct EpisodeResult {
  env::SessionOutcome outcome;
  Trajectory trajectory;
};

// Plays one session. Train mode samples the manager, eval mode is greedy.
EpisodeResult run_episode(env::Environment& env, const Agent& agent,
                          std::uint64_t session_seed, RunMode mode, Rng& rng);

// Disjoint per-run session seed ranges: each run seed owns 2^20 sessions.
std::uint64_t session_seed(std::uint64_t run_seed, std::uint64_t episode);
inline constexpr std::uint64_t kEvalSeedOffset = 10'000;

struct TrainLogRow {
  int update = 0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_omega_acc = 0.0;
  double mean_omega_fair = 0.0;
  long env_steps = 0;
  int episodes = 0;
  double mean_len = 0.0;
};

// Stage II: PPO on the manager (value only for FLAT) until
// config.total_steps environment steps have been collected.
std::vector<TrainLogRow> train_agent(env::Environment& env, Agent& agent,
                                     std::uint64_t run_seed);

// Greedy evaluation on `episodes` sessions with seeds from `run_seed`.
std::vector<env::SessionOutcome> evaluate(env::Environment& env, const Agent& agent,
                                          std::uint64_t run_seed, int episodes);

}  // namespace fairrec::hrl
