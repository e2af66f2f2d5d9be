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
// Synthetic interactive recommender. Every user carries a fixed unit-norm
// preference vector (the ground truth), observed states are corrupted by a
// popularity-aligned drift plus isotropic noise, observed rewards are
// inflated by item exposure, and sessions end early when the user is fed
// too many popular items.
#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "fairrec/linalg.hpp"
#include "fairrec/rng.hpp"

namespace fairrec::env {

struct EnvConfig {
  int dim = 16;
  int n_items = 500;
  int slate_size = 5;
  int history_window = 10;
  int max_len = 30;
  double kappa = 4.0;
  double bias_strength = 0.4;
  double noise_scale = 0.3;
  // Std of the additive Gaussian on each observed per-item reward.
  double obs_noise = 0.05;
  double zipf_s = 1.2;
  int window_a = 3;
  double threshold_a = 0.6;
  double decay_a = 0.25;
  double abandon_prob = 0.0;
  // Latent structure: item and user vectors are perturbations of
  // `n_categories` unit centres (orthonormal when n_categories <= dim).
  int n_categories = 8;
  double item_spread = 0.06;
  double user_spread = 0.1;
  // How strongly popularity ranks concentrate in low-numbered categories.
  // 0 makes popularity independent of category.
  double mainstream_skew = 0.0;
  // Popular items lean towards a shared "mainstream" axis, orthogonal to the
  // category centres when there is room. The lean grows linearly from 0 at
  // the least popular Popular item to `popular_tilt` at the head.
  double popular_tilt = 1.0;
  // Std of each user's (signed) taste along the mainstream axis.
  double user_mainstream = 0.0;
  // Pre-existing exposure of the most popular item; the rest follow Zipf.
  double base_exposure = 100000.0;
  std::uint64_t seed = 11;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

enum class Group { Popular, LongTail };

struct ItemCatalog {
  int n_items = 0;
  int dim = 0;
  std::vector<double> embeddings;  // row-major [n_items x dim], unit rows
  std::vector<std::int64_t> exposure;
  std::vector<double> initial_popularity;
  std::vector<Group> group;
  std::vector<int> category;
  std::vector<double> category_centres;  // row-major [n_categories x dim]
  Vec mainstream_axis;

  std::span<const double> embedding(int item) const {
    return {embeddings.data() + static_cast<std::size_t>(item) * dim,
            static_cast<std::size_t>(dim)};
  }
  int popular_count() const;
  std::int64_t max_exposure() const;
  bool valid_item(int item) const { return item >= 0 && item < n_items; }

  static ItemCatalog build(const EnvConfig& config);
};

struct HistoryEntry {
  int item;
  double reward;  // observed, popularity-inflated
  // Counterfactual: the slate item the user would have taken without the
  // exposure bias (same noise draws), and its reward.
  int unbiased_item;
  double unbiased_reward;
};

struct UserProfile {
  Vec latent_pref;
  int category = 0;
  std::deque<HistoryEntry> history;
  double satisfaction = 1.0;
};

struct ObservedState {
  Vec vec;
  int step = 0;
};

struct SessionOutcome {
  int length = 0;
  std::vector<double> rewards;
  std::vector<std::vector<int>> exposure_log;
  bool terminated_by_abandonment = false;
};

struct StepResult {
  std::vector<double> rewards;
  ObservedState next;
  bool done = false;
  // Scalar step reward r_t: mean of the slate rewards.
  double reward = 0.0;
};

struct AbandonmentUpdate {
  double satisfaction;
  bool abandoned;
};

// Weighted mean of the last `window` consumed embeddings, weights (1 + r),
// plus the popularity noise. `bias_free` encodes the counterfactual
// unbiased consumption (item and reward) instead. Empty history falls back
// to `prior`.
ObservedState encode_observed(std::span<const HistoryEntry> history,
                              const ItemCatalog& catalog, double noise_scale,
                              int window, std::span<const double> prior,
                              Rng& rng, bool bias_free = false);

// Popular fraction over the trailing `window_a` slates drives the decay.
AbandonmentUpdate update_abandonment(
    double satisfaction, std::span<const std::vector<int>> recent_slates,
    const ItemCatalog& catalog, const EnvConfig& config, Rng& rng);

// Observed reward for one item; `noise` is the pre-drawn observation noise.
double item_reward(std::span<const double> latent_pref,
                   const ItemCatalog& catalog, int item, double bias_strength,
                   double kappa, double noise, std::int64_t max_exposure);

class Environment {
 public:
  explicit Environment(EnvConfig config);

  // Starts a new session for a fresh user. Item exposures persist across
  // sessions of the same instance.
  ObservedState reset(std::uint64_t seed);
  StepResult step(std::span<const int> slate);

  // Sim-only oracle.
  const Vec& ground_truth_state() const;
  // Noise-free, bias-free encoding of the current history.
  Vec clean_state() const;

  const EnvConfig& config() const { return config_; }
  const ItemCatalog& catalog() const { return catalog_; }
  const UserProfile& user() const { return user_; }
  const SessionOutcome& outcome() const { return outcome_; }
  const Vec& prior() const { return prior_; }
  bool done() const { return done_; }
  bool active() const { return active_; }
  int step_count() const { return outcome_.length; }

 private:
  EnvConfig config_;
  ItemCatalog catalog_;
  Vec prior_;
  UserProfile user_;
  SessionOutcome outcome_;
  Rng rng_{0};
  bool active_ = false;
  bool done_ = false;
};

}  // namespace fairrec::env
