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
// Conditional denoising diffusion over user-state vectors. A noise
// predictor eps(s_k, k, observed) is trained on (clean, observed) pairs and
// then run backwards from a diffused copy of the observation to produce a
// purified state.
//
// Step indices are 1-based throughout: k = 1 .. steps.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fairrec/env.hpp"
#include "fairrec/linalg.hpp"
#include "fairrec/nn.hpp"
#include "fairrec/rng.hpp"

namespace fairrec::dsrm {

struct DiffusionSchedule {
  int steps = 0;
  Vec beta;
  Vec alpha;
  Vec alpha_bar;
  Vec sigma;  // posterior std; sigma(1) == 0

  // Linear beta from beta_min to beta_max. Throws ConfigError on bad ranges.
  static DiffusionSchedule make(int steps, double beta_min, double beta_max);

  double beta_at(int k) const { return beta.at(k - 1); }
  double alpha_at(int k) const { return alpha.at(k - 1); }
  double alpha_bar_at(int k) const { return alpha_bar.at(k - 1); }
  double sigma_at(int k) const { return sigma.at(k - 1); }
};

// Closed-form marginal: sqrt(abar_k) s0 + sqrt(1 - abar_k) eps.
Vec forward_diffuse(std::span<const double> s0, int k, std::span<const double> eps,
                    const DiffusionSchedule& schedule);

// One transition of the forward chain: sqrt(alpha_k) prev + sqrt(beta_k) eps.
Vec forward_step(std::span<const double> prev, int k, std::span<const double> eps,
                 const DiffusionSchedule& schedule);

// Sinusoidal embedding of the step index, `width` must be even.
Vec time_embedding(int k, int width);

class Denoiser {
 public:
  Denoiser() = default;
  // Net maps concat(s_k, time embedding, condition) -> predicted noise.
  Denoiser(int dim, int time_dim, const std::vector<int>& hidden,
           nn::Activation activation, std::uint64_t seed);
  // Wraps an existing network; checks its widths.
  Denoiser(int dim, int time_dim, nn::Mlp net);

  Vec predict(std::span<const double> s_k, int k, std::span<const double> condition) const;
  // Writes the network input row into `out` (size input_width()).
  void build_input(std::span<const double> s_k, int k, std::span<const double> condition,
                   std::span<double> out) const;

  int dim() const { return dim_; }
  int time_dim() const { return time_dim_; }
  int input_width() const { return 2 * dim_ + time_dim_; }
  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  int dim_ = 0;
  int time_dim_ = 0;
  nn::Mlp net_;
};

using NoisePredictor =
    std::function<Vec(std::span<const double>, int, std::span<const double>)>;

// s_{k-1} = (s_k - (1 - alpha_k) / sqrt(1 - abar_k) * eps_hat) / sqrt(alpha_k)
//           + sigma_k z
Vec reverse_step(std::span<const double> s_k, int k, std::span<const double> condition,
                 const NoisePredictor& predictor, const DiffusionSchedule& schedule,
                 std::span<const double> z);
Vec reverse_step(std::span<const double> s_k, int k, std::span<const double> condition,
                 const Denoiser& denoiser, const DiffusionSchedule& schedule,
                 std::span<const double> z);

enum class PurifyMode { Deterministic, Stochastic };

struct PurifiedState {
  Vec vec;
  int source_step = 0;
};

// Deterministic mode draws the start noise from a hash of the observation
// and uses z = 0; stochastic mode takes both from `rng`. With
// `ancestral_start` the chain starts from pure noise instead of a diffused
// copy of the observation. A zero-step schedule returns the input.
PurifiedState purify(const env::ObservedState& observed, const Denoiser& denoiser,
                     const DiffusionSchedule& schedule, PurifyMode mode, Rng& rng,
                     bool ancestral_start = false);

struct TrainingPair {
  Vec clean;
  Vec observed;
  int session = 0;
};

struct LossResult {
  double loss = 0.0;  // batch mean of ||eps - eps_hat||^2
  nn::Gradients grads;
};

// Loss with caller-supplied step indices and noise, one per batch element.
LossResult dsrm_loss(const Denoiser& denoiser, std::span<const TrainingPair> batch,
                     std::span<const int> steps, std::span<const Vec> noise,
                     const DiffusionSchedule& schedule, bool parallel = true);
// Samples k ~ U{1..K} and eps ~ N(0, I) per element from `rng`.
LossResult dsrm_loss(const Denoiser& denoiser, std::span<const TrainingPair> batch,
                     const DiffusionSchedule& schedule, Rng& rng, bool parallel = true);

struct DsrmTrainConfig {
  int epochs = 30;
  int batch = 128;
  double lr = 1e-3;
  int min_pairs = 256;
  std::uint64_t seed = 11;
};

struct DsrmTrainResult {
  Denoiser denoiser;
  double initial_loss = 0.0;
  // Loss after each epoch, evaluated on the training pairs with step indices
  // and noise frozen before training starts.
  std::vector<double> loss_curve;
};

DsrmTrainResult train_dsrm(Denoiser denoiser, std::span<const TrainingPair> pairs,
                           const DiffusionSchedule& schedule,
                           const DsrmTrainConfig& config);

}  // namespace fairrec::dsrm
