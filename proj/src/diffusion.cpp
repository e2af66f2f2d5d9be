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
#include "fairrec/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fairrec/errors.hpp"
#include "fairrec/kernels.hpp"

namespace fairrec::dsrm {

namespace {

void check_step(const DiffusionSchedule& schedule, int k, const char* who) {
  if (k < 1 || k > schedule.steps)
    throw std::out_of_range(std::string(who) + ": step " + std::to_string(k) +
                            " outside [1, " + std::to_string(schedule.steps) + "]");
}

void check_dim(std::size_t a, std::size_t b, const char* who) {
  if (a != b) throw ShapeError(std::string(who) + ": dimension mismatch");
}

}  // namespace

DiffusionSchedule DiffusionSchedule::make(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ConfigError("dsrm.k_steps", "must be >= 1");
  if (!(beta_min > 0.0)) throw ConfigError("dsrm.beta_min", "must be > 0");
  if (!(beta_max < 1.0)) throw ConfigError("dsrm.beta_max", "must be < 1");
  if (!(beta_min <= beta_max)) throw ConfigError("dsrm.beta_min", "must be <= beta_max");

  DiffusionSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  s.sigma.resize(steps);
  for (int i = 0; i < steps; ++i) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    s.beta[i] = beta_min + t * (beta_max - beta_min);
    s.alpha[i] = 1.0 - s.beta[i];
    s.alpha_bar[i] = i == 0 ? s.alpha[i] : s.alpha_bar[i - 1] * s.alpha[i];
    s.sigma[i] = i == 0 ? 0.0
                        : std::sqrt(s.beta[i] * (1.0 - s.alpha_bar[i - 1]) /
                                    (1.0 - s.alpha_bar[i]));
  }
  return s;
}

Vec forward_diffuse(std::span<const double> s0, int k, std::span<const double> eps,
                    const DiffusionSchedule& schedule) {
  check_step(schedule, k, "forward_diffuse");
  check_dim(s0.size(), eps.size(), "forward_diffuse");
  const double a = std::sqrt(schedule.alpha_bar_at(k));
  const double b = std::sqrt(1.0 - schedule.alpha_bar_at(k));
  Vec out(s0.size());
  for (std::size_t i = 0; i < s0.size(); ++i) out[i] = a * s0[i] + b * eps[i];
  return out;
}

Vec forward_step(std::span<const double> prev, int k, std::span<const double> eps,
                 const DiffusionSchedule& schedule) {
  check_step(schedule, k, "forward_step");
  check_dim(prev.size(), eps.size(), "forward_step");
  const double a = std::sqrt(schedule.alpha_at(k));
  const double b = std::sqrt(schedule.beta_at(k));
  Vec out(prev.size());
  for (std::size_t i = 0; i < prev.size(); ++i) out[i] = a * prev[i] + b * eps[i];
  return out;
}

Vec time_embedding(int k, int width) {
  if (width < 0 || width % 2 != 0) throw ShapeError("time_embedding: width must be even");
  Vec out(width);
  const int half = width / 2;
  for (int j = 0; j < half; ++j) {
    const double freq = std::pow(10000.0, -static_cast<double>(j) / std::max(half, 1));
    out[2 * j] = std::sin(k * freq);
    out[2 * j + 1] = std::cos(k * freq);
  }
  return out;
}

Denoiser::Denoiser(int dim, int time_dim, const std::vector<int>& hidden,
                   nn::Activation activation, std::uint64_t seed)
    : dim_(dim), time_dim_(time_dim) {
  std::vector<int> sizes{2 * dim + time_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(dim);
  net_ = nn::Mlp(sizes, activation, seed);
}

Denoiser::Denoiser(int dim, int time_dim, nn::Mlp net)
    : dim_(dim), time_dim_(time_dim), net_(std::move(net)) {
  if (net_.input_size() != 2 * dim + time_dim || net_.output_size() != dim)
    throw ShapeError("Denoiser: network widths do not match dim/time_dim");
}

void Denoiser::build_input(std::span<const double> s_k, int k,
                           std::span<const double> condition, std::span<double> out) const {
  check_dim(s_k.size(), static_cast<std::size_t>(dim_), "Denoiser");
  check_dim(condition.size(), static_cast<std::size_t>(dim_), "Denoiser");
  check_dim(out.size(), static_cast<std::size_t>(input_width()), "Denoiser");
  std::copy(s_k.begin(), s_k.end(), out.begin());
  const Vec t = time_embedding(k, time_dim_);
  std::copy(t.begin(), t.end(), out.begin() + dim_);
  std::copy(condition.begin(), condition.end(), out.begin() + dim_ + time_dim_);
}

Vec Denoiser::predict(std::span<const double> s_k, int k,
                      std::span<const double> condition) const {
  Vec in(input_width());
  build_input(s_k, k, condition, in);
  return net_.forward(in);
}

Vec reverse_step(std::span<const double> s_k, int k, std::span<const double> condition,
                 const NoisePredictor& predictor, const DiffusionSchedule& schedule,
                 std::span<const double> z) {
  check_step(schedule, k, "reverse_step");
  check_dim(s_k.size(), z.size(), "reverse_step");
  const Vec eps_hat = predictor(s_k, k, condition);
  check_dim(eps_hat.size(), s_k.size(), "reverse_step");
  const double alpha = schedule.alpha_at(k);
  const double coef = (1.0 - alpha) / std::sqrt(1.0 - schedule.alpha_bar_at(k));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double sigma = schedule.sigma_at(k);
  Vec out(s_k.size());
  for (std::size_t i = 0; i < s_k.size(); ++i)
    out[i] = inv_sqrt_alpha * (s_k[i] - coef * eps_hat[i]) + sigma * z[i];
  return out;
}

Vec reverse_step(std::span<const double> s_k, int k, std::span<const double> condition,
                 const Denoiser& denoiser, const DiffusionSchedule& schedule,
                 std::span<const double> z) {
  return reverse_step(
      s_k, k, condition,
      [&denoiser](std::span<const double> s, int step, std::span<const double> c) {
        return denoiser.predict(s, step, c);
      },
      schedule, z);
}

PurifiedState purify(const env::ObservedState& observed, const Denoiser& denoiser,
                     const DiffusionSchedule& schedule, PurifyMode mode, Rng& rng,
                     bool ancestral_start) {
  PurifiedState out{observed.vec, observed.step};
  if (schedule.steps == 0) return out;
  const std::size_t d = observed.vec.size();
  check_dim(d, static_cast<std::size_t>(denoiser.dim()), "purify");

  Vec eps;
  if (mode == PurifyMode::Deterministic) {
    Rng local(hash_values(observed.vec));
    eps = local.normal_vec(d);
  } else {
    eps = rng.normal_vec(d);
  }
  Vec s = ancestral_start ? eps : forward_diffuse(observed.vec, schedule.steps, eps, schedule);
  const Vec zero(d, 0.0);
  for (int k = schedule.steps; k >= 1; --k) {
    if (mode == PurifyMode::Stochastic && k > 1) {
      const Vec z = rng.normal_vec(d);
      s = reverse_step(s, k, observed.vec, denoiser, schedule, z);
    } else {
      s = reverse_step(s, k, observed.vec, denoiser, schedule, zero);
    }
  }
  for (double& x : s)
    if (!std::isfinite(x)) x = 0.0;
  out.vec = std::move(s);
  return out;
}

LossResult dsrm_loss(const Denoiser& denoiser, std::span<const TrainingPair> batch,
                     std::span<const int> steps, std::span<const Vec> noise,
                     const DiffusionSchedule& schedule, bool parallel) {
  if (batch.empty()) throw std::invalid_argument("dsrm_loss: empty batch");
  if (steps.size() != batch.size() || noise.size() != batch.size())
    throw ShapeError("dsrm_loss: steps/noise must match batch size");
  const std::size_t n = batch.size();
  const std::size_t width = denoiser.input_width();
  std::vector<double> inputs(n * width);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec s_k = forward_diffuse(batch[i].clean, steps[i], noise[i], schedule);
    denoiser.build_input(s_k, steps[i], batch[i].observed,
                         std::span<double>(inputs).subspan(i * width, width));
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const kernels::OutputGrad grad = [&](std::size_t i, std::span<const double> y,
                                       std::span<double> dy) {
    double l = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double diff = y[j] - noise[i][j];
      l += diff * diff;
      dy[j] = 2.0 * diff * inv_n;
    }
    return l;
  };
  auto res = parallel ? kernels::batch_gradients_parallel(denoiser.net(), inputs, n, grad)
                      : kernels::batch_gradients_serial(denoiser.net(), inputs, n, grad);
  return {res.loss * inv_n, std::move(res.grads)};
}

LossResult dsrm_loss(const Denoiser& denoiser, std::span<const TrainingPair> batch,
                     const DiffusionSchedule& schedule, Rng& rng, bool parallel) {
  std::vector<int> steps(batch.size());
  std::vector<Vec> noise(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    steps[i] = rng.uniform_int(1, schedule.steps);
    noise[i] = rng.normal_vec(denoiser.dim());
  }
  return dsrm_loss(denoiser, batch, steps, noise, schedule, parallel);
}

namespace {

double evaluation_loss(const Denoiser& denoiser, std::span<const TrainingPair> pairs,
                       std::span<const int> steps, std::span<const Vec> noise,
                       const DiffusionSchedule& schedule) {
  double total = 0.0;
  Vec in(denoiser.input_width());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec s_k = forward_diffuse(pairs[i].clean, steps[i], noise[i], schedule);
    denoiser.build_input(s_k, steps[i], pairs[i].observed, in);
    const Vec y = denoiser.net().forward(in);
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double diff = y[j] - noise[i][j];
      total += diff * diff;
    }
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

DsrmTrainResult train_dsrm(Denoiser denoiser, std::span<const TrainingPair> pairs,
                           const DiffusionSchedule& schedule,
                           const DsrmTrainConfig& config) {
  if (static_cast<int>(pairs.size()) < config.min_pairs)
    throw ConfigError("dsrm.min_pairs", "insufficient training data: " +
                                            std::to_string(pairs.size()) + " pairs < " +
                                            std::to_string(config.min_pairs));
  if (pairs.empty()) throw ConfigError("dsrm.min_pairs", "no training pairs");
  if (config.batch < 1) throw ConfigError("dsrm.batch", "must be >= 1");
  if (config.epochs < 0) throw ConfigError("dsrm.epochs", "must be >= 0");
  for (const auto& p : pairs)
    if (static_cast<int>(p.clean.size()) != denoiser.dim() ||
        static_cast<int>(p.observed.size()) != denoiser.dim())
      throw ShapeError("train_dsrm: pair dimension does not match denoiser");

  Rng eval_rng(mix_seed(config.seed, 0xe7a1ULL));
  std::vector<int> eval_steps(pairs.size());
  std::vector<Vec> eval_noise(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    eval_steps[i] = eval_rng.uniform_int(1, schedule.steps);
    eval_noise[i] = eval_rng.normal_vec(denoiser.dim());
  }

  DsrmTrainResult result;
  result.initial_loss = evaluation_loss(denoiser, pairs, eval_steps, eval_noise, schedule);

  nn::Adam adam({.lr = config.lr}, denoiser.net());
  Rng rng(mix_seed(config.seed, 0x7a1eULL));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainingPair> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with our own draws keeps the order identical across
    // standard library implementations.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng.next_u64() % i;
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
      const LossResult lr = dsrm_loss(denoiser, batch, schedule, rng);
      adam.step(denoiser.net(), lr.grads);
    }
    result.loss_curve.push_back(
        evaluation_loss(denoiser, pairs, eval_steps, eval_noise, schedule));
  }
  result.denoiser = std::move(denoiser);
  return result;
}

}  // namespace fairrec::dsrm
