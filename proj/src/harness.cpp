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
#include "fairrec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "fairrec/errors.hpp"

namespace fairrec::harness {

namespace {

std::vector<int> random_slate(int n_items, int k, Rng& rng) {
  // Partial Fisher-Yates on our own draws.
  std::vector<int> ids(n_items);
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n_items - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

void round_to_float(nn::Mlp& net) {
  for (auto& L : net.layers()) {
    for (double& w : L.weight) w = static_cast<float>(w);
    for (double& b : L.bias) b = static_cast<float>(b);
  }
}

dsrm::PurifyMode purify_mode(const DsrmConfig& c) {
  return c.purify_mode == "stochastic" ? dsrm::PurifyMode::Stochastic
                                       : dsrm::PurifyMode::Deterministic;
}

}  // namespace

std::vector<dsrm::TrainingPair> collect_pairs(const env::EnvConfig& config, int n_pairs,
                                              std::uint64_t run_seed) {
  env::Environment env(config);
  Rng rng(mix_seed(run_seed, 0xc011ec7ULL));
  std::vector<dsrm::TrainingPair> pairs;
  pairs.reserve(n_pairs);
  for (int session = 0; static_cast<int>(pairs.size()) < n_pairs; ++session) {
    env::ObservedState obs =
        env.reset(hrl::session_seed(run_seed + kPairSeedOffset, session));
    while (!env.done() && static_cast<int>(pairs.size()) < n_pairs) {
      pairs.push_back({env.clean_state(), obs.vec, session});
      const auto slate = random_slate(config.n_items, config.slate_size, rng);
      obs = env.step(slate).next;
    }
  }
  return pairs;
}

dsrm::DiffusionSchedule make_schedule(const DsrmConfig& c) {
  return dsrm::DiffusionSchedule::make(c.k_steps, c.beta_min, c.beta_max);
}

StageOne train_stage_one(const RunConfig& config, std::uint64_t run_seed) {
  return train_stage_one(config, run_seed,
                         collect_pairs(config.env, config.dsrm.pairs, run_seed));
}

StageOne train_stage_one(const RunConfig& config, std::uint64_t run_seed,
                         const std::vector<dsrm::TrainingPair>& pairs) {
  const auto& c = config.dsrm;
  StageOne out;
  out.schedule = make_schedule(c);
  dsrm::Denoiser init(config.env.dim, c.time_dim, c.hidden, nn::parse_activation(c.activation),
                      mix_seed(run_seed, 0xd5e0ULL));
  dsrm::DsrmTrainConfig tc;
  tc.epochs = c.epochs;
  tc.batch = c.batch;
  tc.lr = c.lr;
  tc.min_pairs = c.min_pairs;
  tc.seed = mix_seed(run_seed, 0x57a6e1ULL);
  auto trained = dsrm::train_dsrm(std::move(init), pairs, out.schedule, tc);
  out.denoiser = std::move(trained.denoiser);
  // Checkpoints hold float32; keep the in-memory copy identical to a reload.
  round_to_float(out.denoiser.net());
  out.initial_loss = trained.initial_loss;
  out.loss_curve = std::move(trained.loss_curve);
  return out;
}

DenoiseCheck denoising_efficacy(const env::EnvConfig& config, const dsrm::Denoiser& denoiser,
                                const dsrm::DiffusionSchedule& schedule, int sessions,
                                std::uint64_t run_seed, dsrm::PurifyMode mode) {
  env::Environment env(config);
  Rng rng(mix_seed(run_seed, 0x4e1dULL));
  double raw = 0.0, pur = 0.0;
  int n = 0;
  for (int s = 0; s < sessions; ++s) {
    env::ObservedState obs = env.reset(hrl::session_seed(run_seed + kHeldOutSeedOffset, s));
    while (!env.done()) {
      const Vec& truth = env.ground_truth_state();
      const Vec clean = dsrm::purify(obs, denoiser, schedule, mode, rng).vec;
      raw += cosine(obs.vec, truth);
      pur += cosine(clean, truth);
      ++n;
      obs = env.step(random_slate(config.n_items, config.slate_size, rng)).next;
    }
  }
  DenoiseCheck out;
  out.states = n;
  if (n > 0) {
    out.cos_observed = raw / n;
    out.cos_purified = pur / n;
  }
  return out;
}

Scatter popularity_reward_scatter(const env::EnvConfig& config, int steps,
                                  std::uint64_t run_seed) {
  env::Environment env(config);
  Rng rng(mix_seed(run_seed, 0x5ca7ULL));
  std::vector<double> sum(config.n_items, 0.0);
  std::vector<int> count(config.n_items, 0);
  int done_steps = 0;
  for (int session = 0; done_steps < steps; ++session) {
    env.reset(hrl::session_seed(run_seed + kMotivateSeedOffset, session));
    while (!env.done() && done_steps < steps) {
      const auto slate = random_slate(config.n_items, config.slate_size, rng);
      const auto result = env.step(slate);
      for (std::size_t a = 0; a < slate.size(); ++a) {
        sum[slate[a]] += result.rewards[a];
        ++count[slate[a]];
      }
      ++done_steps;
    }
  }
  Scatter out;
  for (int i = 0; i < config.n_items; ++i) {
    if (count[i] == 0) continue;
    out.items.push_back(i);
    out.log_exposure.push_back(std::log1p(static_cast<double>(env.catalog().exposure[i])));
    out.mean_reward.push_back(sum[i] / count[i]);
  }
  out.r_squared = metrics::r_squared(out.log_exposure, out.mean_reward);
  return out;
}

hrl::Agent make_agent(const RunConfig& config, hrl::Variant variant, std::uint64_t run_seed,
                      const std::optional<StageOne>& stage_one) {
  std::optional<dsrm::Denoiser> den;
  dsrm::DiffusionSchedule sched;
  if (stage_one) {
    den = stage_one->denoiser;
    sched = stage_one->schedule;
  }
  if (hrl::uses_denoiser(variant) && !den)
    throw ConfigError("hrl.variant", hrl::to_string(variant) +
                                         " needs a trained denoiser; run train-dsrm first");
  hrl::Agent agent(variant, config.env.dim, config.hrl, std::move(den), std::move(sched),
                   mix_seed(run_seed, 0xa6e27ULL));
  agent.purify_mode = purify_mode(config.dsrm);
  agent.ancestral_start = config.dsrm.ancestral_start;
  return agent;
}

metrics::CoverageMode coverage_mode(const EvalConfig& c) {
  return c.coverage == "share" ? metrics::CoverageMode::ExposureShare
                               : metrics::CoverageMode::Coverage;
}

metrics::MetricsReport evaluate_agent(const RunConfig& config, const hrl::Agent& agent,
                                      std::uint64_t run_seed) {
  env::Environment env(config.env);
  const auto outcomes =
      hrl::evaluate(env, agent, run_seed + hrl::kEvalSeedOffset, config.eval.episodes);
  return metrics::session_stats(outcomes, env.catalog(), coverage_mode(config.eval));
}

StageTwo train_stage_two(const RunConfig& config, hrl::Variant variant,
                         std::uint64_t run_seed, const std::optional<StageOne>& stage_one) {
  StageTwo out{make_agent(config, variant, run_seed, stage_one), {}, {}, {}};
  if (out.agent.denoiser())
    out.denoiser_hash_before = io::parameter_hash(out.agent.denoiser()->net());
  env::Environment env(config.env);
  out.log = hrl::train_agent(env, out.agent, run_seed);
  if (out.agent.denoiser()) {
    out.denoiser_hash_after = io::parameter_hash(out.agent.denoiser()->net());
    if (out.denoiser_hash_after != out.denoiser_hash_before)
      throw ConsistencyError("denoiser parameters changed during policy training");
  }
  return out;
}

PurifyComparison compare_raw_purified(const RunConfig& config, std::uint64_t run_seed,
                                      const StageOne& stage_one) {
  hrl::Agent agent = make_agent(config, hrl::Variant::Flat, run_seed, stage_one);
  PurifyComparison out;
  agent.purify_override = false;
  out.raw = evaluate_agent(config, agent, run_seed);
  agent.purify_override = true;
  out.purified = evaluate_agent(config, agent, run_seed);
  return out;
}

EmbeddingDump embedding_dump(const env::EnvConfig& config, const StageOne& stage_one,
                             int sessions, std::uint64_t run_seed, dsrm::PurifyMode mode) {
  env::Environment env(config);
  const auto& cat = env.catalog();
  std::vector<int> order(cat.n_items);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return cat.initial_popularity[a] > cat.initial_popularity[b];
  });
  std::vector<int> decile(cat.n_items);
  for (int r = 0; r < cat.n_items; ++r) decile[order[r]] = r * 10 / cat.n_items;

  auto label = [&](const Vec& v) {
    int best = 0;
    double best_cos = -2.0;
    for (int i = 0; i < cat.n_items; ++i) {
      const double c = cosine(v, cat.embedding(i));
      if (c > best_cos) {
        best_cos = c;
        best = i;
      }
    }
    return io::EmbeddingRow{v, decile[best], cat.category[best]};
  };

  Rng rng(mix_seed(run_seed, 0xe3bdULL));
  EmbeddingDump out;
  for (int s = 0; s < sessions; ++s) {
    env::ObservedState obs = env.reset(hrl::session_seed(run_seed + kMotivateSeedOffset, s));
    while (!env.done()) {
      out.raw.push_back(label(obs.vec));
      out.purified.push_back(
          label(dsrm::purify(obs, stage_one.denoiser, stage_one.schedule, mode, rng).vec));
      obs = env.step(random_slate(config.n_items, config.slate_size, rng)).next;
    }
  }
  return out;
}

std::vector<ExperimentPlan::Cell> ExperimentPlan::enumerate() const {
  std::vector<Cell> cells;
  for (auto v : variants)
    for (auto s : seeds)
      for (int m : max_lens) cells.push_back({v, s, m});
  return cells;
}

io::Checkpoint agent_checkpoint(const RunConfig& config, const hrl::Agent& agent,
                                std::uint64_t run_seed) {
  io::Checkpoint c;
  if (agent.denoiser()) {
    c = io::denoiser_checkpoint(*agent.denoiser(), agent.schedule(), config.to_text());
    c.meta["denoiser_hash"] = io::parameter_hash(agent.denoiser()->net());
  } else {
    c.config_text = config.to_text();
  }
  c.meta["kind"] = "agent";
  c.meta["variant"] = hrl::to_string(agent.variant());
  c.meta["seed"] = std::to_string(run_seed);
  c.meta["state_dim"] = std::to_string(agent.state_dim());
  io::add_mlp(c, "manager", agent.manager().net());
  io::add_mlp(c, "value", agent.value_net());
  const auto& ls = agent.manager().log_std();
  c.tensors.push_back({"manager.log_std", {static_cast<std::uint32_t>(ls.size())},
                       std::vector<float>(ls.begin(), ls.end())});
  return c;
}

hrl::Agent load_agent(const io::Checkpoint& ckpt, RunConfig* config_out) {
  if (ckpt.meta_at("kind") != "agent") throw ParseError("checkpoint does not hold an agent");
  const RunConfig config = RunConfig::parse(ckpt.config_text);
  const hrl::Variant variant = hrl::parse_variant(ckpt.meta_at("variant"));
  const std::uint64_t seed = std::stoull(ckpt.meta_at("seed"));
  const int dim = std::stoi(ckpt.meta_at("state_dim"));
  if (dim != config.env.dim) throw ShapeError("agent checkpoint state_dim differs from its config");
  std::optional<StageOne> s1;
  if (ckpt.meta.count("dim")) {
    auto loaded = io::load_denoiser(ckpt);
    s1 = StageOne{std::move(loaded.denoiser), std::move(loaded.schedule), 0.0, {}};
  }
  hrl::Agent agent = make_agent(config, variant, seed, s1);
  io::read_mlp(ckpt, "manager", agent.manager().net());
  io::read_mlp(ckpt, "value", agent.value_net());
  const io::Tensor& ls = ckpt.tensor("manager.log_std");
  if (ls.values.size() != agent.manager().log_std().size())
    throw ShapeError("checkpoint manager.log_std has the wrong size");
  agent.manager().log_std().assign(ls.values.begin(), ls.values.end());
  if (config_out) *config_out = config;
  return agent;
}

}  // namespace fairrec::harness
