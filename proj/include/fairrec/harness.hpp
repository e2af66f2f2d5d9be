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
// Experiment pipeline: Stage I (denoiser on random-policy pairs), Stage II
// (PPO with the denoiser frozen), evaluation, sweeps and the motivation
// analyses. The run seed is `env.seed`; `--seed` overrides it.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairrec/config.hpp"
#include "fairrec/diffusion.hpp"
#include "fairrec/hrl.hpp"
#include "fairrec/metrics.hpp"
#include "fairrec/persistence.hpp"

namespace fairrec::harness {

// Session seeds for Stage-I collection and the held-out denoising check live
// in their own ranges so they never overlap Stage II or evaluation.
inline constexpr std::uint64_t kPairSeedOffset = 20'000;
inline constexpr std::uint64_t kHeldOutSeedOffset = 30'000;
inline constexpr std::uint64_t kMotivateSeedOffset = 40'000;

// Uniform-random slates; one (clean, observed) pair per visited state.
std::vector<dsrm::TrainingPair> collect_pairs(const env::EnvConfig& config, int n_pairs,
                                              std::uint64_t run_seed);

struct StageOne {
  dsrm::Denoiser denoiser;
  dsrm::DiffusionSchedule schedule;
  double initial_loss = 0.0;
  std::vector<double> loss_curve;
};

dsrm::DiffusionSchedule make_schedule(const DsrmConfig& config);
StageOne train_stage_one(const RunConfig& config, std::uint64_t run_seed);
StageOne train_stage_one(const RunConfig& config, std::uint64_t run_seed,
                         const std::vector<dsrm::TrainingPair>& pairs);

struct DenoiseCheck {
  double cos_observed = 0.0;
  double cos_purified = 0.0;
  int states = 0;
};

// Random-policy held-out sessions; mean cosine to the user's true
// preference for the raw and the purified observation of every state.
DenoiseCheck denoising_efficacy(const env::EnvConfig& config, const dsrm::Denoiser& denoiser,
                                const dsrm::DiffusionSchedule& schedule, int sessions,
                                std::uint64_t run_seed,
                                dsrm::PurifyMode mode = dsrm::PurifyMode::Deterministic);

struct Scatter {
  std::vector<int> items;
  std::vector<double> log_exposure;
  std::vector<double> mean_reward;
  double r_squared = 0.0;
};

// Random policy for `steps` env steps; per-item mean observed reward against
// log(1 + final exposure), over items shown at least once.
Scatter popularity_reward_scatter(const env::EnvConfig& config, int steps,
                                  std::uint64_t run_seed);

hrl::Agent make_agent(const RunConfig& config, hrl::Variant variant, std::uint64_t run_seed,
                      const std::optional<StageOne>& stage_one);

metrics::CoverageMode coverage_mode(const EvalConfig& config);

// Greedy evaluation on a fresh environment instance.
metrics::MetricsReport evaluate_agent(const RunConfig& config, const hrl::Agent& agent,
                                      std::uint64_t run_seed);

struct StageTwo {
  hrl::Agent agent;
  std::vector<hrl::TrainLogRow> log;
  std::string denoiser_hash_before;
  std::string denoiser_hash_after;
};

StageTwo train_stage_two(const RunConfig& config, hrl::Variant variant,
                         std::uint64_t run_seed, const std::optional<StageOne>& stage_one);

struct PurifyComparison {
  metrics::MetricsReport raw;
  metrics::MetricsReport purified;
};

// The fixed FLAT policy evaluated on raw then on purified states.
PurifyComparison compare_raw_purified(const RunConfig& config, std::uint64_t run_seed,
                                      const StageOne& stage_one);

struct EmbeddingDump {
  std::vector<io::EmbeddingRow> raw;
  std::vector<io::EmbeddingRow> purified;
};

// Raw and purified states from random-policy sessions. Each row is labelled
// with the popularity decile (0 = head) and category of the catalog item
// nearest to that state.
EmbeddingDump embedding_dump(const env::EnvConfig& config, const StageOne& stage_one,
                             int sessions, std::uint64_t run_seed,
                             dsrm::PurifyMode mode = dsrm::PurifyMode::Deterministic);

// Agent checkpoints carry the manager, value net and, if present, the
// denoiser, plus enough metadata to rebuild the agent.
io::Checkpoint agent_checkpoint(const RunConfig& config, const hrl::Agent& agent,
                                std::uint64_t run_seed);
hrl::Agent load_agent(const io::Checkpoint& ckpt, RunConfig* config_out = nullptr);

// Variants x seeds x max_len, enumerated variant-major, then seed, then
// max_len.
struct ExperimentPlan {
  std::vector<hrl::Variant> variants{hrl::Variant::DsrmHrl, hrl::Variant::HrlRaw,
                                     hrl::Variant::Flat};
  std::vector<std::uint64_t> seeds{11, 15, 19};
  std::vector<int> max_lens{30, 50};

  struct Cell {
    hrl::Variant variant;
    std::uint64_t seed;
    int max_len;
    bool operator==(const Cell&) const = default;
  };
  std::vector<Cell> enumerate() const;
};

// Full CLI. Returns the process exit code: 0 success, 1 validation error,
// 2 runtime fault.
int run_cli(int argc, char** argv);

}  // namespace fairrec::harness
