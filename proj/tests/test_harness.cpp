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
#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fairrec/errors.hpp"
#include "fairrec/harness.hpp"

namespace fairrec::harness {
namespace {

namespace fs = std::filesystem;

RunConfig tiny() {
  RunConfig c;
  c.env.seed = 5;
  c.env.n_items = 100;
  c.env.max_len = 10;
  c.dsrm.pairs = 600;
  c.dsrm.epochs = 2;
  c.dsrm.hidden = {16};
  c.hrl.total_steps = 400;
  c.hrl.batch_steps = 200;
  c.hrl.minibatch = 50;
  c.hrl.hidden = {16};
  c.eval.episodes = 8;
  return c;
}

TEST(Pipeline, RawVariantNeedsNoDenoiser) {
  const auto c = tiny();
  const auto st = train_stage_two(c, hrl::Variant::HrlRaw, 5, std::nullopt);
  EXPECT_FALSE(st.agent.denoiser().has_value());
  EXPECT_FALSE(st.log.empty());
  const auto r = evaluate_agent(c, st.agent, 5);
  EXPECT_EQ(r.n_episodes, 8);
}

TEST(Pipeline, DenoiserVariantsRequireStageOne) {
  EXPECT_THROW(make_agent(tiny(), hrl::Variant::DsrmHrl, 5, std::nullopt), ConfigError);
  EXPECT_THROW(make_agent(tiny(), hrl::Variant::Flat, 5, std::nullopt), ConfigError);
}

TEST(Pipeline, DenoiserFrozenDuringStageTwo) {
  const auto c = tiny();
  const auto s1 = train_stage_one(c, 5);
  const auto st = train_stage_two(c, hrl::Variant::DsrmHrl, 5, s1);
  EXPECT_FALSE(st.denoiser_hash_before.empty());
  EXPECT_EQ(st.denoiser_hash_before, st.denoiser_hash_after);
  EXPECT_EQ(st.denoiser_hash_after, io::parameter_hash(s1.denoiser.net()));
}

TEST(Pipeline, AgentCheckpointReloadEvaluatesIdentically) {
  const auto c = tiny();
  const auto s1 = train_stage_one(c, 5);
  const auto st = train_stage_two(c, hrl::Variant::DsrmHrl, 5, s1);
  const auto ckpt = agent_checkpoint(c, st.agent, 5);
  RunConfig loaded_cfg;
  const auto agent = load_agent(io::deserialize(io::serialize(ckpt)), &loaded_cfg);
  // Manager weights are float32 on disk; compare the greedy outcome only.
  EXPECT_EQ(loaded_cfg.to_text(), c.to_text());
  EXPECT_EQ(agent.variant(), hrl::Variant::DsrmHrl);
  const auto a = evaluate_agent(c, st.agent, 5);
  const auto b = evaluate_agent(c, agent, 5);
  EXPECT_NEAR(a.len_mean, b.len_mean, 1e-9);
}

TEST(Pipeline, StageOneIsDeterministic) {
  const auto c = tiny();
  const auto a = train_stage_one(c, 5);
  const auto b = train_stage_one(c, 5);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(io::serialize(io::denoiser_checkpoint(a.denoiser, a.schedule, c.to_text())),
            io::serialize(io::denoiser_checkpoint(b.denoiser, b.schedule, c.to_text())));
}

TEST(Pipeline, PairsComeFromTheirOwnSeedRange) {
  const auto c = tiny();
  const auto pairs = collect_pairs(c.env, 50, 5);
  ASSERT_EQ(pairs.size(), 50u);
  EXPECT_EQ(pairs.front().session, 0);
  EXPECT_EQ(pairs.front().clean.size(), static_cast<std::size_t>(c.env.dim));
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fairrec");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

TEST(Cli, ExitCodesAndDeterministicOutputs) {
  const fs::path dir = fs::temp_directory_path() / "fairrec_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (dir / "c.ini").string();
  io::write_file_atomic(cfg, tiny().to_text());
  const std::string o1 = (dir / "o1").string(), o2 = (dir / "o2").string();

  for (const auto& o : {o1, o2}) {
    ASSERT_EQ(cli({"--config", cfg, "--out", o, "train-dsrm"}), 0);
    ASSERT_EQ(cli({"--config", cfg, "--out", o, "train", "--variant", "DSRM-HRL"}), 0);
  }
  for (const char* f : {"dsrm_seed5.ckpt", "dsrm_loss_seed5.csv", "agent_DSRM-HRL_seed5.ckpt",
                        "train_log_DSRM-HRL_seed5.csv", "eval_DSRM-HRL_seed5.csv"})
    EXPECT_EQ(io::read_file((fs::path(o1) / f).string()), io::read_file((fs::path(o2) / f).string()))
        << f;

  EXPECT_EQ(cli({"--config", cfg, "--out", o1, "eval", "--ckpt",
                 (fs::path(o1) / "agent_DSRM-HRL_seed5.ckpt").string(), "--episodes", "3"}),
            0);
  EXPECT_EQ(cli({"--config", cfg, "--seed", "6", "--out", o1, "train", "--variant", "FLAT"}), 1);
  EXPECT_EQ(cli({"--config", cfg, "--out", o1, "train", "--variant", "nope"}), 1);
  EXPECT_EQ(cli({"--out", o1, "frobnicate"}), 1);

  const std::string bad = (dir / "bad.ini").string();
  io::write_file_atomic(bad, "[env]\nseed = 1\nnoise_scale = -1\n");
  EXPECT_EQ(cli({"--config", bad, "train-dsrm"}), 1);
}

TEST(Cli, SweepWithOneValueWritesNoSummary) {
  const fs::path dir = fs::temp_directory_path() / "fairrec_cli_sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (dir / "c.ini").string();
  io::write_file_atomic(cfg, tiny().to_text());
  ASSERT_EQ(cli({"--config", cfg, "--out", dir.string(), "sweep-steps", "--steps", "3"}), 0);
  const std::string csv = io::read_file((dir / "sweep_steps.csv").string());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_FALSE(fs::exists(dir / "sweep_summary.txt"));
}

}  // namespace
}  // namespace fairrec::harness
