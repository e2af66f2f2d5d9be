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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fairrec/config.hpp"
#include "fairrec/errors.hpp"
#include "fairrec/harness.hpp"
#include "fairrec/persistence.hpp"

namespace fairrec {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fairrec_tests";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Config, SeedOnlyGivesDefaults) {
  const RunConfig c = RunConfig::parse("[env]\nseed = 15\n");
  RunConfig d;
  d.env.seed = 15;
  EXPECT_EQ(c.to_text(), d.to_text());
}

TEST(Config, RoundTripsThroughText) {
  RunConfig c;
  c.env.seed = 19;
  c.env.max_len = 50;
  c.env.noise_scale = 0.123456789012345;
  c.dsrm.hidden = {32, 16};
  c.hrl.variant = hrl::Variant::HrlRaw;
  c.eval.coverage = "share";
  const RunConfig back = RunConfig::parse(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.env.noise_scale, c.env.noise_scale);
  EXPECT_EQ(back.env.max_len, 50);
}

TEST(Config, Errors) {
  EXPECT_THROW(RunConfig::parse("[env]\nnoise_scale = 0.1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[env]\nseed = 1\nnoise_scale = -0.5\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[env]\nseed = 1\nbogus = 2\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[nope]\nx = 1\n[env]\nseed=1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[env]\nseed = 1\nseed = 2\n"), ParseError);
  EXPECT_THROW(RunConfig::parse("seed = 1\n"), ParseError);
  EXPECT_THROW(RunConfig::parse("[env\nseed = 1\n"), ParseError);
  EXPECT_THROW(RunConfig::parse("[env]\nseed = abc\n"), ConfigError);
  try {
    RunConfig::parse("[env]\nseed = 1\n[dsrm]\nk_steps = 0\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "dsrm.k_steps");
  }
}

TEST(Config, CommentsAndWhitespace) {
  const RunConfig c =
      RunConfig::parse("# top\n[env]\n  seed = 3   # trailing\n\n[hrl]\nvariant = FLAT\n");
  EXPECT_EQ(c.env.seed, 3u);
  EXPECT_EQ(c.hrl.variant, hrl::Variant::Flat);
}

io::Checkpoint sample_checkpoint() {
  io::Checkpoint c;
  c.config_text = "[env]\nseed = 1\n";
  c.meta["kind"] = "test";
  c.meta["note"] = "a b";
  c.tensors.push_back({"w", {2, 3}, {1.f, 2.f, 3.f, 4.f, 5.f, -6.5f}});
  c.tensors.push_back({"b", {3}, {0.f, 1e-7f, 3.25f}});
  return c;
}

TEST(Checkpoint, SerializeRoundTrip) {
  const auto c = sample_checkpoint();
  const auto bytes = io::serialize(c);
  const auto back = io::deserialize(bytes);
  EXPECT_EQ(back.config_text, c.config_text);
  EXPECT_EQ(back.meta, c.meta);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.tensors[0].shape, c.tensors[0].shape);
  EXPECT_EQ(back.tensors[1].values, c.tensors[1].values);
  EXPECT_EQ(io::serialize(back), bytes);
}

TEST(Checkpoint, TruncationAndCorruptionAreParseErrors) {
  const auto bytes = io::serialize(sample_checkpoint());
  for (std::size_t n = 0; n < bytes.size(); n += 7) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + n);
    EXPECT_THROW(io::deserialize(cut), ParseError) << "length " << n;
  }
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(io::deserialize(bad), ParseError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(io::deserialize(extra), ParseError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto p1 = scratch("a.ckpt").string();
  const auto p2 = scratch("b.ckpt").string();
  io::save_checkpoint(p1, sample_checkpoint());
  io::save_checkpoint(p2, io::load_checkpoint(p1));
  EXPECT_EQ(io::read_file(p1), io::read_file(p2));
  EXPECT_THROW(io::load_checkpoint(scratch("missing.ckpt").string()), IoError);
}

TEST(Checkpoint, DenoiserRoundTripWithinFloatEpsilon) {
  const auto sched = dsrm::DiffusionSchedule::make(20, 1e-4, 0.02);
  dsrm::Denoiser den(6, 4, {12, 12}, nn::Activation::Tanh, 3);
  const auto ckpt = io::denoiser_checkpoint(den, sched, "");
  const auto loaded = io::load_denoiser(io::deserialize(io::serialize(ckpt)));
  const auto a = den.net().flat_parameters();
  const auto b = loaded.denoiser.net().flat_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a[i], b[i], 1.2e-7 * std::max(1.0, std::abs(a[i])));
  EXPECT_EQ(loaded.schedule.alpha_bar, sched.alpha_bar);
}

TEST(Checkpoint, ShapeMismatchRejected) {
  dsrm::Denoiser den(6, 4, {12}, nn::Activation::Tanh, 3);
  io::Checkpoint c;
  io::add_mlp(c, "net", den.net());
  nn::Mlp other({16, 10, 6}, nn::Activation::Tanh, 1);
  EXPECT_THROW(io::read_mlp(c, "net", other), ShapeError);
}

TEST(ResultsCsv, RoundTripAndHeaderOnce) {
  const auto path = scratch("results.csv").string();
  fs::remove(path);
  metrics::MetricsReport m;
  m.len_mean = 27.5;
  m.ad_mean = 0.0123;
  m.f_pop = 0.5;
  m.n_episodes = 200;
  const std::vector<io::ResultRow> rows{{"DSRM-HRL", 11, 30, m}, {"FLAT", 15, 50, m}};
  io::append_results(path, rows);
  io::append_results(path, std::span(rows).first(1));
  const auto back = io::read_results(path);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].variant, "FLAT");
  EXPECT_EQ(back[1].max_len, 50);
  EXPECT_DOUBLE_EQ(back[0].report.len_mean, 27.5);
  EXPECT_DOUBLE_EQ(back[2].report.ad_mean, 0.0123);
  const std::string text = io::read_file(path);
  EXPECT_EQ(text.find(io::results_header()), 0u);
  EXPECT_EQ(text.find(io::results_header(), 1), std::string::npos);
}

TEST(PairsCsv, RoundTripExact) {
  const auto path = scratch("pairs.csv").string();
  Rng rng(4);
  std::vector<dsrm::TrainingPair> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back({rng.normal_vec(5), rng.normal_vec(5), i / 3});
  io::write_pairs(path, pairs);
  const auto back = io::read_pairs(path);
  ASSERT_EQ(back.size(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(back[i].clean, pairs[i].clean);
    EXPECT_EQ(back[i].observed, pairs[i].observed);
    EXPECT_EQ(back[i].session, pairs[i].session);
  }
}

TEST(ExperimentPlan, VariantMajorOrder) {
  harness::ExperimentPlan plan;
  plan.variants = {hrl::Variant::DsrmHrl, hrl::Variant::Flat};
  plan.seeds = {11, 15};
  plan.max_lens = {30, 50};
  const auto cells = plan.enumerate();
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells[0].variant, hrl::Variant::DsrmHrl);
  EXPECT_EQ(cells[1].max_len, 50);
  EXPECT_EQ(cells[2].seed, 15u);
  EXPECT_EQ(cells[4].variant, hrl::Variant::Flat);
  EXPECT_EQ(cells, plan.enumerate());
}

}  // namespace
}  // namespace fairrec
