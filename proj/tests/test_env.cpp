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
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "fairrec/env.hpp"
#include "fairrec/errors.hpp"
#include "fairrec/linalg.hpp"

namespace fairrec::env {
namespace {

EnvConfig small_config() {
  EnvConfig c;
  c.n_items = 60;
  c.seed = 4;
  return c;
}

std::vector<int> first_k(int k, int offset = 0) {
  std::vector<int> s(k);
  std::iota(s.begin(), s.end(), offset);
  return s;
}

TEST(Catalog, GroupsPartitionAndEmbeddingsAreUnit) {
  const auto cat = ItemCatalog::build(small_config());
  EXPECT_EQ(cat.popular_count(), 12);
  EXPECT_EQ(static_cast<int>(cat.group.size()), cat.n_items);
  for (int i = 0; i < cat.n_items; ++i) EXPECT_NEAR(norm(cat.embedding(i)), 1.0, 1e-12);
}

TEST(Environment, ResetIsDeterministic) {
  Environment a(small_config()), b(small_config());
  const auto sa = a.reset(7);
  const auto sb = b.reset(7);
  EXPECT_EQ(sa.vec, sb.vec);
  for (int t = 0; t < 10; ++t) {
    const auto slate = first_k(5, 3 * t);
    const auto ra = a.step(slate);
    const auto rb = b.step(slate);
    EXPECT_EQ(ra.rewards, rb.rewards);
    EXPECT_EQ(ra.next.vec, rb.next.vec);
  }
}

TEST(Environment, ZeroNoiseColdStartIsPrior) {
  auto c = small_config();
  c.noise_scale = 0.0;
  Environment env(c);
  EXPECT_EQ(env.reset(1).vec, env.prior());

  auto c2 = small_config();
  c2.noise_scale = 0.5;
  Environment noisy(c2);
  EXPECT_NE(noisy.reset(1).vec, env.prior());
}

TEST(Environment, ExposureConservation) {
  Environment env(small_config());
  env.reset(3);
  const auto before = env.catalog().exposure;
  env.step(first_k(5));
  std::int64_t added = 0;
  for (int i = 0; i < env.catalog().n_items; ++i) added += env.catalog().exposure[i] - before[i];
  EXPECT_EQ(added, 5);
}

TEST(Environment, RewardsInUnitIntervalAndTruthStationary) {
  Environment env(small_config());
  env.reset(11);
  const Vec truth = env.ground_truth_state();
  EXPECT_NEAR(norm(truth), 1.0, 1e-12);
  while (!env.done()) {
    const auto r = env.step(first_k(5, 10));
    for (double x : r.rewards) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_EQ(env.ground_truth_state(), truth);
  }
}

TEST(Environment, SlateErrors) {
  Environment env(small_config());
  env.reset(2);
  EXPECT_THROW(env.step(std::vector<int>{1, 1, 2, 3, 4}), InvalidActionError);
  EXPECT_THROW(env.step(std::vector<int>{1, 2, 3, 4, 999}), InvalidActionError);
  auto c = small_config();
  c.max_len = 2;
  Environment shortenv(c);
  shortenv.reset(2);
  shortenv.step(first_k(5, 20));
  shortenv.step(first_k(5, 20));
  EXPECT_TRUE(shortenv.done());
  EXPECT_THROW(shortenv.step(first_k(5, 20)), ProtocolError);
}

TEST(Environment, NeverAbandoningRunsFullLength) {
  auto c = small_config();
  c.threshold_a = 1.0;
  Environment env(c);
  env.reset(5);
  while (!env.done()) env.step(first_k(5));
  EXPECT_EQ(env.outcome().length, c.max_len);
  EXPECT_FALSE(env.outcome().terminated_by_abandonment);
}

TEST(ItemReward, ClosedForms) {
  ItemCatalog cat;
  cat.n_items = 2;
  cat.dim = 2;
  cat.embeddings = {1.0, 0.0, 0.0, 1.0};
  cat.exposure = {0, 0};
  const Vec u{1.0, 0.0};
  const double kappa = 4.0;
  EXPECT_NEAR(item_reward(u, cat, 0, 0.0, kappa, 0.0, 1), 1.0 / (1.0 + std::exp(-kappa)), 1e-15);
  EXPECT_NEAR(item_reward(u, cat, 1, 0.0, kappa, 0.0, 1), 0.5, 1e-15);
}

TEST(ItemReward, StrictlyIncreasingInExposure) {
  ItemCatalog cat;
  cat.n_items = 1;
  cat.dim = 2;
  cat.embeddings = {0.6, 0.8};
  const Vec u{0.0, 1.0};
  double prev = -1.0;
  for (std::int64_t e : {0, 1, 10, 100, 999}) {
    cat.exposure = {e};
    const double r = item_reward(u, cat, 0, 0.1, 1.0, 0.0, 1000);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(EncodeObserved, NoiseFreeCases) {
  ItemCatalog cat;
  cat.n_items = 2;
  cat.dim = 2;
  cat.embeddings = {1.0, 0.0, 0.0, 1.0};
  cat.exposure = {5, 5};
  Rng rng(1);
  const Vec prior{0.0, 0.0};
  const std::vector<HistoryEntry> one{{0, 0.7, 0, 0.7}};
  const auto s1 = encode_observed(one, cat, 0.0, 10, prior, rng);
  EXPECT_NEAR(s1.vec[0], 1.0, 1e-15);
  EXPECT_NEAR(s1.vec[1], 0.0, 1e-15);
  const std::vector<HistoryEntry> two{{0, 0.4, 0, 0.4}, {1, 0.4, 1, 0.4}};
  const auto s2 = encode_observed(two, cat, 0.0, 10, prior, rng);
  EXPECT_NEAR(s2.vec[0], 0.5, 1e-15);
  EXPECT_NEAR(s2.vec[1], 0.5, 1e-15);
}

TEST(EncodeObserved, PopularityNoiseHurtsAlignment) {
  // Popular-heavy history: the corrupted state is further from the user's
  // preference than the noise-free one, on average.
  Environment env(small_config());
  env.reset(8);
  const auto& cat = env.catalog();
  std::vector<HistoryEntry> hist;
  for (int i = 0; i < cat.n_items && hist.size() < 10; ++i)
    if (cat.group[i] == Group::Popular) hist.push_back({i, 0.6, i, 0.6});
  const Vec& u = env.ground_truth_state();
  Rng rng(77);
  const Vec clean = encode_observed(hist, cat, 0.0, 10, env.prior(), rng).vec;
  double noisy = 0.0;
  for (int t = 0; t < 1000; ++t)
    noisy += cosine(encode_observed(hist, cat, 0.3, 10, env.prior(), rng).vec, u);
  EXPECT_LT(noisy / 1000.0, cosine(clean, u));
}

TEST(Abandonment, RecurrenceAndBoundaries) {
  auto c = small_config();
  c.threshold_a = 0.5;
  c.decay_a = 0.2;
  const auto cat = ItemCatalog::build(c);
  std::vector<int> pop, tail;
  for (int i = 0; i < cat.n_items; ++i)
    (cat.group[i] == Group::Popular ? pop : tail).push_back(i);
  Rng rng(1);

  std::vector<std::vector<int>> slates;
  double s = 1.0;
  for (int t = 0; t < 5; ++t) {
    slates.push_back({tail[t], tail[t + 5]});
    const auto u = update_abandonment(s, slates, cat, c, rng);
    EXPECT_EQ(u.satisfaction, 1.0);
    EXPECT_FALSE(u.abandoned);
  }

  slates.clear();
  s = 1.0;
  for (int t = 0; t < 5; ++t) {
    slates.push_back({pop[t], pop[t + 5]});
    const auto u = update_abandonment(s, slates, cat, c, rng);
    s = u.satisfaction;
    EXPECT_NEAR(s, 1.0 - 0.2 * (t + 1), 1e-12);
    EXPECT_EQ(u.abandoned, t == 4);
  }
  EXPECT_EQ(s, 0.0);

  const std::vector<std::vector<int>> tail_only{{tail[0]}};
  EXPECT_TRUE(update_abandonment(0.0, tail_only, cat, c, rng).abandoned);
}

TEST(Config, Validation) {
  auto c = small_config();
  c.noise_scale = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.n_items = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.dim = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GroundTruth, NoiseFreeEncodeOfOnPreferenceHistoryAligns) {
  // Slates of the items nearest the user's preference for a whole session.
  auto c = small_config();
  c.n_items = 500;
  c.threshold_a = 1.0;
  Environment env(c);
  double total = 0.0;
  for (int s = 0; s < 100; ++s) {
    env.reset(1000 + s);
    const Vec& u = env.ground_truth_state();
    std::vector<int> ids(c.n_items);
    std::iota(ids.begin(), ids.end(), 0);
    std::partial_sort(ids.begin(), ids.begin() + c.slate_size, ids.end(), [&](int a, int b) {
      return dot(u, env.catalog().embedding(a)) > dot(u, env.catalog().embedding(b));
    });
    ids.resize(c.slate_size);
    for (int t = 0; t < 10 && !env.done(); ++t) env.step(ids);
    total += cosine(env.clean_state(), u);
  }
  EXPECT_GT(total / 100.0, 0.8);
}

}  // namespace
}  // namespace fairrec::env
