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
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fairrec/errors.hpp"
#include "fairrec/metrics.hpp"
#include "fairrec/rng.hpp"

namespace fairrec {
namespace {

// Pairwise double loop, written out independently of the sorted formula.
double gini_brute(const std::vector<double>& x) {
  double total = 0.0;
  for (double v : x) total += v;
  if (total <= 0.0) return 0.0;
  double acc = 0.0;
  for (double a : x)
    for (double b : x) acc += std::abs(a - b);
  return acc / (2.0 * static_cast<double>(x.size()) * total);
}

env::ItemCatalog tiny_catalog(int n_pop, int n_tail) {
  env::ItemCatalog c;
  c.n_items = n_pop + n_tail;
  c.dim = 2;
  c.group.assign(n_pop, env::Group::Popular);
  c.group.resize(c.n_items, env::Group::LongTail);
  c.exposure.assign(c.n_items, 0);
  return c;
}

TEST(Gini, HandCases) {
  EXPECT_DOUBLE_EQ(metrics::gini(std::vector<double>{1, 1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(metrics::gini(std::vector<double>{0, 0, 0, 4}), 0.75);
  EXPECT_DOUBLE_EQ(metrics::gini(std::vector<double>{1, 3}), 0.25);
  EXPECT_DOUBLE_EQ(metrics::gini(std::vector<double>{0, 0, 0}), 0.0);
}

TEST(Gini, MatchesBruteForceOnRandomVectors) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(1, 200);
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform() < 0.2 ? 0.0 : std::floor(rng.uniform() * 50.0);
    EXPECT_NEAR(metrics::gini(x), gini_brute(x), 1e-12) << "trial " << trial;
  }
}

TEST(Gini, ScaleAndPermutationInvariant) {
  Rng rng(5);
  std::vector<double> x(37);
  for (double& v : x) v = rng.uniform() * 10.0;
  const double g = metrics::gini(x);
  std::vector<double> y = x;
  for (double& v : y) v *= 3.5;
  EXPECT_NEAR(metrics::gini(y), g, 1e-12);
  std::reverse(y.begin(), y.end());
  EXPECT_NEAR(metrics::gini(y), g, 1e-12);
}

TEST(Gini, IntegerOverloadAgrees) {
  const std::vector<std::int64_t> c{0, 2, 2, 9};
  EXPECT_DOUBLE_EQ(metrics::gini(c), gini_brute({0, 2, 2, 9}));
}

TEST(AbsoluteDifference, HandCases) {
  const auto cat = tiny_catalog(2, 8);
  // One popular and two tail items: |1/2 - 2/8|.
  const std::vector<std::vector<int>> log{{0, 2}, {3, 0}};
  EXPECT_DOUBLE_EQ(metrics::absolute_difference(log, cat), 0.25);

  std::vector<std::vector<int>> all{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
  EXPECT_DOUBLE_EQ(metrics::absolute_difference(all, cat), 0.0);

  const std::vector<std::vector<int>> pop_only{{0, 1}, {1, 0}};
  EXPECT_DOUBLE_EQ(metrics::absolute_difference(pop_only, cat), 1.0);
}

TEST(AbsoluteDifference, ExposureShareMode) {
  const auto cat = tiny_catalog(2, 8);
  // 3 of 4 slots popular.
  const std::vector<std::vector<int>> log{{0, 1}, {0, 5}};
  const auto g = metrics::group_coverage(log, cat, metrics::CoverageMode::ExposureShare);
  EXPECT_DOUBLE_EQ(g.f_pop, 0.75);
  EXPECT_DOUBLE_EQ(g.f_tail, 0.25);
}

TEST(AbsoluteDifference, BoundedInUnitInterval) {
  const auto cat = tiny_catalog(3, 17);
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::vector<int>> log(rng.uniform_int(1, 6));
    for (auto& s : log)
      for (int k = 0; k < 3; ++k) s.push_back(rng.uniform_int(0, 19));
    const double ad = metrics::absolute_difference(log, cat);
    EXPECT_GE(ad, 0.0);
    EXPECT_LE(ad, 1.0);
  }
}

TEST(AbsoluteDifference, EmptyGroupRejected) {
  const auto cat = tiny_catalog(0, 5);
  const std::vector<std::vector<int>> log{{1}};
  EXPECT_THROW(metrics::absolute_difference(log, cat), ConfigError);
}

env::SessionOutcome outcome(std::vector<double> rewards) {
  env::SessionOutcome o;
  o.length = static_cast<int>(rewards.size());
  o.rewards = std::move(rewards);
  for (int i = 0; i < o.length; ++i) o.exposure_log.push_back({i % 10});
  return o;
}

TEST(SessionStats, HandArithmetic) {
  const auto cat = tiny_catalog(2, 8);
  const std::vector<env::SessionOutcome> one{outcome({1, 1})};
  const auto r = metrics::session_stats(one, cat);
  EXPECT_DOUBLE_EQ(r.len_mean, 2.0);
  EXPECT_DOUBLE_EQ(r.r_cum_mean, 2.0);
  EXPECT_DOUBLE_EQ(r.r_each_mean, 1.0);

  const std::vector<env::SessionOutcome> two{outcome({1, 1}), outcome({2, 2})};
  const auto r2 = metrics::session_stats(two, cat);
  EXPECT_DOUBLE_EQ(r2.r_cum_mean, 3.0);
  EXPECT_DOUBLE_EQ(r2.r_cum_std, 1.0);
  EXPECT_EQ(r2.n_episodes, 2);
}

TEST(SessionStats, ZeroLengthEpisodes) {
  const auto cat = tiny_catalog(2, 8);
  const std::vector<env::SessionOutcome> eps{outcome({}), outcome({0.5, 0.5})};
  const auto r = metrics::session_stats(eps, cat);
  EXPECT_DOUBLE_EQ(r.len_mean, 1.0);
  EXPECT_DOUBLE_EQ(r.r_each_mean, 0.5);
}

TEST(SessionStats, CumulativeIsNotLenTimesEach) {
  // Unequal lengths and rewards: mean(R_cum) != mean(Len) * mean(R_each).
  const auto cat = tiny_catalog(2, 8);
  const std::vector<env::SessionOutcome> eps{outcome({1.0}), outcome({0.0, 0.0, 0.0})};
  const auto r = metrics::session_stats(eps, cat);
  EXPECT_DOUBLE_EQ(r.r_cum_mean, 0.5);
  EXPECT_DOUBLE_EQ(r.len_mean * r.r_each_mean, 1.0);
}

TEST(SessionStats, EmptyListRejected) {
  const auto cat = tiny_catalog(2, 8);
  EXPECT_ANY_THROW(metrics::session_stats({}, cat));
}

TEST(RSquared, PerfectLineAndConstant) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_NEAR(metrics::r_squared(x, std::vector<double>{3, 5, 7, 9}), 1.0, 1e-12);
  const auto ms = metrics::mean_std(std::vector<double>{2, 4});
  EXPECT_DOUBLE_EQ(ms.mean, 3.0);
  EXPECT_DOUBLE_EQ(ms.std, 1.0);
}

}  // namespace
}  // namespace fairrec
