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
#include "fairrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "fairrec/errors.hpp"

namespace fairrec::metrics {

double gini(std::span<const double> counts) {
  const std::size_t n = counts.size();
  if (n == 0) return 0.0;
  std::vector<double> x(counts.begin(), counts.end());
  for (double v : x)
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument("gini: counts must be finite and non-negative");
  const double total = std::accumulate(x.begin(), x.end(), 0.0);
  if (total <= 0.0) return 0.0;
  std::sort(x.begin(), x.end());
  // sum_ij |x_i - x_j| = 2 sum_i (2i - n - 1) x_(i), i 1-based ascending.
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += (2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0) * x[i];
  return acc / (static_cast<double>(n) * total);
}

double gini(std::span<const std::int64_t> counts) {
  std::vector<double> x(counts.begin(), counts.end());
  return gini(std::span<const double>(x));
}

double GroupCoverage::ad() const { return std::abs(f_pop - f_tail); }

GroupCoverage group_coverage(std::span<const std::vector<int>> exposure_log,
                             const env::ItemCatalog& catalog, CoverageMode mode) {
  const int n_pop = catalog.popular_count();
  const int n_tail = catalog.n_items - n_pop;
  if (n_pop == 0 || n_tail == 0)
    throw ConfigError("env.n_items", "both popularity groups must be non-empty");
  GroupCoverage out;
  if (mode == CoverageMode::Coverage) {
    std::unordered_set<int> seen;
    int pop = 0;
    int tail = 0;
    for (const auto& slate : exposure_log)
      for (int item : slate) {
        if (!catalog.valid_item(item)) throw ConsistencyError("group_coverage: unknown item");
        if (!seen.insert(item).second) continue;
        (catalog.group[item] == env::Group::Popular ? pop : tail) += 1;
      }
    out.f_pop = static_cast<double>(pop) / n_pop;
    out.f_tail = static_cast<double>(tail) / n_tail;
  } else {
    long pop = 0;
    long total = 0;
    for (const auto& slate : exposure_log)
      for (int item : slate) {
        if (!catalog.valid_item(item)) throw ConsistencyError("group_coverage: unknown item");
        ++total;
        if (catalog.group[item] == env::Group::Popular) ++pop;
      }
    if (total > 0) {
      out.f_pop = static_cast<double>(pop) / total;
      out.f_tail = static_cast<double>(total - pop) / total;
    }
  }
  return out;
}

double absolute_difference(std::span<const std::vector<int>> exposure_log,
                           const env::ItemCatalog& catalog, CoverageMode mode) {
  if (exposure_log.empty()) throw std::invalid_argument("absolute_difference: empty log");
  return group_coverage(exposure_log, catalog, mode).ad();
}

MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

MetricsReport session_stats(std::span<const env::SessionOutcome> outcomes,
                            const env::ItemCatalog& catalog, CoverageMode mode) {
  if (outcomes.empty()) throw std::invalid_argument("session_stats: no episodes");
  std::vector<double> lens, cums, eachs, ads, fps, fts;
  for (const auto& o : outcomes) {
    lens.push_back(o.length);
    const double cum = std::accumulate(o.rewards.begin(), o.rewards.end(), 0.0);
    cums.push_back(cum);
    if (o.length > 0) eachs.push_back(cum / static_cast<double>(o.rewards.size()));
    const GroupCoverage g = group_coverage(o.exposure_log, catalog, mode);
    fps.push_back(g.f_pop);
    fts.push_back(g.f_tail);
    ads.push_back(g.ad());
  }
  MetricsReport r;
  r.n_episodes = static_cast<int>(outcomes.size());
  const auto len = mean_std(lens);
  const auto cum = mean_std(cums);
  const auto each = mean_std(eachs);
  r.len_mean = len.mean;
  r.len_std = len.std;
  r.r_cum_mean = cum.mean;
  r.r_cum_std = cum.std;
  r.r_each_mean = each.mean;
  r.r_each_std = each.std;
  r.f_pop = mean_std(fps).mean;
  r.f_tail = mean_std(fts).mean;
  r.ad_mean = std::abs(r.f_pop - r.f_tail);
  r.ad_std = mean_std(ads).std;
  return r;
}

double r_squared(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("r_squared: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return (sxy * sxy) / (sxx * syy);
}

}  // namespace fairrec::metrics
