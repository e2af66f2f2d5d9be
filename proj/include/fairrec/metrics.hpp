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
#pragma once

#include <span>
#include <string>
#include <vector>

#include "fairrec/env.hpp"

namespace fairrec::metrics {

// Gini coefficient sum_ij |x_i - x_j| / (2 n sum x); 0 for an all-zero or
// empty input. Computed in O(n log n) from the sorted values.
double gini(std::span<const double> counts);
double gini(std::span<const std::int64_t> counts);

enum class CoverageMode {
  // Distinct group items shown in the episode / group size.
  Coverage,
  // Group's share of all recommendation slots in the episode.
  ExposureShare,
};

struct GroupCoverage {
  double f_pop = 0.0;
  double f_tail = 0.0;
  double ad() const;
};

// Per-episode group coverage from the episode's recommendation lists.
GroupCoverage group_coverage(std::span<const std::vector<int>> exposure_log,
                             const env::ItemCatalog& catalog,
                             CoverageMode mode = CoverageMode::Coverage);

// AD of a single episode: |f_pop - f_tail|.
double absolute_difference(std::span<const std::vector<int>> exposure_log,
                           const env::ItemCatalog& catalog,
                           CoverageMode mode = CoverageMode::Coverage);

struct MetricsReport {
  double len_mean = 0.0, len_std = 0.0;
  double r_each_mean = 0.0, r_each_std = 0.0;
  double r_cum_mean = 0.0, r_cum_std = 0.0;
  // ad_mean = |f_pop - f_tail| of the episode-averaged coverages;
  // ad_std is the spread of the per-episode AD values.
  double ad_mean = 0.0, ad_std = 0.0;
  double f_pop = 0.0, f_tail = 0.0;
  int n_episodes = 0;
};

// Population standard deviations throughout. Zero-length episodes count
// towards Len and R_cum but are excluded from R_each.
MetricsReport session_stats(std::span<const env::SessionOutcome> outcomes,
                            const env::ItemCatalog& catalog,
                            CoverageMode mode = CoverageMode::Coverage);

// Mean and population std.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(std::span<const double> xs);

// Ordinary least squares y = a + b x; returns R^2 (0 if x or y is constant).
double r_squared(std::span<const double> x, std::span<const double> y);

}  // namespace fairrec::metrics
