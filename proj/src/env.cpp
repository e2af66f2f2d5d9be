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
#include "fairrec/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fairrec/errors.hpp"

namespace fairrec::env {

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

double exposure_ratio(std::int64_t exposure, std::int64_t max_exposure) {
  if (max_exposure <= 0) return 0.0;
  return std::log1p(static_cast<double>(exposure)) /
         std::log1p(static_cast<double>(max_exposure));
}

}  // namespace

void EnvConfig::validate() const {
  require(dim >= 2, "env.dim", "must be >= 2");
  require(n_items >= 10, "env.n_items", "must be >= 10");
  require(slate_size >= 1 && slate_size <= n_items, "env.slate_size",
          "must be in [1, n_items]");
  require(history_window >= 1, "env.history_window", "must be >= 1");
  require(max_len >= 1, "env.max_len", "must be >= 1");
  require(std::isfinite(kappa) && kappa > 0.0, "env.kappa", "must be > 0");
  require(std::isfinite(bias_strength) && bias_strength >= 0.0,
          "env.bias_strength", "must be >= 0");
  require(std::isfinite(noise_scale) && noise_scale >= 0.0, "env.noise_scale",
          "must be >= 0");
  require(std::isfinite(obs_noise) && obs_noise >= 0.0, "env.obs_noise",
          "must be >= 0");
  require(std::isfinite(zipf_s) && zipf_s > 0.0, "env.zipf_s", "must be > 0");
  require(window_a >= 1, "env.window_a", "must be >= 1");
  require(threshold_a >= 0.0 && threshold_a <= 1.0, "env.threshold_a",
          "must be in [0, 1]");
  require(decay_a >= 0.0 && decay_a <= 1.0, "env.decay_a", "must be in [0, 1]");
  require(abandon_prob >= 0.0 && abandon_prob <= 1.0, "env.abandon_prob",
          "must be in [0, 1]");
  require(n_categories >= 1 && n_categories <= n_items, "env.n_categories",
          "must be in [1, n_items]");
  require(std::isfinite(item_spread) && item_spread >= 0.0, "env.item_spread",
          "must be >= 0");
  require(std::isfinite(user_spread) && user_spread >= 0.0, "env.user_spread",
          "must be >= 0");
  require(std::isfinite(mainstream_skew) && mainstream_skew >= 0.0,
          "env.mainstream_skew", "must be >= 0");
  require(std::isfinite(popular_tilt) && popular_tilt >= 0.0, "env.popular_tilt",
          "must be >= 0");
  require(std::isfinite(user_mainstream) && user_mainstream >= 0.0, "env.user_mainstream",
          "must be >= 0");
  require(std::isfinite(base_exposure) && base_exposure >= 0.0,
          "env.base_exposure", "must be >= 0");
}

int ItemCatalog::popular_count() const {
  return static_cast<int>(
      std::count(group.begin(), group.end(), Group::Popular));
}

std::int64_t ItemCatalog::max_exposure() const {
  return exposure.empty() ? 0 : *std::max_element(exposure.begin(), exposure.end());
}

ItemCatalog ItemCatalog::build(const EnvConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0xca7a1061ULL));
  const int n = config.n_items;
  const int d = config.dim;
  const int n_cat = config.n_categories;

  ItemCatalog cat;
  cat.n_items = n;
  cat.dim = d;

  cat.category_centres.resize(static_cast<std::size_t>(n_cat) * d);
  // Orthonormal centres when they fit (Gram-Schmidt), otherwise just unit.
  for (int c = 0; c < n_cat; ++c) {
    std::span<double> centre(cat.category_centres.data() + c * d, d);
    for (double& x : centre) x = rng.normal();
    if (n_cat <= d) {
      for (int p = 0; p < c; ++p) {
        std::span<const double> prev(cat.category_centres.data() + p * d, d);
        const double proj = dot(centre, prev);
        for (int k = 0; k < d; ++k) centre[k] -= proj * prev[k];
      }
    }
    normalize_in_place(centre);
  }

  Vec mainstream = rng.normal_vec(d);
  if (n_cat < d)
    for (int c = 0; c < n_cat; ++c) {
      std::span<const double> centre(cat.category_centres.data() + c * d, d);
      const double proj = dot(mainstream, centre);
      for (int k = 0; k < d; ++k) mainstream[k] -= proj * centre[k];
    }
  normalize_in_place(mainstream);
  cat.mainstream_axis = mainstream;

  cat.category.resize(n);
  for (int i = 0; i < n; ++i) cat.category[i] = i % n_cat;

  // Popularity rank: a Gaussian draw shifted towards low-numbered
  // ("mainstream") categories, then Zipf over the ranks.
  std::vector<double> key(n);
  for (int i = 0; i < n; ++i) {
    const double tilt =
        n_cat > 1 ? config.mainstream_skew * cat.category[i] / (n_cat - 1) : 0.0;
    key[i] = rng.normal() - tilt;
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] > key[b]; });
  cat.initial_popularity.resize(n);
  for (int r = 0; r < n; ++r)
    cat.initial_popularity[order[r]] = std::pow(r + 1.0, -config.zipf_s);

  cat.exposure.resize(n);
  for (int i = 0; i < n; ++i)
    cat.exposure[i] = static_cast<std::int64_t>(
        std::floor(config.base_exposure * cat.initial_popularity[i]));
  const std::int64_t max_exp = cat.max_exposure();

  // Top ceil(20%) by initial popularity are Popular; ties by lower index.
  std::vector<int> by_pop(n);
  std::iota(by_pop.begin(), by_pop.end(), 0);
  std::stable_sort(by_pop.begin(), by_pop.end(), [&](int a, int b) {
    return cat.initial_popularity[a] > cat.initial_popularity[b];
  });
  const int n_popular = (n + 4) / 5;
  cat.group.assign(n, Group::LongTail);
  for (int r = 0; r < n_popular; ++r) cat.group[by_pop[r]] = Group::Popular;
  // Lean is zero at the least popular Popular item and `popular_tilt` at the
  // top one, linear in log exposure.
  const double rho_edge = exposure_ratio(cat.exposure[by_pop[n_popular - 1]], max_exp);
  cat.embeddings.resize(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const int c = cat.category[i];
    const double rho = exposure_ratio(cat.exposure[i], max_exp);
    const double lean =
        rho_edge < 1.0 ? config.popular_tilt * std::max(0.0, rho - rho_edge) / (1.0 - rho_edge)
                       : 0.0;
    std::span<double> row(cat.embeddings.data() + static_cast<std::size_t>(i) * d, d);
    for (int k = 0; k < d; ++k)
      row[k] = cat.category_centres[c * d + k] + config.item_spread * rng.normal() +
               lean * mainstream[k];
    normalize_in_place(row);
  }
  return cat;
}

double item_reward(std::span<const double> latent_pref,
                   const ItemCatalog& catalog, int item, double bias_strength,
                   double kappa, double noise, std::int64_t max_exposure) {
  const double affinity = logistic(kappa * dot(latent_pref, catalog.embedding(item)));
  const double bias =
      bias_strength * exposure_ratio(catalog.exposure[item], max_exposure);
  return std::clamp(affinity + bias + noise, 0.0, 1.0);
}

ObservedState encode_observed(std::span<const HistoryEntry> history,
                              const ItemCatalog& catalog, double noise_scale,
                              int window, std::span<const double> prior,
                              Rng& rng, bool bias_free) {
  const int d = catalog.dim;
  if (static_cast<int>(prior.size()) != d)
    throw ShapeError("encode_observed: prior dimension mismatch");
  ObservedState out;
  out.vec.assign(d, 0.0);

  const std::size_t start =
      history.size() > static_cast<std::size_t>(window) ? history.size() - window : 0;
  const auto recent = history.subspan(start);
  for (const HistoryEntry& h : recent)
    if (!catalog.valid_item(h.item) || !catalog.valid_item(h.unbiased_item))
      throw ConsistencyError("encode_observed: unknown item id " +
                             std::to_string(h.item));

  if (recent.empty()) {
    std::copy(prior.begin(), prior.end(), out.vec.begin());
  } else {
    double total = 0.0;
    for (const HistoryEntry& h : recent) {
      const double w = 1.0 + (bias_free ? h.unbiased_reward : h.reward);
      const auto e = catalog.embedding(bias_free ? h.unbiased_item : h.item);
      for (int k = 0; k < d; ++k) out.vec[k] += w * e[k];
      total += w;
    }
    for (double& x : out.vec) x /= total;
  }

  if (noise_scale > 0.0) {
    // Popularity-aligned drift: each recent item pushes the state further
    // along its own embedding in proportion to its relative exposure.
    const std::int64_t max_exp = catalog.max_exposure();
    if (!recent.empty()) {
      const double per_item = noise_scale;
      for (const HistoryEntry& h : recent) {
        const double mag =
            per_item * exposure_ratio(catalog.exposure[h.item], max_exp) *
            std::abs(rng.normal());
        const auto e = catalog.embedding(h.item);
        for (int k = 0; k < d; ++k) out.vec[k] += mag * e[k];
      }
    }
    for (int k = 0; k < d; ++k) out.vec[k] += noise_scale * rng.normal();
  }
  return out;
}

AbandonmentUpdate update_abandonment(
    double satisfaction, std::span<const std::vector<int>> recent_slates,
    const ItemCatalog& catalog, const EnvConfig& config, Rng& rng) {
  const std::size_t take =
      std::min<std::size_t>(recent_slates.size(), config.window_a);
  const auto window = recent_slates.subspan(recent_slates.size() - take);
  std::size_t shown = 0;
  std::size_t popular = 0;
  for (const auto& slate : window)
    for (int item : slate) {
      ++shown;
      if (catalog.group[item] == Group::Popular) ++popular;
    }
  const double frac =
      shown == 0 ? 0.0 : static_cast<double>(popular) / static_cast<double>(shown);
  double s = std::clamp(satisfaction, 0.0, 1.0);
  if (frac > config.threshold_a) s -= config.decay_a;
  // Repeated subtraction of decimal decays lands a few ulps above zero.
  if (s <= 1e-9) s = 0.0;
  bool abandoned = s <= 0.0;
  if (!abandoned && config.abandon_prob > 0.0)
    abandoned = rng.uniform() < config.abandon_prob * (1.0 - s);
  return {s, abandoned};
}

Environment::Environment(EnvConfig config)
    : config_(config), catalog_(ItemCatalog::build(config_)) {
  prior_.assign(config_.dim, 0.0);
  for (int i = 0; i < catalog_.n_items; ++i) {
    const auto e = catalog_.embedding(i);
    for (int k = 0; k < config_.dim; ++k) prior_[k] += e[k];
  }
  for (double& x : prior_) x /= catalog_.n_items;
}

ObservedState Environment::reset(std::uint64_t seed) {
  rng_ = Rng(mix_seed(config_.seed, seed));
  const int d = config_.dim;
  user_ = UserProfile{};
  user_.category = rng_.uniform_int(0, config_.n_categories - 1);
  user_.latent_pref.resize(d);
  for (int k = 0; k < d; ++k)
    user_.latent_pref[k] = catalog_.category_centres[user_.category * d + k] +
                           config_.user_spread * rng_.normal();
  if (config_.user_mainstream > 0.0) {
    const double taste = config_.user_mainstream * rng_.normal();
    for (int k = 0; k < d; ++k) user_.latent_pref[k] += taste * catalog_.mainstream_axis[k];
  }
  normalize_in_place(user_.latent_pref);
  user_.satisfaction = 1.0;
  outcome_ = SessionOutcome{};
  active_ = true;
  done_ = false;
  const std::vector<HistoryEntry> empty;
  return encode_observed(empty, catalog_, config_.noise_scale,
                         config_.history_window, prior_, rng_);
}

StepResult Environment::step(std::span<const int> slate) {
  if (!active_) throw ProtocolError("step: reset() has not been called");
  if (done_) throw ProtocolError("step: session already finished");
  if (static_cast<int>(slate.size()) != config_.slate_size)
    throw InvalidActionError("step: slate must hold exactly " +
                             std::to_string(config_.slate_size) + " items");
  for (std::size_t a = 0; a < slate.size(); ++a) {
    if (!catalog_.valid_item(slate[a]))
      throw InvalidActionError("step: unknown item id " + std::to_string(slate[a]));
    for (std::size_t b = 0; b < a; ++b)
      if (slate[a] == slate[b])
        throw InvalidActionError("step: duplicate item id " +
                                 std::to_string(slate[a]));
  }

  const std::int64_t max_exp = catalog_.max_exposure();
  StepResult result;
  result.rewards.resize(slate.size());
  int consumed = -1;
  double best = -1.0;
  int consumed_unbiased = -1;
  double best_unbiased = -1.0;
  for (std::size_t a = 0; a < slate.size(); ++a) {
    const int item = slate[a];
    const double noise = config_.obs_noise > 0.0 ? config_.obs_noise * rng_.normal() : 0.0;
    const double r = item_reward(user_.latent_pref, catalog_, item,
                                 config_.bias_strength, config_.kappa, noise, max_exp);
    const double r0 =
        item_reward(user_.latent_pref, catalog_, item, 0.0, config_.kappa, noise, max_exp);
    result.rewards[a] = r;
    if (r > best || (r == best && item < consumed)) {
      best = r;
      consumed = item;
    }
    if (r0 > best_unbiased || (r0 == best_unbiased && item < consumed_unbiased)) {
      best_unbiased = r0;
      consumed_unbiased = item;
    }
  }
  for (int item : slate) ++catalog_.exposure[item];

  user_.history.push_back({consumed, best, consumed_unbiased, best_unbiased});
  while (static_cast<int>(user_.history.size()) > config_.history_window)
    user_.history.pop_front();

  outcome_.exposure_log.emplace_back(slate.begin(), slate.end());
  result.reward = std::accumulate(result.rewards.begin(), result.rewards.end(), 0.0) /
                  static_cast<double>(slate.size());
  outcome_.rewards.push_back(result.reward);
  outcome_.length += 1;

  const auto upd = update_abandonment(user_.satisfaction, outcome_.exposure_log,
                                      catalog_, config_, rng_);
  user_.satisfaction = upd.satisfaction;
  outcome_.terminated_by_abandonment = upd.abandoned;
  done_ = upd.abandoned || outcome_.length >= config_.max_len;

  const std::vector<HistoryEntry> hist(user_.history.begin(), user_.history.end());
  result.next = encode_observed(hist, catalog_, config_.noise_scale,
                                config_.history_window, prior_, rng_);
  result.next.step = outcome_.length;
  result.done = done_;
  return result;
}

const Vec& Environment::ground_truth_state() const {
  if (!active_) throw ProtocolError("ground_truth_state: no active session");
  return user_.latent_pref;
}

Vec Environment::clean_state() const {
  const std::vector<HistoryEntry> hist(user_.history.begin(), user_.history.end());
  Rng unused(0);
  return encode_observed(hist, catalog_, 0.0, config_.history_window, prior_,
                         unused, /*bias_free=*/true)
      .vec;
}

}  // namespace fairrec::env
