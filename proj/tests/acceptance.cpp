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
// Acceptance run: one PASS/FAIL line per criterion on stdout, also written
// to acceptance_report.txt in the working directory.
// Exit status is 0 unless --strict is given and something failed.
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fairrec/harness.hpp"

using namespace fairrec;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

int failures = 0;
std::string report_text;

void report(int id, bool ok, double secs, double limit, const std::string& detail) {
  const bool in_time = limit <= 0.0 || secs < limit;
  const bool pass = ok && in_time;
  if (!pass) ++failures;
  const std::string line =
      fmt::format("CRITERION {:>2} {} {} ({:.1f} s{})\n", id, pass ? "PASS" : "FAIL", detail, secs,
                  limit > 0.0 ? fmt::format(", limit {:.0f} s", limit) : "");
  fmt::print("{}", line);
  std::fflush(stdout);
  report_text += line;
}

// ---- 1: gradients -------------------------------------------------------

void gradients() {
  const auto t0 = Clock::now();
  const RunConfig c;
  const int d = c.env.dim;
  const std::vector<std::vector<int>> archs{
      [&] {
        std::vector<int> s{2 * d + c.dsrm.time_dim};
        s.insert(s.end(), c.dsrm.hidden.begin(), c.dsrm.hidden.end());
        s.push_back(d);
        return s;
      }(),
      [&] {
        std::vector<int> s{d};
        s.insert(s.end(), c.hrl.hidden.begin(), c.hrl.hidden.end());
        s.push_back(2);
        return s;
      }(),
      [&] {
        std::vector<int> s{d};
        s.insert(s.end(), c.hrl.hidden.begin(), c.hrl.hidden.end());
        s.push_back(1);
        return s;
      }(),
  };
  double worst = 0.0;
  for (const auto& sizes : archs)
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      nn::Mlp net(sizes, nn::parse_activation(c.dsrm.activation), seed);
      Rng rng(seed * 31 + 7);
      const Vec x = rng.normal_vec(sizes.front());
      const auto r = nn::gradient_check(net, nn::squared_error_loss(rng.normal_vec(sizes.back())), x);
      worst = std::max({worst, r.max_rel_error, r.max_input_rel_error});
    }
  report(1, worst < 1e-4, since(t0), 30.0,
         fmt::format("gradient check: max relative error {:.2e} over 3 nets x 10 seeds", worst));
}

// ---- 2: diffusion identities ---------------------------------------------

void diffusion() {
  const auto t0 = Clock::now();
  const RunConfig c;
  const auto s = harness::make_schedule(c.dsrm);
  bool exact = s.sigma_at(1) == 0.0 && s.beta_at(1) == c.dsrm.beta_min &&
               s.beta_at(s.steps) == c.dsrm.beta_max;
  double prod = 1.0;
  for (int k = 1; k <= s.steps; ++k) {
    prod *= 1.0 - s.beta_at(k);
    exact = exact && s.alpha_at(k) == 1.0 - s.beta_at(k) && s.alpha_bar_at(k) == prod;
  }

  // Closed-form marginal vs the iterated one-step kernel.
  const int k = s.steps;
  const int n = 10000;
  const Vec s0{0.6, -0.4, 0.2, 0.0};
  Rng rng(2);
  Vec sum(s0.size(), 0.0), sq(s0.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    Vec x = s0;
    for (int j = 1; j <= k; ++j) x = dsrm::forward_step(x, j, rng.normal_vec(s0.size()), s);
    for (std::size_t m = 0; m < s0.size(); ++m) {
      sum[m] += x[m];
      sq[m] += x[m] * x[m];
    }
  }
  const double abar = s.alpha_bar_at(k);
  double worst_z = 0.0;
  for (std::size_t m = 0; m < s0.size(); ++m) {
    const double mean = sum[m] / n;
    const double var = sq[m] / n - mean * mean;
    worst_z = std::max(worst_z, std::abs(mean - std::sqrt(abar) * s0[m]) / std::sqrt((1 - abar) / n));
    worst_z = std::max(worst_z, std::abs(var - (1 - abar)) / ((1 - abar) * std::sqrt(2.0 / (n - 1))));
  }

  // One reverse step with the true noise recovers the start.
  double inv = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vec a = rng.normal_vec(c.env.dim);
    const Vec eps = rng.normal_vec(c.env.dim);
    const Vec x1 = dsrm::forward_diffuse(a, 1, eps, s);
    const dsrm::NoisePredictor oracle = [&](std::span<const double>, int,
                                            std::span<const double>) { return eps; };
    const Vec back = dsrm::reverse_step(x1, 1, a, oracle, s, Vec(c.env.dim, 0.0));
    for (int m = 0; m < c.env.dim; ++m) inv = std::max(inv, std::abs(back[m] - a[m]));
  }
  report(2, exact && worst_z < 4.0 && inv < 1e-10, since(t0), 60.0,
         fmt::format("schedule exact={}, marginal max |z|={:.2f} (<4), inversion err {:.1e}",
                     exact ? "yes" : "no", worst_z, inv));
}

// ---- 3: metric oracles ---------------------------------------------------

void metric_oracles() {
  const auto t0 = Clock::now();
  Rng rng(3);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = rng.uniform_int(1, 200);
    std::vector<double> x(n);
    for (double& v : x) v = std::floor(rng.uniform() * 20.0);
    double total = 0.0, acc = 0.0;
    for (double a : x) total += a;
    for (double a : x)
      for (double b : x) acc += std::abs(a - b);
    const double brute = total > 0.0 ? acc / (2.0 * n * total) : 0.0;
    worst = std::max(worst, std::abs(metrics::gini(x) - brute));
  }
  env::ItemCatalog cat;
  cat.n_items = 10;
  cat.group.assign(2, env::Group::Popular);
  cat.group.resize(10, env::Group::LongTail);
  const std::vector<std::vector<int>> mixed{{0, 2}, {3, 0}}, all{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}},
      pop{{0, 1}};
  const bool ad_ok = metrics::absolute_difference(mixed, cat) == 0.25 &&
                     metrics::absolute_difference(all, cat) == 0.0 &&
                     metrics::absolute_difference(pop, cat) == 1.0;
  const bool hand = metrics::gini(std::vector<double>{0, 0, 0, 4}) == 0.75 &&
                    metrics::gini(std::vector<double>{1, 3}) == 0.25 &&
                    metrics::gini(std::vector<double>{1, 1, 1, 1}) == 0.0;
  report(3, worst <= 1e-12 && ad_ok && hand, since(t0), 10.0,
         fmt::format("gini vs double loop max diff {:.1e}, AD hand cases {}, gini hand cases {}",
                     worst, ad_ok ? "ok" : "wrong", hand ? "ok" : "wrong"));
}

// ---- 4: feedback loop ----------------------------------------------------

void feedback_loop() {
  const auto t0 = Clock::now();
  const RunConfig c;
  const auto biased = harness::popularity_reward_scatter(c.env, 10000, c.env.seed);
  env::EnvConfig control = c.env;
  control.bias_strength = 0.0;
  const auto flat = harness::popularity_reward_scatter(control, 10000, c.env.seed);
  report(4, biased.r_squared > 0.5 && flat.r_squared < 0.1, since(t0), 60.0,
         fmt::format("R^2 biased {:.3f} (>0.5), control {:.3f} (<0.1)", biased.r_squared,
                     flat.r_squared));
}

// ---- shared Stage I per seed ---------------------------------------------

const std::vector<std::uint64_t> kSeeds{11, 15, 19};

struct SeedRun {
  harness::StageOne stage_one;
  double seconds = 0.0;
};

std::map<std::uint64_t, SeedRun>& stage_ones() {
  static std::map<std::uint64_t, SeedRun> cache;
  return cache;
}

RunConfig seeded(std::uint64_t seed) {
  RunConfig c;
  c.env.seed = seed;
  return c;
}

const SeedRun& stage_one(std::uint64_t seed) {
  auto& cache = stage_ones();
  auto it = cache.find(seed);
  if (it == cache.end()) {
    const auto t0 = Clock::now();
    auto s1 = harness::train_stage_one(seeded(seed), seed);
    it = cache.emplace(seed, SeedRun{std::move(s1), since(t0)}).first;
  }
  return it->second;
}

double stage_one_seconds() {
  double s = 0.0;
  for (auto& [seed, run] : stage_ones()) s += run.seconds;
  return s;
}

// ---- 5: denoising efficacy -----------------------------------------------

void denoising() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail = "cosine gain per seed:";
  for (auto seed : kSeeds) {
    const auto& s1 = stage_one(seed).stage_one;
    const auto dc = harness::denoising_efficacy(seeded(seed).env, s1.denoiser, s1.schedule, 200, seed);
    const double gain = dc.cos_purified - dc.cos_observed;
    ok = ok && gain >= 0.05;
    detail += fmt::format(" {}:{:.3f}", seed, gain);
  }
  report(5, ok, since(t0), 300.0, detail + " (each >=0.05)");
}

// ---- 6: purification gain, fixed policy -----------------------------------

void purification() {
  auto t0 = Clock::now();
  int wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = stage_one(seed);
    const auto pc = harness::compare_raw_purified(seeded(seed), seed, run.stage_one);
    const bool win = pc.purified.len_mean > pc.raw.len_mean && pc.purified.ad_mean < pc.raw.ad_mean;
    wins += win;
    detail += fmt::format(" {}: Len {:.2f}->{:.2f} AD {:.4f}->{:.4f}{};", seed, pc.raw.len_mean,
                          pc.purified.len_mean, pc.raw.ad_mean, pc.purified.ad_mean,
                          win ? "" : " (no)");
  }
  // Stage I cost counts towards this criterion as well.
  const double secs = since(t0) + stage_one_seconds();
  report(6, wins >= 2, secs, 300.0,
         fmt::format("raw->purified FLAT, {}/3 seeds improve both:{}", wins, detail));
}

// ---- 7 + 10: ablation and budget ------------------------------------------

void ablation_and_budget() {
  const auto t0 = Clock::now();
  const std::vector<hrl::Variant> variants{hrl::Variant::DsrmHrl, hrl::Variant::HrlRaw,
                                           hrl::Variant::Flat};
  std::map<hrl::Variant, double> len, ad;
  double pipeline_secs = 0.0;
  RunConfig budget_cfg;
  for (auto seed : kSeeds) {
    const RunConfig c = seeded(seed);
    const auto& run = stage_one(seed);
    for (auto v : variants) {
      const auto t = Clock::now();
      const auto st = harness::train_stage_two(c, v, seed, run.stage_one);
      const auto r = harness::evaluate_agent(c, st.agent, seed);
      if (seed == kSeeds.front() && v == hrl::Variant::DsrmHrl) {
        pipeline_secs = run.seconds + since(t);
        budget_cfg = c;
      }
      len[v] += r.len_mean / kSeeds.size();
      ad[v] += r.ad_mean / kSeeds.size();
    }
  }
  const auto D = hrl::Variant::DsrmHrl, R = hrl::Variant::HrlRaw, F = hrl::Variant::Flat;
  const bool ok = len[D] >= len[R] && len[D] >= len[F] && ad[D] <= ad[R];
  report(7, ok, since(t0) + stage_one_seconds(), 900.0,
         fmt::format("mean Len D/R/F {:.3f}/{:.3f}/{:.3f}, mean AD D/R {:.4f}/{:.4f}", len[D],
                     len[R], len[F], ad[D], ad[R]));
  const bool defaults = budget_cfg.hrl.total_steps == 20000 && budget_cfg.env.n_items == 500;
  report(10, defaults, pipeline_secs, 600.0,
         fmt::format("default DSRM-HRL pipeline, {} env steps, {} items", budget_cfg.hrl.total_steps,
                     budget_cfg.env.n_items));
}

// ---- 8: steps sweep -------------------------------------------------------

void steps_sweep() {
  const auto t0 = Clock::now();
  const std::vector<int> ks{5, 20, 200};
  std::vector<double> lens;
  const RunConfig base;
  for (int k : ks) {
    RunConfig c = base;
    c.dsrm.k_steps = k;
    const auto s1 = harness::train_stage_one(c, c.env.seed);
    const auto st = harness::train_stage_two(c, hrl::Variant::DsrmHrl, c.env.seed, s1);
    lens.push_back(harness::evaluate_agent(c, st.agent, c.env.seed).len_mean);
  }
  report(8, lens[1] >= lens[0] && lens[1] >= lens[2], since(t0), 1200.0,
         fmt::format("Len at K=5/20/200: {:.3f}/{:.3f}/{:.3f}", lens[0], lens[1], lens[2]));
}

// ---- 9: determinism -------------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fairrec");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return harness::run_cli(static_cast<int>(argv.size()), argv.data());
}

void determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "fairrec_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);
  RunConfig c;
  c.dsrm.pairs = 1500;
  c.dsrm.epochs = 5;
  c.hrl.total_steps = 3000;
  c.hrl.batch_steps = 1000;
  c.eval.episodes = 20;
  const std::string cfg = (root / "run.ini").string();
  io::write_file_atomic(cfg, c.to_text());

  bool ran = true;
  for (const char* name : {"a", "b"}) {
    const std::string out = (root / name).string();
    const std::vector<std::vector<std::string>> cmds{
        {"train-dsrm", "--check"},
        {"train", "--variant", "DSRM-HRL"},
        {"train", "--variant", "HRL-RAW"},
        {"eval", "--ckpt", out + "/agent_DSRM-HRL_seed11.ckpt"},
        {"motivate", "--steps", "3000", "--sessions", "5"},
        {"sweep-steps", "--steps", "2,4,8"},
        {"ablate", "--variants", "HRL-RAW", "--seeds", "11,15", "--max-len", "30"},
    };
    for (const auto& cmd : cmds) {
      std::vector<std::string> args{"--config", cfg, "--out", out};
      args.insert(args.end(), cmd.begin(), cmd.end());
      ran = ran && cli(args) == 0;
    }
  }
  int files = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    const fs::path other = root / "b" / entry.path().filename();
    if (fs::exists(other) && io::read_file(entry.path().string()) == io::read_file(other.string()))
      ++same;
  }
  report(9, ran && files > 0 && same == files, since(t0), 0.0,
         fmt::format("7 commands run twice, {}/{} output files byte-identical", same, files));
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--strict") == 0) strict = true;
  try {
    gradients();
    diffusion();
    metric_oracles();
    feedback_loop();
    denoising();
    purification();
    ablation_and_budget();
    steps_sweep();
    determinism();
  } catch (const std::exception& e) {
    fmt::print("acceptance aborted: {}\n", e.what());
    return 2;
  }
  report_text += fmt::format("{} criteria failed\n", failures);
  fmt::print("{} criteria failed\n", failures);
  io::write_file_atomic("acceptance_report.txt", report_text);
  return strict && failures > 0 ? 1 : 0;
}
