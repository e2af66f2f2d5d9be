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
// Subcommands: train-dsrm, train, eval, sweep-steps, motivate, ablate.
// Everything is written under --out; progress goes to stderr.
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fairrec/errors.hpp"
#include "fairrec/harness.hpp"

namespace fairrec::harness {

namespace {

namespace fs = std::filesystem;

template <typename... Args>
void log(fmt::format_string<Args...> f, Args&&... args) {
  fmt::print(stderr, "[fairrec] {}\n", fmt::format(f, std::forward<Args>(args)...));
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

RunConfig load_config(const Globals& g) {
  RunConfig c;
  if (!g.config_path.empty()) c = RunConfig::load(g.config_path);
  if (g.seed) c.env.seed = *g.seed;
  c.validate();
  return c;
}

std::string out_path(const Globals& g, const std::string& name) {
  return (fs::path(g.out) / name).string();
}

std::string dsrm_path(const Globals& g, std::uint64_t seed) {
  return out_path(g, fmt::format("dsrm_seed{}.ckpt", seed));
}

void log_seed_ranges(std::uint64_t seed, long train_episodes, int eval_episodes) {
  const auto t0 = hrl::session_seed(seed, 0);
  const auto t1 = hrl::session_seed(seed, train_episodes > 0 ? train_episodes - 1 : 0);
  const auto e0 = hrl::session_seed(seed + hrl::kEvalSeedOffset, 0);
  const auto e1 = hrl::session_seed(seed + hrl::kEvalSeedOffset, eval_episodes - 1);
  const bool disjoint = t1 < e0 || e1 < t0;
  log("train sessions [{}, {}], eval sessions [{}, {}], disjoint={}", t0, t1, e0, e1, disjoint);
  if (!disjoint) throw ConsistencyError("train and eval session seeds overlap");
}

StageOne stage_one_from_file(const std::string& path) {
  auto loaded = io::load_denoiser(io::load_checkpoint(path));
  return StageOne{std::move(loaded.denoiser), std::move(loaded.schedule), 0.0, {}};
}

// Stage I from --dsrm, else from the default path if present, else trained
// in-process.
std::optional<StageOne> resolve_stage_one(const RunConfig& config, const Globals& g,
                                          const std::string& explicit_path, bool required) {
  if (!explicit_path.empty()) return stage_one_from_file(explicit_path);
  const std::string def = dsrm_path(g, config.env.seed);
  if (fs::exists(def)) {
    log("using denoiser {}", def);
    return stage_one_from_file(def);
  }
  if (!required) return std::nullopt;
  log("no denoiser at {}; training Stage I in-process", def);
  return train_stage_one(config, config.env.seed);
}

int cmd_train_dsrm(const Globals& g, std::optional<int> epochs, bool check) {
  RunConfig config = load_config(g);
  if (epochs) {
    config.dsrm.epochs = *epochs;
    config.validate();
  }
  const auto seed = config.env.seed;
  io::ensure_dir(g.out);
  log("stage I: {} pairs, K={}, {} epochs, seed {}", config.dsrm.pairs, config.dsrm.k_steps,
      config.dsrm.epochs, seed);
  StageOne s1 = train_stage_one(config, seed);
  log("loss {:.5f} -> {:.5f}", s1.initial_loss,
      s1.loss_curve.empty() ? s1.initial_loss : s1.loss_curve.back());
  io::save_checkpoint(dsrm_path(g, seed),
                      io::denoiser_checkpoint(s1.denoiser, s1.schedule, config.to_text()));
  io::write_loss_curve(out_path(g, fmt::format("dsrm_loss_seed{}.csv", seed)), s1.loss_curve);
  if (check) {
    const auto dc = denoising_efficacy(config.env, s1.denoiser, s1.schedule, 200, seed);
    log("held-out cosine observed {:.4f} purified {:.4f}", dc.cos_observed, dc.cos_purified);
    io::write_file_atomic(out_path(g, fmt::format("dsrm_check_seed{}.csv", seed)),
                          fmt::format("cos_observed,cos_purified,states\n{:.6g},{:.6g},{}\n",
                                      dc.cos_observed, dc.cos_purified, dc.states));
  }
  return 0;
}

int cmd_train(const Globals& g, const std::string& variant_name, const std::string& dsrm) {
  RunConfig config = load_config(g);
  const hrl::Variant variant = hrl::parse_variant(variant_name);
  config.hrl.variant = variant;
  const auto seed = config.env.seed;
  std::optional<StageOne> s1;
  if (hrl::uses_denoiser(variant)) {
    const std::string path = dsrm.empty() ? dsrm_path(g, seed) : dsrm;
    if (!fs::exists(path))
      throw ConfigError("dsrm", fmt::format("{} needs a denoiser checkpoint; {} not found",
                                            variant_name, path));
    s1 = stage_one_from_file(path);
  }
  io::ensure_dir(g.out);
  const std::string tag = fmt::format("{}_seed{}", hrl::to_string(variant), seed);
  log("stage II: {} for {} env steps", tag, config.hrl.total_steps);
  StageTwo st = train_stage_two(config, variant, seed, s1);
  if (s1) log("denoiser hash {} unchanged", st.denoiser_hash_after);
  const long episodes = st.log.empty() ? 0 : st.log.back().episodes;
  log_seed_ranges(seed, episodes, config.eval.episodes);
  io::write_train_log(out_path(g, "train_log_" + tag + ".csv"), st.log);
  io::save_checkpoint(out_path(g, "agent_" + tag + ".ckpt"), agent_checkpoint(config, st.agent, seed));
  const auto report = evaluate_agent(config, st.agent, seed);
  log("eval Len {:.3f} AD {:.4f}", report.len_mean, report.ad_mean);
  const std::vector<io::ResultRow> rows{{hrl::to_string(variant), seed, config.env.max_len, report}};
  const std::string path = out_path(g, "eval_" + tag + ".csv");
  fs::remove(path);
  io::append_results(path, rows);
  return 0;
}

int cmd_eval(const Globals& g, const std::string& ckpt_path, std::optional<int> episodes) {
  RunConfig config;
  const hrl::Agent agent = load_agent(io::load_checkpoint(ckpt_path), &config);
  std::uint64_t seed = std::stoull(io::load_checkpoint(ckpt_path).meta_at("seed"));
  if (g.seed) seed = *g.seed;
  if (episodes) config.eval.episodes = *episodes;
  config.validate();
  io::ensure_dir(g.out);
  log("evaluating {} on {} episodes, seed {}", hrl::to_string(agent.variant()),
      config.eval.episodes, seed);
  const auto report = evaluate_agent(config, agent, seed);
  log("Len {:.3f} AD {:.4f}", report.len_mean, report.ad_mean);
  const std::vector<io::ResultRow> rows{{hrl::to_string(agent.variant()), seed,
                                         config.env.max_len, report}};
  const std::string path =
      out_path(g, fmt::format("eval_{}_seed{}.csv", hrl::to_string(agent.variant()), seed));
  fs::remove(path);
  io::append_results(path, rows);
  return 0;
}

int cmd_sweep_steps(const Globals& g, const std::vector<int>& steps,
                    const std::string& variant_name) {
  const RunConfig base = load_config(g);
  const hrl::Variant variant = hrl::parse_variant(variant_name);
  const auto seed = base.env.seed;
  io::ensure_dir(g.out);
  std::string csv = "k_steps," + io::results_header() + "\n";
  std::vector<double> lens;
  for (int k : steps) {
    RunConfig c = base;
    c.dsrm.k_steps = k;
    c.validate();
    log("K={}: stage I", k);
    const StageOne s1 = train_stage_one(c, seed);
    log("K={}: stage II ({})", k, variant_name);
    const StageTwo st = train_stage_two(c, variant, seed, s1);
    const auto report = evaluate_agent(c, st.agent, seed);
    log("K={}: Len {:.3f} AD {:.4f}", k, report.len_mean, report.ad_mean);
    lens.push_back(report.len_mean);
    csv += fmt::format("{},{}\n", k,
                       io::format_result_row({hrl::to_string(variant), seed, c.env.max_len, report}));
  }
  io::write_file_atomic(out_path(g, "sweep_steps.csv"), csv);
  if (steps.size() >= 3) {
    const std::size_t mid = steps.size() / 2;
    const bool peak = lens[mid] >= lens.front() && lens[mid] >= lens.back();
    std::string summary = fmt::format("middle_k={}\nmiddle_len={:.6g}\n", steps[mid], lens[mid]);
    summary += fmt::format("endpoint_len={:.6g},{:.6g}\n", lens.front(), lens.back());
    summary += fmt::format("middle_ge_endpoints={}\n", peak ? "yes" : "no");
    io::write_file_atomic(out_path(g, "sweep_summary.txt"), summary);
    log("middle K={} Len {:.3f} >= endpoints: {}", steps[mid], lens[mid], peak ? "yes" : "no");
  }
  return 0;
}

int cmd_motivate(const Globals& g, const std::string& dsrm, int steps, int sessions) {
  const RunConfig config = load_config(g);
  const auto seed = config.env.seed;
  io::ensure_dir(g.out);

  // (a) popularity vs reward under a random policy, plus the unbiased control.
  const Scatter sc = popularity_reward_scatter(config.env, steps, seed);
  env::EnvConfig control = config.env;
  control.bias_strength = 0.0;
  const Scatter sc0 = popularity_reward_scatter(control, steps, seed);
  std::string csv = "item,log_exposure,mean_reward\n";
  for (std::size_t i = 0; i < sc.items.size(); ++i)
    csv += fmt::format("{},{:.6g},{:.6g}\n", sc.items[i], sc.log_exposure[i], sc.mean_reward[i]);
  io::write_file_atomic(out_path(g, "motivate_scatter.csv"), csv);
  log("R^2 biased {:.4f} control {:.4f}", sc.r_squared, sc0.r_squared);

  // (b) fixed policy on raw vs purified states.
  const StageOne s1 = *resolve_stage_one(config, g, dsrm, true);
  const PurifyComparison pc = compare_raw_purified(config, seed, s1);
  const std::vector<io::ResultRow> rows{{"FLAT-raw", seed, config.env.max_len, pc.raw},
                                        {"FLAT-purified", seed, config.env.max_len, pc.purified}};
  const std::string path = out_path(g, "motivate_purify.csv");
  fs::remove(path);
  io::append_results(path, rows);
  log("raw Len {:.3f} AD {:.4f} | purified Len {:.3f} AD {:.4f}", pc.raw.len_mean,
      pc.raw.ad_mean, pc.purified.len_mean, pc.purified.ad_mean);

  // (c) state embeddings for external plotting.
  const EmbeddingDump dump = embedding_dump(config.env, s1, sessions, seed);
  io::write_embedding_dump(out_path(g, "embed_raw.tsv"), dump.raw);
  io::write_embedding_dump(out_path(g, "embed_purified.tsv"), dump.purified);

  io::write_file_atomic(out_path(g, "motivate_summary.txt"),
                        fmt::format("r2_biased={:.6g}\nr2_control={:.6g}\nembedding_rows={}\n",
                                    sc.r_squared, sc0.r_squared, dump.raw.size()));
  return 0;
}

int cmd_ablate(const Globals& g, const std::vector<std::string>& variant_names,
               const std::vector<std::uint64_t>& seeds, const std::vector<int>& max_lens) {
  const RunConfig base = load_config(g);
  ExperimentPlan plan;
  plan.variants.clear();
  for (const auto& v : variant_names) plan.variants.push_back(hrl::parse_variant(v));
  plan.seeds = seeds;
  plan.max_lens = max_lens;
  io::ensure_dir(g.out);

  std::map<std::pair<std::uint64_t, int>, StageOne> stage_ones;
  std::vector<io::ResultRow> rows;
  for (const auto& cell : plan.enumerate()) {
    RunConfig c = base;
    c.env.seed = cell.seed;
    c.env.max_len = cell.max_len;
    c.hrl.variant = cell.variant;
    c.validate();
    std::optional<StageOne> s1;
    if (hrl::uses_denoiser(cell.variant)) {
      const auto key = std::make_pair(cell.seed, cell.max_len);
      auto it = stage_ones.find(key);
      if (it == stage_ones.end()) {
        log("stage I: seed {} max_len {}", cell.seed, cell.max_len);
        it = stage_ones.emplace(key, train_stage_one(c, cell.seed)).first;
      }
      s1 = it->second;
    }
    log("stage II: {} seed {} max_len {}", hrl::to_string(cell.variant), cell.seed, cell.max_len);
    const StageTwo st = train_stage_two(c, cell.variant, cell.seed, s1);
    const auto report = evaluate_agent(c, st.agent, cell.seed);
    log("Len {:.3f} AD {:.4f}", report.len_mean, report.ad_mean);
    rows.push_back({hrl::to_string(cell.variant), cell.seed, cell.max_len, report});
  }
  const std::string path = out_path(g, "results.csv");
  fs::remove(path);
  io::append_results(path, rows);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"fairrec: purify-then-decouple recommendation experiments"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "INI config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "override env.seed");
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  auto* train_dsrm = app.add_subcommand("train-dsrm", "Stage I: train the denoiser");
  std::optional<int> epochs;
  bool check = false;
  train_dsrm->add_option("--epochs", epochs, "override dsrm.epochs");
  train_dsrm->add_flag("--check", check, "held-out denoising check after training");

  auto* train = app.add_subcommand("train", "Stage II: train one variant and evaluate it");
  std::string variant = "DSRM-HRL";
  std::string dsrm;
  train->add_option("--variant", variant, "DSRM-HRL, HRL-RAW or FLAT")->capture_default_str();
  train->add_option("--dsrm", dsrm, "denoiser checkpoint (default <out>/dsrm_seed<S>.ckpt)");

  auto* eval = app.add_subcommand("eval", "evaluate an agent checkpoint");
  std::string ckpt;
  std::optional<int> episodes;
  eval->add_option("--ckpt", ckpt, "agent checkpoint")->required();
  eval->add_option("--episodes", episodes, "override eval.episodes");

  auto* sweep = app.add_subcommand("sweep-steps", "sweep the number of diffusion steps");
  std::vector<int> steps{5, 20, 200};
  std::string sweep_variant = "DSRM-HRL";
  sweep->add_option("--steps", steps, "comma list of K")->delimiter(',')->capture_default_str();
  sweep->add_option("--variant", sweep_variant, "variant trained per K")->capture_default_str();

  auto* motivate = app.add_subcommand("motivate", "popularity-bias and purification analyses");
  std::string motivate_dsrm;
  int motivate_steps = 10000;
  int motivate_sessions = 50;
  motivate->add_option("--dsrm", motivate_dsrm, "denoiser checkpoint");
  motivate->add_option("--steps", motivate_steps, "random-policy steps")->capture_default_str();
  motivate->add_option("--sessions", motivate_sessions, "sessions for the embedding dump")
      ->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "variants x seeds x max_len grid");
  std::vector<std::string> variants{"DSRM-HRL", "HRL-RAW", "FLAT"};
  std::vector<std::uint64_t> seeds{11, 15, 19};
  std::vector<int> max_lens{30, 50};
  ablate->add_option("--variants", variants)->delimiter(',')->capture_default_str();
  ablate->add_option("--seeds", seeds)->delimiter(',')->capture_default_str();
  ablate->add_option("--max-len", max_lens)->delimiter(',')->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (*train_dsrm) return cmd_train_dsrm(g, epochs, check);
    if (*train) return cmd_train(g, variant, dsrm);
    if (*eval) return cmd_eval(g, ckpt, episodes);
    if (*sweep) return cmd_sweep_steps(g, steps, sweep_variant);
    if (*motivate) return cmd_motivate(g, motivate_dsrm, motivate_steps, motivate_sessions);
    if (*ablate) return cmd_ablate(g, variants, seeds, max_lens);
  } catch (const ConfigError& e) {
    log("config error: {}", e.what());
    return 1;
  } catch (const ParseError& e) {
    log("parse error: {}", e.what());
    return 1;
  } catch (const std::exception& e) {
    log("error: {}", e.what());
    return 2;
  }
  return 1;
}

}  // namespace fairrec::harness
