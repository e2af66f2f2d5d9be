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
#include "fairrec/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fairrec/errors.hpp"
#include "fairrec/nn.hpp"

namespace fairrec {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

long long to_int(const std::string& field, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(field, "expected an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& field, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out))
    throw ConfigError(field, "expected a finite number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& field, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(static_cast<int>(to_int(field, trim(tok))));
  if (out.empty()) throw ConfigError(field, "expected a comma-separated list");
  return out;
}

std::string fmt_double(double x) { return fmt::format("{}", x); }

std::string fmt_list(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

struct Binding {
  const char* section;
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& field, const std::string&)> set;
};

#define FR_INT(sec, member, name)                                                          \
  Binding{sec, name, [](const RunConfig& c) { return std::to_string(c.member); },          \
          [](RunConfig& c, const std::string& f, const std::string& v) {                   \
            c.member = static_cast<decltype(c.member)>(to_int(f, v));                      \
          }}
#define FR_DBL(sec, member, name)                                                          \
  Binding{sec, name, [](const RunConfig& c) { return fmt_double(c.member); },              \
          [](RunConfig& c, const std::string& f, const std::string& v) {                   \
            c.member = to_double(f, v);                                                    \
          }}
#define FR_BOOL(sec, member, name)                                                         \
  Binding{sec, name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }, \
          [](RunConfig& c, const std::string& f, const std::string& v) {                   \
            c.member = to_bool(f, v);                                                      \
          }}
#define FR_STR(sec, member, name)                                                          \
  Binding{sec, name, [](const RunConfig& c) { return c.member; },                          \
          [](RunConfig& c, const std::string&, const std::string& v) { c.member = v; }}
#define FR_LIST(sec, member, name)                                                         \
  Binding{sec, name, [](const RunConfig& c) { return fmt_list(c.member); },                \
          [](RunConfig& c, const std::string& f, const std::string& v) {                   \
            c.member = to_int_list(f, v);                                                  \
          }}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      FR_INT("env", env.seed, "seed"),
      FR_INT("env", env.dim, "dim"),
      FR_INT("env", env.n_items, "n_items"),
      FR_INT("env", env.slate_size, "slate_size"),
      FR_INT("env", env.history_window, "history_window"),
      FR_INT("env", env.max_len, "max_len"),
      FR_DBL("env", env.kappa, "kappa"),
      FR_DBL("env", env.bias_strength, "bias_strength"),
      FR_DBL("env", env.noise_scale, "noise_scale"),
      FR_DBL("env", env.obs_noise, "obs_noise"),
      FR_DBL("env", env.zipf_s, "zipf_s"),
      FR_INT("env", env.window_a, "window_a"),
      FR_DBL("env", env.threshold_a, "threshold_a"),
      FR_DBL("env", env.decay_a, "decay_a"),
      FR_DBL("env", env.abandon_prob, "abandon_prob"),
      FR_INT("env", env.n_categories, "n_categories"),
      FR_DBL("env", env.item_spread, "item_spread"),
      FR_DBL("env", env.user_spread, "user_spread"),
      FR_DBL("env", env.mainstream_skew, "mainstream_skew"),
      FR_DBL("env", env.popular_tilt, "popular_tilt"),
      FR_DBL("env", env.user_mainstream, "user_mainstream"),
      FR_DBL("env", env.base_exposure, "base_exposure"),
      FR_INT("dsrm", dsrm.k_steps, "k_steps"),
      FR_DBL("dsrm", dsrm.beta_min, "beta_min"),
      FR_DBL("dsrm", dsrm.beta_max, "beta_max"),
      FR_INT("dsrm", dsrm.time_dim, "time_dim"),
      FR_LIST("dsrm", dsrm.hidden, "hidden"),
      FR_STR("dsrm", dsrm.activation, "activation"),
      FR_DBL("dsrm", dsrm.lr, "lr"),
      FR_INT("dsrm", dsrm.epochs, "epochs"),
      FR_INT("dsrm", dsrm.batch, "batch"),
      FR_INT("dsrm", dsrm.pairs, "pairs"),
      FR_INT("dsrm", dsrm.min_pairs, "min_pairs"),
      FR_STR("dsrm", dsrm.purify_mode, "purify_mode"),
      FR_BOOL("dsrm", dsrm.ancestral_start, "ancestral_start"),
      FR_DBL("hrl", hrl.gamma, "gamma"),
      FR_DBL("hrl", hrl.lam_gae, "lam_gae"),
      FR_DBL("hrl", hrl.clip_eps, "clip_eps"),
      FR_DBL("hrl", hrl.lambda_fair, "lambda_fair"),
      FR_DBL("hrl", hrl.policy_lr, "policy_lr"),
      FR_DBL("hrl", hrl.value_lr, "value_lr"),
      FR_DBL("hrl", hrl.entropy_coef, "entropy_coef"),
      FR_INT("hrl", hrl.ppo_epochs, "ppo_epochs"),
      FR_INT("hrl", hrl.batch_steps, "batch_steps"),
      FR_INT("hrl", hrl.minibatch, "minibatch"),
      FR_INT("hrl", hrl.manager_interval, "manager_interval"),
      FR_INT("hrl", hrl.total_steps, "total_steps"),
      FR_LIST("hrl", hrl.hidden, "hidden"),
      FR_DBL("hrl", hrl.init_log_std, "init_log_std"),
      FR_DBL("hrl", hrl.flat_omega_acc, "flat_omega_acc"),
      FR_DBL("hrl", hrl.flat_omega_fair, "flat_omega_fair"),
      Binding{"hrl", "variant", [](const RunConfig& c) { return hrl::to_string(c.hrl.variant); },
              [](RunConfig& c, const std::string& f, const std::string& v) {
                try {
                  c.hrl.variant = hrl::parse_variant(v);
                } catch (const std::exception&) {
                  throw ConfigError(f, "unknown variant '" + v + "'");
                }
              }},
      FR_INT("eval", eval.episodes, "episodes"),
      FR_BOOL("eval", eval.greedy, "greedy"),
      FR_STR("eval", eval.coverage, "coverage"),
  };
  return table;
}

#undef FR_INT
#undef FR_DBL
#undef FR_BOOL
#undef FR_STR
#undef FR_LIST

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

void check_hidden(const std::vector<int>& h, const char* field) {
  require(!h.empty(), field, "at least one hidden layer");
  for (int w : h) require(w >= 1 && w <= 4096, field, "layer widths must be in [1, 4096]");
}

}  // namespace

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ParseError(fmt::format("config line {}: malformed section header", line_no));
      const std::string name = trim(line.substr(1, line.size() - 2));
      for (const auto& s : doc.sections)
        if (s.first == name)
          throw ParseError(fmt::format("config line {}: duplicate section [{}]", line_no, name));
      doc.sections.emplace_back(name, std::vector<Entry>{});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(fmt::format("config line {}: expected key = value", line_no));
    if (doc.sections.empty())
      throw ParseError(fmt::format("config line {}: key outside a section", line_no));
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ParseError(fmt::format("config line {}: empty key", line_no));
    for (const auto& prev : doc.sections.back().second)
      if (prev.key == e.key)
        throw ParseError(fmt::format("config line {}: duplicate key '{}'", line_no, e.key));
    doc.sections.back().second.push_back(std::move(e));
  }
  return doc;
}

const std::vector<IniDocument::Entry>* IniDocument::find(const std::string& section) const {
  for (const auto& s : sections)
    if (s.first == section) return &s.second;
  return nullptr;
}

RunConfig RunConfig::parse(const std::string& text) {
  const IniDocument doc = IniDocument::parse(text);
  RunConfig cfg;
  bool have_seed = false;
  static const std::set<std::string> known{"env", "dsrm", "hrl", "eval"};
  for (const auto& [section, entries] : doc.sections) {
    if (!known.count(section)) throw ConfigError(section, "unknown section");
    for (const auto& e : entries) {
      const std::string field = section + "." + e.key;
      const Binding* b = nullptr;
      for (const auto& cand : bindings())
        if (section == cand.section && e.key == cand.key) b = &cand;
      if (!b) throw ConfigError(field, "unknown key");
      if (e.value.empty()) throw ConfigError(field, "empty value");
      b->set(cfg, field, e.value);
      if (field == "env.seed") have_seed = true;
    }
  }
  if (!have_seed) throw ConfigError("env.seed", "required");
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  const char* current = "";
  for (const auto& b : bindings()) {
    if (std::string_view(current) != b.section) {
      if (*current) out += "\n";
      out += fmt::format("[{}]\n", b.section);
      current = b.section;
    }
    out += fmt::format("{} = {}\n", b.key, b.get(*this));
  }
  return out;
}

void RunConfig::validate() const {
  env.validate();

  require(dsrm.k_steps >= 1 && dsrm.k_steps <= 10000, "dsrm.k_steps", "must be in [1, 10000]");
  require(dsrm.beta_min > 0.0 && dsrm.beta_min < 1.0, "dsrm.beta_min", "must be in (0, 1)");
  require(dsrm.beta_max >= dsrm.beta_min && dsrm.beta_max < 1.0, "dsrm.beta_max",
          "must be in [beta_min, 1)");
  require(dsrm.time_dim >= 2 && dsrm.time_dim % 2 == 0, "dsrm.time_dim",
          "must be an even number >= 2");
  check_hidden(dsrm.hidden, "dsrm.hidden");
  try {
    (void)nn::parse_activation(dsrm.activation);
  } catch (const std::exception&) {
    throw ConfigError("dsrm.activation", "unknown activation '" + dsrm.activation + "'");
  }
  require(dsrm.lr >= 0.0 && dsrm.lr < 1.0, "dsrm.lr", "must be in [0, 1)");
  require(dsrm.epochs >= 0, "dsrm.epochs", "must be >= 0");
  require(dsrm.batch >= 1, "dsrm.batch", "must be >= 1");
  require(dsrm.min_pairs >= 1, "dsrm.min_pairs", "must be >= 1");
  require(dsrm.pairs >= dsrm.min_pairs, "dsrm.pairs", "must be >= dsrm.min_pairs");
  require(dsrm.purify_mode == "deterministic" || dsrm.purify_mode == "stochastic",
          "dsrm.purify_mode", "must be deterministic or stochastic");

  require(hrl.gamma > 0.0 && hrl.gamma <= 1.0, "hrl.gamma", "must be in (0, 1]");
  require(hrl.lam_gae >= 0.0 && hrl.lam_gae <= 1.0, "hrl.lam_gae", "must be in [0, 1]");
  require(hrl.clip_eps > 0.0 && hrl.clip_eps < 1.0, "hrl.clip_eps", "must be in (0, 1)");
  require(hrl.lambda_fair >= 0.0, "hrl.lambda_fair", "must be >= 0");
  require(hrl.policy_lr >= 0.0 && hrl.policy_lr < 1.0, "hrl.policy_lr", "must be in [0, 1)");
  require(hrl.value_lr >= 0.0 && hrl.value_lr < 1.0, "hrl.value_lr", "must be in [0, 1)");
  require(hrl.entropy_coef >= 0.0, "hrl.entropy_coef", "must be >= 0");
  require(hrl.ppo_epochs >= 1, "hrl.ppo_epochs", "must be >= 1");
  require(hrl.batch_steps >= 1, "hrl.batch_steps", "must be >= 1");
  require(hrl.minibatch >= 1, "hrl.minibatch", "must be >= 1");
  require(hrl.manager_interval >= 1, "hrl.manager_interval", "must be >= 1");
  require(hrl.total_steps >= 0, "hrl.total_steps", "must be >= 0");
  check_hidden(hrl.hidden, "hrl.hidden");
  require(hrl.init_log_std >= hrl::ManagerPolicy::kMinLogStd &&
              hrl.init_log_std <= hrl::ManagerPolicy::kMaxLogStd,
          "hrl.init_log_std", "must be in [-5, 2]");
  require(hrl.flat_omega_acc >= 0.0, "hrl.flat_omega_acc", "must be >= 0");
  require(hrl.flat_omega_fair >= 0.0, "hrl.flat_omega_fair", "must be >= 0");

  require(eval.episodes >= 1, "eval.episodes", "must be >= 1");
  require(eval.coverage == "coverage" || eval.coverage == "share", "eval.coverage",
          "must be coverage or share");
}

}  // namespace fairrec
