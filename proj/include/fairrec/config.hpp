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
// Run configuration. The on-disk form is `key = value` lines grouped under
// `[env]`, `[dsrm]`, `[hrl]` and `[eval]` headers; `#` starts a comment.
// Unknown sections or keys are rejected. Only `env.seed` is required.
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fairrec/env.hpp"
#include "fairrec/hrl.hpp"

namespace fairrec {

struct DsrmConfig {
  int k_steps = 20;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  int time_dim = 8;
  std::vector<int> hidden{64, 64};
  std::string activation = "tanh";
  double lr = 1e-3;
  int epochs = 30;
  int batch = 128;
  // Stage-I pairs collected from random-policy rollouts.
  int pairs = 5000;
  int min_pairs = 256;
  std::string purify_mode = "deterministic";
  bool ancestral_start = false;
};

struct EvalConfig {
  int episodes = 200;
  bool greedy = true;
  std::string coverage = "coverage";  // or "share"
};

struct RunConfig {
  env::EnvConfig env;
  DsrmConfig dsrm;
  hrl::HrlConfig hrl;
  EvalConfig eval;

  // Range checks for every field; throws ConfigError naming the field.
  void validate() const;
  // Fully resolved config in the on-disk format; parse(to_text()) round-trips.
  std::string to_text() const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
};

// Raw `[section] key = value` document; preserves order.
struct IniDocument {
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };
  std::vector<std::pair<std::string, std::vector<Entry>>> sections;

  static IniDocument parse(const std::string& text);
  const std::vector<Entry>* find(const std::string& section) const;
};

}  // namespace fairrec
