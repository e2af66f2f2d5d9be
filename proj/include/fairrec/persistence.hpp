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
// Checkpoints and run artifacts. Every file is written to a temporary
// sibling and renamed into place.
//
// Checkpoint layout (little endian):
//   "DSRM1" | u32 version | u32 len | config text
//   | u32 n_meta  | n_meta  x (str key, str value)
//   | u32 n_tensor| n_tensor x (str name, u32 rank, rank x u32 dim, f32 values)
// where str is u32 length + bytes.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairrec/diffusion.hpp"
#include "fairrec/hrl.hpp"
#include "fairrec/metrics.hpp"
#include "fairrec/nn.hpp"

namespace fairrec::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::map<std::string, std::string> meta;
  std::vector<Tensor> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  const std::string& meta_at(const std::string& key) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
// Throws ParseError on bad magic, unsupported version or truncation.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Layers stored as "<prefix>.w<i>" [out, in] and "<prefix>.b<i>" [out].
void add_mlp(Checkpoint& ckpt, const std::string& prefix, const nn::Mlp& net);
// Loads into an already-shaped network; throws ShapeError on mismatch.
void read_mlp(const Checkpoint& ckpt, const std::string& prefix, nn::Mlp& net);

// Denoiser / agent round trips. The denoiser checkpoint carries its schedule
// and architecture in `meta`.
Checkpoint denoiser_checkpoint(const dsrm::Denoiser& denoiser,
                               const dsrm::DiffusionSchedule& schedule,
                               const std::string& config_text);
struct LoadedDenoiser {
  dsrm::Denoiser denoiser;
  dsrm::DiffusionSchedule schedule;
};
LoadedDenoiser load_denoiser(const Checkpoint& ckpt);

// Hex digest of a network's parameters; used to check that the denoiser is
// untouched by Stage II.
std::string parameter_hash(const nn::Mlp& net);

// Bytes -> file via temp + rename.
void write_file_atomic(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

struct ResultRow {
  std::string variant;
  std::uint64_t seed = 0;
  int max_len = 0;
  metrics::MetricsReport report;
};

// Fixed column order; the header is written only when the file is new.
void append_results(const std::string& path, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results(const std::string& path);
std::string results_header();
// One CSV line, no newline.
std::string format_result_row(const ResultRow& row);

void write_loss_curve(const std::string& path, std::span<const double> losses);
void write_train_log(const std::string& path, std::span<const hrl::TrainLogRow> rows);

// Stage-I pairs: header line, then d clean values, d observed values and the
// session id per row.
void write_pairs(const std::string& path, std::span<const dsrm::TrainingPair> pairs);
std::vector<dsrm::TrainingPair> read_pairs(const std::string& path);

struct EmbeddingRow {
  Vec vec;
  int popularity_decile = 0;
  int category = 0;
};
// TSV: d coordinates, popularity decile, nearest-item category.
void write_embedding_dump(const std::string& path, std::span<const EmbeddingRow> rows);

// Creates `dir` (and parents) if missing.
void ensure_dir(const std::string& dir);

}  // namespace fairrec::io
