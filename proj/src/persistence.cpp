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
#include "fairrec/persistence.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "fairrec/errors.hpp"
#include "fairrec/rng.hpp"

namespace fairrec::io {
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[5] = {'D', 'S', 'R', 'M', '1'};

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  void raw(void* p, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw ParseError(fmt::format("checkpoint truncated at byte {} reading {}", pos_, what));
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    raw(&v, 4, what);
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    if (bytes_.size() - pos_ < n)
      throw ParseError(fmt::format("checkpoint truncated at byte {} reading {}", pos_, what));
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string g6(double x) { return fmt::format("{:.6g}", x); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_num(const std::string& s, const std::string& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("{}:{}: bad number '{}'", path, line, s));
  }
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ParseError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw ParseError("checkpoint has no meta key '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(ckpt.version);
  w.str(ckpt.config_text);
  w.u32(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    std::size_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.values.size())
      throw ShapeError(fmt::format("tensor '{}' shape does not match {} values", t.name,
                                   t.values.size()));
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u32(d);
    w.raw(t.values.data(), t.values.size() * sizeof(float));
  }
  return std::move(w.out);
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[5];
  r.raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw ParseError("not a checkpoint: bad magic");
  Checkpoint c;
  c.version = r.u32("version");
  if (c.version != kCheckpointVersion)
    throw ParseError(fmt::format("unsupported checkpoint version {}", c.version));
  c.config_text = r.str("config");
  const std::uint32_t n_meta = r.u32("meta count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str("meta key");
    c.meta[k] = r.str("meta value");
  }
  const std::uint32_t n_tensor = r.u32("tensor count");
  for (std::uint32_t i = 0; i < n_tensor; ++i) {
    Tensor t;
    t.name = r.str("tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) throw ParseError(fmt::format("tensor '{}' has rank {}", t.name, rank));
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.u32("tensor shape"));
      count *= t.shape.back();
    }
    if (count * sizeof(float) > bytes.size())
      throw ParseError(fmt::format("checkpoint truncated in tensor '{}'", t.name));
    t.values.resize(count);
    r.raw(t.values.data(), count * sizeof(float), "tensor values");
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw ParseError(fmt::format("trailing bytes after offset {}", r.pos()));
  return c;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const fs::path target(path);
  if (target.has_parent_path()) ensure_dir(target.parent_path().string());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = serialize(ckpt);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                           bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string s = read_file(path);
  try {
    return deserialize(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void add_mlp(Checkpoint& ckpt, const std::string& prefix, const nn::Mlp& net) {
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& L = layers[i];
    Tensor w{fmt::format("{}.w{}", prefix, i),
             {static_cast<std::uint32_t>(L.out), static_cast<std::uint32_t>(L.in)},
             std::vector<float>(L.weight.begin(), L.weight.end())};
    Tensor b{fmt::format("{}.b{}", prefix, i),
             {static_cast<std::uint32_t>(L.out)},
             std::vector<float>(L.bias.begin(), L.bias.end())};
    ckpt.tensors.push_back(std::move(w));
    ckpt.tensors.push_back(std::move(b));
  }
}

void read_mlp(const Checkpoint& ckpt, const std::string& prefix, nn::Mlp& net) {
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& L = layers[i];
    const Tensor& w = ckpt.tensor(fmt::format("{}.w{}", prefix, i));
    const Tensor& b = ckpt.tensor(fmt::format("{}.b{}", prefix, i));
    if (w.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(L.out),
                                              static_cast<std::uint32_t>(L.in)} ||
        b.shape != std::vector<std::uint32_t>{static_cast<std::uint32_t>(L.out)})
      throw ShapeError(fmt::format("checkpoint layer {}.{} does not match network", prefix, i));
    L.weight.assign(w.values.begin(), w.values.end());
    L.bias.assign(b.values.begin(), b.values.end());
  }
  if (ckpt.has_tensor(fmt::format("{}.w{}", prefix, layers.size())))
    throw ShapeError("checkpoint network " + prefix + " has more layers than expected");
}

Checkpoint denoiser_checkpoint(const dsrm::Denoiser& denoiser,
                               const dsrm::DiffusionSchedule& schedule,
                               const std::string& config_text) {
  Checkpoint c;
  c.config_text = config_text;
  const auto& sizes = denoiser.net().layer_sizes();
  std::string hidden;
  for (std::size_t i = 1; i + 1 < sizes.size(); ++i)
    hidden += (hidden.empty() ? "" : ",") + std::to_string(sizes[i]);
  c.meta["kind"] = "denoiser";
  c.meta["dim"] = std::to_string(denoiser.dim());
  c.meta["time_dim"] = std::to_string(denoiser.time_dim());
  c.meta["hidden"] = hidden;
  c.meta["activation"] = nn::to_string(denoiser.net().activation());
  c.meta["k_steps"] = std::to_string(schedule.steps);
  c.meta["beta_min"] = fmt::format("{}", schedule.beta.front());
  c.meta["beta_max"] = fmt::format("{}", schedule.beta.back());
  add_mlp(c, "denoiser", denoiser.net());
  return c;
}

LoadedDenoiser load_denoiser(const Checkpoint& ckpt) {
  if (ckpt.meta_at("kind") != "denoiser" && !ckpt.meta.count("dim"))
    throw ParseError("checkpoint does not hold a denoiser");
  try {
    const int dim = std::stoi(ckpt.meta_at("dim"));
    const int time_dim = std::stoi(ckpt.meta_at("time_dim"));
    std::vector<int> hidden;
    std::istringstream hs(ckpt.meta_at("hidden"));
    for (std::string tok; std::getline(hs, tok, ',');) hidden.push_back(std::stoi(tok));
    const auto act = nn::parse_activation(ckpt.meta_at("activation"));
    const int k = std::stoi(ckpt.meta_at("k_steps"));
    LoadedDenoiser out;
    out.denoiser = dsrm::Denoiser(dim, time_dim, hidden, act, 0);
    read_mlp(ckpt, "denoiser", out.denoiser.net());
    out.schedule = dsrm::DiffusionSchedule::make(k, std::stod(ckpt.meta_at("beta_min")),
                                                 std::stod(ckpt.meta_at("beta_max")));
    return out;
  } catch (const std::invalid_argument&) {
    throw ParseError("checkpoint denoiser metadata is malformed");
  }
}

std::string parameter_hash(const nn::Mlp& net) {
  const auto flat = net.flat_parameters();
  return fmt::format("{:016x}", hash_values(flat));
}

std::string results_header() {
  return "variant,seed,max_len,len_mean,len_std,r_each_mean,r_each_std,r_cum_mean,r_cum_std,"
         "ad_mean,ad_std,f_pop,f_tail,n_episodes";
}

std::string format_result_row(const ResultRow& row) {
  const auto& m = row.report;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}", row.variant, row.seed,
                     row.max_len, g6(m.len_mean), g6(m.len_std), g6(m.r_each_mean),
                     g6(m.r_each_std), g6(m.r_cum_mean), g6(m.r_cum_std), g6(m.ad_mean),
                     g6(m.ad_std), g6(m.f_pop), g6(m.f_tail), m.n_episodes);
}

void append_results(const std::string& path, std::span<const ResultRow> rows) {
  std::string content;
  if (fs::exists(path)) content = read_file(path);
  if (content.empty()) content = results_header() + "\n";
  for (const auto& row : rows) content += format_result_row(row) + "\n";
  write_file_atomic(path, content);
}

std::vector<ResultRow> read_results(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != results_header())
    throw ParseError(path + ": missing or unexpected results header");
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != 14) throw ParseError(fmt::format("{}:{}: expected 14 columns", path, line_no));
    ResultRow r;
    r.variant = c[0];
    r.seed = static_cast<std::uint64_t>(parse_num(c[1], path, line_no));
    r.max_len = static_cast<int>(parse_num(c[2], path, line_no));
    double* fields[] = {&r.report.len_mean,   &r.report.len_std,    &r.report.r_each_mean,
                        &r.report.r_each_std, &r.report.r_cum_mean, &r.report.r_cum_std,
                        &r.report.ad_mean,    &r.report.ad_std,     &r.report.f_pop,
                        &r.report.f_tail};
    for (int i = 0; i < 10; ++i) *fields[i] = parse_num(c[3 + i], path, line_no);
    r.report.n_episodes = static_cast<int>(parse_num(c[13], path, line_no));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_loss_curve(const std::string& path, std::span<const double> losses) {
  std::string s = "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) s += fmt::format("{},{}\n", i, g6(losses[i]));
  write_file_atomic(path, s);
}

void write_train_log(const std::string& path, std::span<const hrl::TrainLogRow> rows) {
  std::string s =
      "update,surrogate,value_loss,entropy,mean_omega_acc,mean_omega_fair,env_steps,episodes,"
      "mean_len\n";
  for (const auto& r : rows)
    s += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.update, g6(r.surrogate), g6(r.value_loss),
                     g6(r.entropy), g6(r.mean_omega_acc), g6(r.mean_omega_fair), r.env_steps,
                     r.episodes, g6(r.mean_len));
  write_file_atomic(path, s);
}

void write_pairs(const std::string& path, std::span<const dsrm::TrainingPair> pairs) {
  const std::size_t d = pairs.empty() ? 0 : pairs.front().clean.size();
  std::string s;
  for (std::size_t i = 0; i < d; ++i) s += fmt::format("s0_{},", i);
  for (std::size_t i = 0; i < d; ++i) s += fmt::format("obs_{},", i);
  s += "session\n";
  for (const auto& p : pairs) {
    if (p.clean.size() != d || p.observed.size() != d) throw ShapeError("write_pairs: ragged pairs");
    // Full precision so a replay reproduces training exactly.
    for (double v : p.clean) s += fmt::format("{},", v);
    for (double v : p.observed) s += fmt::format("{},", v);
    s += fmt::format("{}\n", p.session);
  }
  write_file_atomic(path, s);
}

std::vector<dsrm::TrainingPair> read_pairs(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty pair file");
  const std::size_t cols = split(line, ',').size();
  if (cols < 3 || (cols - 1) % 2 != 0) throw ParseError(path + ": bad pair header");
  const std::size_t d = (cols - 1) / 2;
  std::vector<dsrm::TrainingPair> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != cols) throw ParseError(fmt::format("{}:{}: expected {} columns", path, line_no, cols));
    dsrm::TrainingPair p;
    for (std::size_t i = 0; i < d; ++i) p.clean.push_back(parse_num(c[i], path, line_no));
    for (std::size_t i = 0; i < d; ++i) p.observed.push_back(parse_num(c[d + i], path, line_no));
    p.session = static_cast<int>(parse_num(c[2 * d], path, line_no));
    out.push_back(std::move(p));
  }
  return out;
}

void write_embedding_dump(const std::string& path, std::span<const EmbeddingRow> rows) {
  std::string s;
  for (const auto& r : rows) {
    for (double v : r.vec) s += fmt::format("{}\t", g6(v));
    s += fmt::format("{}\t{}\n", r.popularity_decile, r.category);
  }
  write_file_atomic(path, s);
}

}  // namespace fairrec::io
