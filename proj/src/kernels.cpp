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
#include "fairrec/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairrec/errors.hpp"

namespace fairrec::kernels {

namespace {

void check_state(std::span<const double> state, const env::ItemCatalog& catalog) {
  if (static_cast<int>(state.size()) != catalog.dim)
    throw ShapeError("score_items: state dimension mismatch");
  if (catalog.n_items <= 0) throw ShapeError("score_items: empty catalog");
}

inline double score_one(const double* e, std::span<const double> state, double inv_norm,
                        double omega_acc, double omega_fair, std::int64_t exposure, int d) {
  double sim = 0.0;
  if (inv_norm > 0.0) {
    double s = 0.0;
    double ee = 0.0;
    for (int k = 0; k < d; ++k) {
      s += e[k] * state[k];
      ee += e[k] * e[k];
    }
    sim = ee > 0.0 ? s * inv_norm / std::sqrt(ee) : 0.0;
  }
  return omega_acc * sim - omega_fair * std::log1p(static_cast<double>(exposure));
}

double state_inv_norm(std::span<const double> state) {
  const double n = norm(state);
  return n > 0.0 && std::isfinite(n) ? 1.0 / n : 0.0;
}

}  // namespace

Vec score_items_serial(std::span<const double> state, double omega_acc,
                       double omega_fair, const env::ItemCatalog& catalog) {
  check_state(state, catalog);
  const double inv = state_inv_norm(state);
  const int d = catalog.dim;
  Vec scores(catalog.n_items);
  for (int i = 0; i < catalog.n_items; ++i)
    scores[i] = score_one(catalog.embeddings.data() + static_cast<std::size_t>(i) * d,
                          state, inv, omega_acc, omega_fair, catalog.exposure[i], d);
  return scores;
}

Vec score_items_parallel(std::span<const double> state, double omega_acc,
                         double omega_fair, const env::ItemCatalog& catalog) {
  check_state(state, catalog);
  const double inv = state_inv_norm(state);
  const int d = catalog.dim;
  const int n = catalog.n_items;
  Vec scores(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    scores[i] = score_one(catalog.embeddings.data() + static_cast<std::size_t>(i) * d,
                          state, inv, omega_acc, omega_fair, catalog.exposure[i], d);
  return scores;
}

BatchResult batch_gradients_serial(const nn::Mlp& net, std::span<const double> inputs,
                                   std::size_t n, const OutputGrad& output_grad) {
  const std::size_t width = net.input_size();
  if (inputs.size() != n * width) throw ShapeError("batch_gradients: input size mismatch");
  BatchResult out;
  out.grads = net.zero_gradients();
  nn::ForwardCache cache;
  Vec dy(net.output_size());
  for (std::size_t i = 0; i < n; ++i) {
    const Vec y = net.forward(inputs.subspan(i * width, width), &cache);
    std::fill(dy.begin(), dy.end(), 0.0);
    out.loss += output_grad(i, y, dy);
    net.accumulate_backward(cache, dy, out.grads);
  }
  return out;
}

BatchResult batch_gradients_parallel(const nn::Mlp& net, std::span<const double> inputs,
                                     std::size_t n, const OutputGrad& output_grad) {
  const std::size_t width = net.input_size();
  if (inputs.size() != n * width) throw ShapeError("batch_gradients: input size mismatch");
  const std::size_t chunks = std::min(kReductionChunks, std::max<std::size_t>(n, 1));
  std::vector<BatchResult> partial(chunks);
  for (auto& p : partial) p.grads = net.zero_gradients();

  const long n_chunks = static_cast<long>(chunks);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < n_chunks; ++c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    nn::ForwardCache cache;
    Vec dy(net.output_size());
    BatchResult& acc = partial[c];
    for (std::size_t i = begin; i < end; ++i) {
      const Vec y = net.forward(inputs.subspan(i * width, width), &cache);
      std::fill(dy.begin(), dy.end(), 0.0);
      acc.loss += output_grad(i, y, dy);
      net.accumulate_backward(cache, dy, acc.grads);
    }
  }

  BatchResult out = std::move(partial[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    out.loss += partial[c].loss;
    out.grads.add(partial[c].grads);
  }
  return out;
}

}  // namespace fairrec::kernels
