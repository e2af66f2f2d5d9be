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
// Serial vs OpenMP kernels: worker scoring over the catalog and batched
// MLP gradients. Run with OMP_NUM_THREADS set to compare.
#include <benchmark/benchmark.h>

#include "fairrec/env.hpp"
#include "fairrec/kernels.hpp"

namespace {

using namespace fairrec;

env::ItemCatalog catalog(int n_items) {
  env::EnvConfig c;
  c.n_items = n_items;
  return env::ItemCatalog::build(c);
}

template <bool Parallel>
void BM_ScoreItems(benchmark::State& state) {
  const auto cat = catalog(static_cast<int>(state.range(0)));
  Rng rng(1);
  const Vec s = rng.normal_vec(cat.dim);
  for (auto _ : state) {
    Vec out = Parallel ? kernels::score_items_parallel(s, 0.8, 0.1, cat)
                       : kernels::score_items_serial(s, 0.8, 0.1, cat);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreItems<false>)->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(BM_ScoreItems<true>)->Arg(500)->Arg(5000)->Arg(50000);

template <bool Parallel>
void BM_BatchGradients(benchmark::State& state) {
  // Denoiser-shaped network at default widths.
  const nn::Mlp net({40, 64, 64, 16}, nn::Activation::Tanh, 2);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Vec inputs = rng.normal_vec(n * 40);
  const kernels::OutputGrad og = [](std::size_t, std::span<const double> y,
                                    std::span<double> dy) {
    double l = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      dy[j] = y[j];
      l += 0.5 * y[j] * y[j];
    }
    return l;
  };
  for (auto _ : state) {
    auto r = Parallel ? kernels::batch_gradients_parallel(net, inputs, n, og)
                      : kernels::batch_gradients_serial(net, inputs, n, og);
    benchmark::DoNotOptimize(r.loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchGradients<false>)->Arg(128)->Arg(1024);
BENCHMARK(BM_BatchGradients<true>)->Arg(128)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
