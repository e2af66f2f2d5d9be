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
// Data-parallel hot loops. Each kernel has a serial reference kept for
// testing and benchmarking; the OpenMP versions partition work into a fixed
// number of chunks and reduce them in chunk order, so results do not depend
// on the thread count.
#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "fairrec/env.hpp"
#include "fairrec/linalg.hpp"
#include "fairrec/nn.hpp"

namespace fairrec::kernels {

// Worker score for every item:
//   omega_acc * cos(state, e_i) - omega_fair * log(1 + exposure_i).
// A zero-norm state scores similarity 0 for all items.
Vec score_items_serial(std::span<const double> state, double omega_acc,
                       double omega_fair, const env::ItemCatalog& catalog);
Vec score_items_parallel(std::span<const double> state, double omega_acc,
                         double omega_fair, const env::ItemCatalog& catalog);

// Per-sample loss hook: given sample index and network output, returns the
// sample's loss and writes dLoss/dOutput into `dy`. Must be thread-safe.
using OutputGrad =
    std::function<double(std::size_t, std::span<const double>, std::span<double>)>;

struct BatchResult {
  double loss = 0.0;  // sum of per-sample losses
  nn::Gradients grads;
};

// `inputs` is row-major [n x net.input_size()].
BatchResult batch_gradients_serial(const nn::Mlp& net, std::span<const double> inputs,
                                   std::size_t n, const OutputGrad& output_grad);
BatchResult batch_gradients_parallel(const nn::Mlp& net, std::span<const double> inputs,
                                     std::size_t n, const OutputGrad& output_grad);

// Chunk count used by the parallel reductions.
inline constexpr std::size_t kReductionChunks = 16;

}  // namespace fairrec::kernels
