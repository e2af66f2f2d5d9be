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
// Fully connected networks with closed-form backprop, Adam, and a
// central-difference gradient checker. All arithmetic is double precision.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairrec/linalg.hpp"

namespace fairrec::nn {

enum class Activation { Tanh, Relu, Identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;  // row-major [out x in]
  std::vector<double> bias;    // [out]
};

// Per-layer inputs and pre-activations captured by a forward pass.
struct ForwardCache {
  std::vector<Vec> inputs;
  std::vector<Vec> pre;
};

// Gradients laid out like the network's layers, plus the input gradient.
struct Gradients {
  std::vector<std::vector<double>> d_weight;
  std::vector<std::vector<double>> d_bias;
  Vec d_input;

  void add(const Gradients& other);
  void scale(double factor);
  bool finite() const;
};

class Mlp {
 public:
  Mlp() = default;
  // Hidden layers use `hidden`; the output layer is linear. Weights are drawn
  // from N(0, gain / fan_in) with gain 1 for tanh and 2 for relu.
  Mlp(std::vector<int> layer_sizes, Activation hidden, std::uint64_t seed);

  Vec forward(std::span<const double> x, ForwardCache* cache = nullptr) const;
  Gradients backward(const ForwardCache& cache, std::span<const double> dy) const;
  // Adds this sample's gradients (including d_input) into `into`.
  void accumulate_backward(const ForwardCache& cache, std::span<const double> dy,
                           Gradients& into) const;
  Gradients zero_gradients() const;

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return hidden_; }
  std::size_t parameter_count() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Flat views in layer order: W0, b0, W1, b1, ...
  std::vector<double*> parameter_pointers();
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> flat);

  void zero_parameters();
  bool finite() const;

 private:
  std::vector<int> sizes_;
  Activation hidden_ = Activation::Tanh;
  std::vector<Layer> layers_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of parameter tensors.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, const Mlp& net);

  // Returns false (and leaves everything untouched) if any gradient is
  // non-finite.
  bool step(Mlp& net, const Gradients& grads);
  // Plain-vector variant for standalone parameters such as a log-std.
  bool step(std::span<double> params, std::span<const double> grads, int slot);

  // Registers an extra parameter block for the plain-vector overload.
  int add_slot(std::size_t size);

  long step_count() const { return t_; }
  std::size_t skipped() const { return skipped_; }
  AdamConfig& config() { return config_; }

 private:
  void update(std::span<double> p, std::span<const double> g,
              std::vector<double>& m, std::vector<double>& v, long t);

  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<std::vector<double>> slot_m_;
  std::vector<std::vector<double>> slot_v_;
  std::vector<long> slot_t_;
  long t_ = 0;
  std::size_t skipped_ = 0;
};

// Loss of a network output and its gradient with respect to that output.
using LossFn = std::function<std::pair<double, Vec>(std::span<const double>)>;

struct GradientCheckResult {
  double max_rel_error = 0.0;
  double max_input_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares backward() with five-point finite differences for every
// parameter and every input coordinate. Relative error is
// |a - n| / max(|a| + |n|, floor).
GradientCheckResult gradient_check(Mlp& net, const LossFn& loss,
                                   std::span<const double> x, double h = 1e-3,
                                   double floor = 1e-7);

// 0.5 * ||y - target||^2, handy for tests and checks.
LossFn squared_error_loss(Vec target);

}  // namespace fairrec::nn
