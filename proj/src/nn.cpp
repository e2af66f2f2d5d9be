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
#include "fairrec/nn.hpp"

#include <algorithm>
#include <cmath>

#include "fairrec/errors.hpp"
#include "fairrec/rng.hpp"

namespace fairrec::nn {

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::Identity:
      return x;
  }
  return x;
}

double activate_grad(Activation a, double pre) {
  switch (a) {
    case Activation::Tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::Relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::Identity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("activation", "unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Identity:
      return "identity";
  }
  return "identity";
}

void Gradients::add(const Gradients& other) {
  if (other.d_weight.size() != d_weight.size())
    throw ShapeError("Gradients::add: layer count mismatch");
  for (std::size_t l = 0; l < d_weight.size(); ++l) {
    for (std::size_t i = 0; i < d_weight[l].size(); ++i) d_weight[l][i] += other.d_weight[l][i];
    for (std::size_t i = 0; i < d_bias[l].size(); ++i) d_bias[l][i] += other.d_bias[l][i];
  }
  if (d_input.size() == other.d_input.size())
    for (std::size_t i = 0; i < d_input.size(); ++i) d_input[i] += other.d_input[i];
}

void Gradients::scale(double factor) {
  for (auto& w : d_weight)
    for (double& x : w) x *= factor;
  for (auto& b : d_bias)
    for (double& x : b) x *= factor;
  for (double& x : d_input) x *= factor;
}

bool Gradients::finite() const {
  for (const auto& w : d_weight)
    if (!all_finite(w)) return false;
  for (const auto& b : d_bias)
    if (!all_finite(b)) return false;
  return true;
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation hidden, std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  if (sizes_.size() < 2) throw ShapeError("Mlp: need at least two layer sizes");
  for (int s : sizes_)
    if (s <= 0) throw ShapeError("Mlp: layer sizes must be positive");
  Rng rng(seed);
  const double gain = hidden_ == Activation::Relu ? 2.0 : 1.0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    Layer layer;
    layer.in = sizes_[l];
    layer.out = sizes_[l + 1];
    layer.weight.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.bias.assign(layer.out, 0.0);
    const double stddev = std::sqrt(gain / layer.in);
    for (double& w : layer.weight) w = stddev * rng.normal();
    layers_.push_back(std::move(layer));
  }
}

Vec Mlp::forward(std::span<const double> x, ForwardCache* cache) const {
  if (static_cast<int>(x.size()) != input_size())
    throw ShapeError("Mlp::forward: expected input of size " +
                     std::to_string(input_size()) + ", got " +
                     std::to_string(x.size()));
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Vec h(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Vec z(layer.out);
    for (int o = 0; o < layer.out; ++o) {
      const double* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      double s = layer.bias[o];
      for (int i = 0; i < layer.in; ++i) s += w[i] * h[i];
      z[o] = s;
    }
    const bool last = l + 1 == layers_.size();
    const Activation act = last ? Activation::Identity : hidden_;
    Vec a(layer.out);
    for (int o = 0; o < layer.out; ++o) a[o] = activate(act, z[o]);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(std::move(z));
    }
    h = std::move(a);
  }
  return h;
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (const Layer& layer : layers_) {
    g.d_weight.emplace_back(layer.weight.size(), 0.0);
    g.d_bias.emplace_back(layer.bias.size(), 0.0);
  }
  g.d_input.assign(input_size(), 0.0);
  return g;
}

Gradients Mlp::backward(const ForwardCache& cache, std::span<const double> dy) const {
  Gradients g = zero_gradients();
  accumulate_backward(cache, dy, g);
  return g;
}

void Mlp::accumulate_backward(const ForwardCache& cache, std::span<const double> dy,
                              Gradients& into) const {
  if (cache.inputs.size() != layers_.size() || cache.pre.size() != layers_.size())
    throw ShapeError("Mlp::backward: cache does not match network depth");
  if (static_cast<int>(dy.size()) != output_size())
    throw ShapeError("Mlp::backward: output gradient size mismatch");
  if (into.d_weight.size() != layers_.size())
    throw ShapeError("Mlp::backward: gradient buffer layout mismatch");
  Vec delta(dy.begin(), dy.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const Vec& in = cache.inputs[li];
    const Vec& pre = cache.pre[li];
    if (static_cast<int>(in.size()) != layer.in || static_cast<int>(pre.size()) != layer.out)
      throw ShapeError("Mlp::backward: stale cache");
    const bool last = li + 1 == layers_.size();
    const Activation act = last ? Activation::Identity : hidden_;
    for (int o = 0; o < layer.out; ++o) delta[o] *= activate_grad(act, pre[o]);

    auto& dw = into.d_weight[li];
    auto& db = into.d_bias[li];
    Vec d_in(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double dz = delta[o];
      if (dz == 0.0) continue;
      db[o] += dz;
      const double* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      double* gw = dw.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        gw[i] += dz * in[i];
        d_in[i] += dz * w[i];
      }
    }
    delta = std::move(d_in);
  }
  if (into.d_input.size() != delta.size()) into.d_input.assign(delta.size(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i) into.d_input[i] += delta[i];
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<double*> Mlp::parameter_pointers() {
  std::vector<double*> ptrs;
  ptrs.reserve(parameter_count());
  for (Layer& layer : layers_) {
    for (double& w : layer.weight) ptrs.push_back(&w);
    for (double& b : layer.bias) ptrs.push_back(&b);
  }
  return ptrs;
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Layer& layer : layers_) {
    flat.insert(flat.end(), layer.weight.begin(), layer.weight.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void Mlp::set_flat_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw ShapeError("Mlp::set_flat_parameters: size mismatch");
  std::size_t k = 0;
  for (Layer& layer : layers_) {
    for (double& w : layer.weight) w = flat[k++];
    for (double& b : layer.bias) b = flat[k++];
  }
}

void Mlp::zero_parameters() {
  for (Layer& layer : layers_) {
    std::fill(layer.weight.begin(), layer.weight.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

bool Mlp::finite() const {
  for (const Layer& layer : layers_)
    if (!all_finite(layer.weight) || !all_finite(layer.bias)) return false;
  return true;
}

Adam::Adam(AdamConfig config, const Mlp& net) : config_(config) {
  for (const Layer& layer : net.layers()) {
    m_.emplace_back(layer.weight.size(), 0.0);
    v_.emplace_back(layer.weight.size(), 0.0);
    m_.emplace_back(layer.bias.size(), 0.0);
    v_.emplace_back(layer.bias.size(), 0.0);
  }
}

void Adam::update(std::span<double> p, std::span<const double> g,
                  std::vector<double>& m, std::vector<double>& v, long t) {
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    p[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
}

bool Adam::step(Mlp& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.d_weight.size() != layers.size() || m_.size() != 2 * layers.size())
    throw ShapeError("Adam::step: gradient/parameter layout mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (grads.d_weight[l].size() != layers[l].weight.size() ||
        grads.d_bias[l].size() != layers[l].bias.size())
      throw ShapeError("Adam::step: gradient shape mismatch in layer " + std::to_string(l));
  if (!grads.finite()) {
    ++skipped_;
    return false;
  }
  ++t_;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads.d_weight[l], m_[2 * l], v_[2 * l], t_);
    update(layers[l].bias, grads.d_bias[l], m_[2 * l + 1], v_[2 * l + 1], t_);
  }
  return true;
}

int Adam::add_slot(std::size_t size) {
  slot_m_.emplace_back(size, 0.0);
  slot_v_.emplace_back(size, 0.0);
  slot_t_.push_back(0);
  return static_cast<int>(slot_m_.size()) - 1;
}

bool Adam::step(std::span<double> params, std::span<const double> grads, int slot) {
  if (slot < 0 || slot >= static_cast<int>(slot_m_.size()))
    throw ShapeError("Adam::step: unknown slot");
  if (params.size() != grads.size() || params.size() != slot_m_[slot].size())
    throw ShapeError("Adam::step: slot shape mismatch");
  if (!all_finite(grads)) {
    ++skipped_;
    return false;
  }
  // Slots keep their own step counter for bias correction.
  update(params, grads, slot_m_[slot], slot_v_[slot], ++slot_t_[slot]);
  return true;
}

GradientCheckResult gradient_check(Mlp& net, const LossFn& loss,
                                   std::span<const double> x, double h, double floor) {
  ForwardCache cache;
  const Vec y = net.forward(x, &cache);
  const auto [l0, dy] = loss(y);
  (void)l0;
  const Gradients g = net.backward(cache, dy);

  auto rel = [floor](double a, double n) {
    return std::abs(a - n) / std::max(std::abs(a) + std::abs(n), floor);
  };
  auto eval = [&](std::span<const double> input) { return loss(net.forward(input)).first; };
  // Five-point stencil, O(h^4). Lets h be large enough that round-off in the
  // loss stays well below tiny gradients.
  auto stencil = [h](auto&& f) {
    return (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
  };

  GradientCheckResult res;
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto check = [&](std::vector<double>& params, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        const double numeric = stencil([&](double delta) {
          params[i] = saved + delta;
          return eval(x);
        });
        params[i] = saved;
        res.max_rel_error = std::max(res.max_rel_error, rel(grad[i], numeric));
        ++res.checked;
      }
    };
    check(layers[l].weight, g.d_weight[l]);
    check(layers[l].bias, g.d_bias[l]);
  }
  Vec xi(x.begin(), x.end());
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double saved = xi[i];
    const double numeric = stencil([&](double delta) {
      xi[i] = saved + delta;
      return eval(xi);
    });
    xi[i] = saved;
    res.max_input_rel_error = std::max(res.max_input_rel_error, rel(g.d_input[i], numeric));
  }
  return res;
}

LossFn squared_error_loss(Vec target) {
  return [target = std::move(target)](std::span<const double> y) {
    if (y.size() != target.size()) throw ShapeError("squared_error_loss: size mismatch");
    double l = 0.0;
    Vec dy(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double diff = y[i] - target[i];
      l += 0.5 * diff * diff;
      dy[i] = diff;
    }
    return std::pair<double, Vec>{l, std::move(dy)};
  };
}

}  // namespace fairrec::nn
