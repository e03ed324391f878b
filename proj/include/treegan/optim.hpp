// Copyright 2026 The TreeGAN Authors.
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

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "treegan/autodiff.hpp"

namespace treegan {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

// One bias-corrected Adam update applied in place to `params`.
inline void adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads,
                      AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (!(cfg.lr > 0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Tensor::zeros_like(p->value));
      state.v.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i]->value.size() ||
        state.m[i].size() != params[i]->value.size()) {
      throw ShapeError("adam_step: gradient for '" + params[i]->name + "' has shape " +
                       shape_str(grads[i].shape()) + ", parameter is " +
                       shape_str(params[i]->value.shape()));
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->value.data();
    auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// Adam bound to a fixed parameter list.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {}

  void step(std::span<const Tensor> grads) { adam_step(params_, grads, state_, cfg_); }

  const std::vector<Parameter*>& params() const { return params_; }
  const AdamState& state() const { return state_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  AdamState state_;
};

// Binds parameters into a tape and reads their gradients back afterwards.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, std::span<Parameter* const> params) : tape_(&tape) {
    for (auto* p : params) vars_.push_back(tape.param(*p));
  }
  const std::vector<Var>& vars() const { return vars_; }
  Var operator[](std::size_t i) const { return vars_[i]; }
  std::vector<Tensor> grads() const {
    std::vector<Tensor> out;
    out.reserve(vars_.size());
    for (const auto& v : vars_) out.push_back(tape_->grad(v));
    return out;
  }

 private:
  Tape* tape_;
  std::vector<Var> vars_;
};

}  // namespace treegan
