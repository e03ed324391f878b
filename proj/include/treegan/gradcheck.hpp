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

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "treegan/autodiff.hpp"

namespace treegan {

struct GradCheckReport {
  bool passed = true;
  double worst_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Builds a scalar loss on a fresh tape from leaf vars bound to `params`.
using ScalarGraph = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor) so that near-zero
  // gradients are compared absolutely.
  double floor = 1e-3;
};

// Compares the tape gradient of `f` against central differences over every
// coordinate of every parameter.
inline GradCheckReport grad_check(const ScalarGraph& f, std::vector<Tensor> params,
                                  GradCheckOptions opt = {}) {
  auto evaluate = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : ps) vars.push_back(tape.constant(p));
    return f(tape, vars).value().item();
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (std::size_t j = 0; j < params[pi].size(); ++j) {
      const double orig = params[pi][j];
      params[pi][j] = orig + opt.step;
      const double up = evaluate(params);
      params[pi][j] = orig - opt.step;
      const double down = evaluate(params);
      params[pi][j] = orig;
      const double numeric = (up - down) / (2.0 * opt.step);
      const double a = analytic[pi][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.worst_rel_error || !std::isfinite(rel)) {
        report.worst_rel_error = rel;
        report.worst_param = pi;
        report.worst_index = j;
      }
    }
  }
  report.passed = std::isfinite(report.worst_rel_error) &&
                  report.worst_rel_error < opt.tolerance;
  return report;
}

}  // namespace treegan
