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

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls the code it is used to check,
// except where a case builds the graph under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "treegan/embed.hpp"
#include "treegan/gradcheck.hpp"
#include "treegan/metrics.hpp"

namespace treegan::oracle {

using namespace ops;

inline Tensor random_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from the kink at zero.
inline Tensor away_from_zero(Rng& rng, Shape s) {
  Tensor t(std::move(s));
  for (auto& v : t.data()) {
    const double m = rng.uniform(0.05, 1.5);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

struct PrimitiveCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&, std::size_t, std::size_t)> inputs;
  ScalarGraph graph;
};

inline std::vector<PrimitiveCase> primitive_cases() {
  auto one = [](auto gen) {
    return [gen](Rng& rng, std::size_t r, std::size_t c) {
      return std::vector<Tensor>{gen(rng, Shape{r, c})};
    };
  };
  auto uni = [](Rng& rng, Shape s) { return random_tensor(rng, s); };
  auto pos = [](Rng& rng, Shape s) { return random_tensor(rng, s, 0.2, 2.0); };
  auto kinked = [](Rng& rng, Shape s) { return away_from_zero(rng, s); };
  // Loss reduction weights every output differently so that symmetric
  // mistakes in a backward rule do not cancel.
  auto weighted = [](Tape& t, Var y) {
    Tensor w(y.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
    return sum(y * t.constant(w));
  };
  std::vector<PrimitiveCase> cases;
  cases.push_back({"matmul",
                   [](Rng& rng, std::size_t r, std::size_t c) {
                     return std::vector<Tensor>{random_tensor(rng, {r, c}),
                                                random_tensor(rng, {c, 1 + rng.below(8)})};
                   },
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, matmul(v[0], v[1])); }});
  auto two = [](Rng& rng, std::size_t r, std::size_t c) {
    return std::vector<Tensor>{random_tensor(rng, {r, c}), random_tensor(rng, {r, c})};
  };
  auto row_bcast = [](Rng& rng, std::size_t r, std::size_t c) {
    return std::vector<Tensor>{random_tensor(rng, {r, c}), random_tensor(rng, {1, c}, 0.5, 1.5)};
  };
  cases.push_back({"add", two, [=](Tape& t, std::span<const Var> v) { return weighted(t, add(v[0], v[1])); }});
  cases.push_back({"add_broadcast", row_bcast,
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, add(v[0], v[1])); }});
  cases.push_back({"sub", two, [=](Tape& t, std::span<const Var> v) { return weighted(t, sub(v[0], v[1])); }});
  cases.push_back({"mul", two, [=](Tape& t, std::span<const Var> v) { return weighted(t, mul(v[0], v[1])); }});
  cases.push_back({"mul_broadcast", row_bcast,
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, mul(v[0], v[1])); }});
  cases.push_back({"div", row_bcast,
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, div(v[0], v[1])); }});
  cases.push_back({"scale", one(uni),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, scale(v[0], -1.7)); }});
  cases.push_back({"add_scalar", one(uni),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, add_scalar(v[0], 0.4)); }});
  cases.push_back({"concat0", two, [=](Tape& t, std::span<const Var> v) {
                     return weighted(t, concat({v[0], v[1]}, 0));
                   }});
  cases.push_back({"concat1", two, [=](Tape& t, std::span<const Var> v) {
                     return weighted(t, concat({v[1], v[0]}, 1));
                   }});
  cases.push_back({"slice", one(uni), [=](Tape& t, std::span<const Var> v) {
                     const auto c = v[0].value().cols();
                     return weighted(t, slice(v[0], 1, c / 2, c));
                   }});
  cases.push_back({"reshape", one(uni), [=](Tape& t, std::span<const Var> v) {
                     return weighted(t, reshape(v[0], {v[0].value().size()}));
                   }});
  cases.push_back({"mean", one(uni), [](Tape&, std::span<const Var> v) { return mean(v[0]); }});
  cases.push_back({"sum", one(uni), [](Tape&, std::span<const Var> v) { return sum(v[0]); }});
  cases.push_back({"sum_axis0", one(uni),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, sum_axis(v[0], 0)); }});
  cases.push_back({"sum_axis1", one(uni),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, sum_axis(v[0], 1)); }});
  cases.push_back({"relu", one(kinked), [=](Tape& t, std::span<const Var> v) { return weighted(t, relu(v[0])); }});
  cases.push_back({"leaky_relu", one(kinked),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, leaky_relu(v[0])); }});
  cases.push_back({"tanh", one(uni), [=](Tape& t, std::span<const Var> v) { return weighted(t, ops::tanh(v[0])); }});
  cases.push_back({"sigmoid", one(uni),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, sigmoid(v[0])); }});
  cases.push_back({"softmax1", one(uni),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, softmax(v[0], 1)); }});
  cases.push_back({"softmax0", one(uni),
                   [=](Tape& t, std::span<const Var> v) { return weighted(t, softmax(v[0], 0)); }});
  cases.push_back({"log", one(pos), [=](Tape& t, std::span<const Var> v) { return weighted(t, ops::log(v[0])); }});
  cases.push_back({"exp", one(uni), [=](Tape& t, std::span<const Var> v) { return weighted(t, ops::exp(v[0])); }});
  cases.push_back({"sqrt", one(pos), [=](Tape& t, std::span<const Var> v) { return weighted(t, ops::sqrt(v[0])); }});
  cases.push_back({"gather_rows", one(uni), [=](Tape& t, std::span<const Var> v) {
                     const auto r = v[0].value().rows();
                     return weighted(t, gather_rows(v[0], {r - 1, 0, r - 1}));
                   }});
  cases.push_back({"bce_with_logits", one(uni), [](Tape&, std::span<const Var> v) {
                     Tensor tgt(v[0].shape());
                     for (std::size_t i = 0; i < tgt.size(); ++i) tgt[i] = (i % 3 == 0) ? 1.0 : 0.0;
                     return binary_cross_entropy_with_logits(v[0], tgt);
                   }});
  cases.push_back({"softmax_cross_entropy", one(uni), [](Tape&, std::span<const Var> v) {
                     std::vector<std::size_t> tgt;
                     for (std::size_t r = 0; r < v[0].value().rows(); ++r)
                       tgt.push_back(r % v[0].value().cols());
                     return softmax_cross_entropy(v[0], tgt);
                   }});
  return cases;
}

inline ComplexVec random_cvec(Rng& rng, std::size_t d, double scale = 1.0) {
  std::vector<double> re(d), im(d);
  for (auto& v : re) v = rng.uniform(-scale, scale);
  for (auto& v : im) v = rng.uniform(-scale, scale);
  return {re, im};
}

// Complex multiply in long double through std::complex, independent of the
// hand-expanded product in complex_transform.
inline ComplexVec complex_oracle(const ComplexVec& a, const ComplexVec& b) {
  std::vector<double> re(a.dim()), im(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) {
    const std::complex<long double> x(a.re[j], a.im[j]), y(b.re[j], b.im[j]);
    const auto z = x * y;
    re[j] = static_cast<double>(z.real());
    im[j] = static_cast<double>(z.imag());
  }
  return {re, im};
}

// -sum_k log softmax(l_k)[t_k], computed in long double.
inline long double loop_hier_loss(const std::vector<std::vector<double>>& logits, const std::vector<std::size_t>& t) {
  long double total = 0.0L;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    long double mx = logits[k][0];
    for (double v : logits[k]) mx = std::max<long double>(mx, v);
    long double z = 0.0L;
    for (double v : logits[k]) z += std::exp(static_cast<long double>(v) - mx);
    total += -(static_cast<long double>(logits[k][t[k]]) - mx - std::log(z));
  }
  return total;
}

inline long double loop_bce(double logit, double target) {
  const long double x = std::clamp(logit, -30.0, 30.0);
  // -log sigmoid(x) = log1p(e^-x); -log(1 - sigmoid(x)) = log1p(e^x).
  return target * std::log1p(std::exp(-x)) + (1.0L - target) * std::log1p(std::exp(x));
}

using LMat = std::vector<std::vector<long double>>;

// Cyclic Jacobi rotation: returns eigenvalues, fills eigenvectors as columns.
inline std::vector<long double> jacobi_eigen(LMat a, LMat& v) {
  const std::size_t n = a.size();
  v.assign(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0L;
  for (int sweep = 0; sweep < 100; ++sweep) {
    long double off = 0.0L;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-36L) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300L) continue;
        const long double theta = (a[q][q] - a[p][p]) / (2.0L * a[p][q]);
        const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::abs(theta) + std::sqrt(theta * theta + 1.0L));
        const long double c = 1.0L / std::sqrt(t * t + 1.0L), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const long double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const long double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const long double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<long double> lam(n);
  for (std::size_t i = 0; i < n; ++i) lam[i] = a[i][i];
  return lam;
}

inline LMat lmat_mul(const LMat& a, const LMat& b) {
  const std::size_t n = a.size();
  LMat c(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline LMat psd_sqrt(const LMat& a) {
  LMat v;
  auto lam = jacobi_eigen(a, v);
  const std::size_t n = a.size();
  LMat r(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) r[i][j] += v[i][k] * std::sqrt(std::max(lam[k], 0.0L)) * v[j][k];
  return r;
}

inline LMat to_l(const Eigen::MatrixXd& m) {
  LMat out(static_cast<std::size_t>(m.rows()), std::vector<long double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline long double fid_oracle(const GaussianStats& a, const GaussianStats& b) {
  const LMat sa = to_l(a.sigma), sb = to_l(b.sigma);
  const LMat ra = psd_sqrt(sa);
  LMat v;
  const auto lam = jacobi_eigen(lmat_mul(lmat_mul(ra, sb), ra), v);
  long double d = 0.0L;
  for (Eigen::Index i = 0; i < a.mu.size(); ++i) {
    const long double diff = static_cast<long double>(a.mu[i]) - b.mu[i];
    d += diff * diff;
  }
  for (std::size_t i = 0; i < sa.size(); ++i) d += sa[i][i] + sb[i][i];
  for (auto l : lam) d -= 2.0L * std::sqrt(std::max(l, 0.0L));
  return d;
}

}  // namespace treegan::oracle
