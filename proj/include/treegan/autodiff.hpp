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

// Define-by-run reverse-mode differentiation. A Tape records every op in
// execution order, so node ids are already a topological order and backward
// is a single reverse sweep.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treegan/tensor.hpp"

namespace treegan {

class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(std::string op)
      : std::runtime_error("non-finite value produced by op '" + op + "'"),
        op_(std::move(op)) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

// A named trainable tensor owned by a model.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

// Lightweight handle to a tape node.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push("constant", std::move(value), false, {}); }
  Var leaf(Tensor value) { return push("leaf", std::move(value), true, {}); }
  Var param(const Parameter& p) { return push(p.name, p.value, true, {}); }

  // Records an op result. The node requires grad iff any input does; the
  // backward rule is dropped otherwise.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward) {
    return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  Var record(std::string_view op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward) {
    if (!value.all_finite()) throw NonFiniteError(std::string(op));
    bool rg = false;
    for (const auto& v : inputs) {
      if (&v.tape() != this) throw std::logic_error("op mixes vars from different tapes");
      rg = rg || nodes_[v.id()].requires_grad;
    }
    return push(op, std::move(value), rg, rg ? std::move(backward) : BackwardFn{});
  }

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }

  bool has_grad(std::size_t id) const { return nodes_.at(id).has_grad; }

  // Gradient of the last backward() target w.r.t. this node; zeros if the
  // node was not reached.
  Tensor grad(Var v) const {
    const auto& n = nodes_.at(v.id());
    return n.has_grad ? n.grad : Tensor::zeros_like(n.value);
  }

  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }

  // Adds g into the gradient slot of `id`; no-op for nodes not requiring grad.
  void accumulate(std::size_t id, const Tensor& g) {
    auto& n = nodes_[id];
    if (!n.requires_grad) return;
    if (g.size() != n.value.size()) {
      throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match " +
                       shape_str(n.value.shape()) + " for op '" + n.op + "'");
    }
    if (!n.has_grad) {
      n.grad = Tensor(n.value.shape(), g.storage());
      n.has_grad = true;
      return;
    }
    auto dst = n.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  // Mutable slot access for backward rules that scatter element-wise.
  Tensor& grad_slot(std::size_t id) {
    auto& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor::zeros_like(n.value);
      n.has_grad = true;
    }
    return n.grad;
  }

  void backward(Var loss) {
    if (&loss.tape() != this) throw std::logic_error("loss belongs to another tape");
    if (loss.value().size() != 1) {
      throw ShapeError("backward() needs a scalar loss, got shape " +
                       shape_str(loss.value().shape()));
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    auto& top = nodes_[loss.id()];
    if (!top.requires_grad) return;
    top.grad = Tensor(top.value.shape(), 1.0);
    top.has_grad = true;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.has_grad && n.backward) n.backward(*this, i);
    }
  }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push(std::string_view op, Tensor value, bool rg, BackwardFn fn) {
    nodes_.push_back(Node{std::string(op), std::move(value), Tensor(), rg, false, std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace ops {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

inline MapC as_mat(const Tensor& t) {
  return MapC(t.data().data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}
inline Map as_mat(Tensor& t) {
  return Map(t.data().data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}

struct Broadcast {
  Shape out_shape;
  std::size_t rows, cols;
  std::size_t ar, ac, br, bc;

  std::size_t a_index(std::size_t r, std::size_t c) const {
    return (ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c);
  }
  std::size_t b_index(std::size_t r, std::size_t c) const {
    return (br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c);
  }
};

// Matrix-view broadcasting: each of rows/cols must match or be 1.
inline Broadcast broadcast(const Tensor& a, const Tensor& b, std::string_view op) {
  Broadcast bc{{}, 0, 0, a.rows(), a.cols(), b.rows(), b.cols()};
  auto join = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  };
  bc.rows = join(bc.ar, bc.br);
  bc.cols = join(bc.ac, bc.bc);
  if (a.shape() == b.shape()) {
    bc.out_shape = a.shape();
  } else if (a.rows() == bc.rows && a.cols() == bc.cols) {
    bc.out_shape = a.shape();
  } else if (b.rows() == bc.rows && b.cols() == bc.cols) {
    bc.out_shape = b.shape();
  } else {
    bc.out_shape = {bc.rows, bc.cols};
  }
  return bc;
}

// Elementwise binary op with gradients da = g * fa(a,b), db = g * fb(a,b).
template <typename F, typename DA, typename DB>
Var binary(std::string_view name, Var a, Var b, F f, DA da, DB db) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast bc = broadcast(av, bv, name);
  Tensor out(bc.out_shape);
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      out[r * bc.cols + c] = f(av[bc.a_index(r, c)], bv[bc.b_index(r, c)]);
    }
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(name, std::move(out), {a, b},
                         [ia, ib, bc, da, db](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor ga = Tensor::zeros_like(av);
      for (std::size_t r = 0; r < bc.rows; ++r)
        for (std::size_t c = 0; c < bc.cols; ++c) {
          const auto ai = bc.a_index(r, c);
          ga[ai] += g[r * bc.cols + c] * da(av[ai], bv[bc.b_index(r, c)]);
        }
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Tensor gb = Tensor::zeros_like(bv);
      for (std::size_t r = 0; r < bc.rows; ++r)
        for (std::size_t c = 0; c < bc.cols; ++c) {
          const auto bi = bc.b_index(r, c);
          gb[bi] += g[r * bc.cols + c] * db(av[bc.a_index(r, c)], bv[bi]);
        }
      t.accumulate(ib, gb);
    }
  });
}

// Elementwise unary op; df receives (input, output).
template <typename F, typename DF>
Var unary(std::string_view name, Var a, F f, DF df) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const auto ia = a.id();
  return a.tape().record(name, std::move(out), {a}, [ia, df](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] * df(x[i], y[i]);
    t.accumulate(ia, gx);
  });
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  detail::as_mat(out).noalias() = detail::as_mat(av) * detail::as_mat(bv);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    if (t.requires_grad(ia)) {
      Tensor ga = Tensor::zeros_like(t.value(ia));
      detail::as_mat(ga).noalias() = detail::as_mat(g) * detail::as_mat(t.value(ib)).transpose();
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) {
      Tensor gb = Tensor::zeros_like(t.value(ib));
      detail::as_mat(gb).noalias() = detail::as_mat(t.value(ia)).transpose() * detail::as_mat(g);
      t.accumulate(ib, gb);
    }
  });
}

inline Var add(Var a, Var b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var div(Var a, Var b) {
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

inline Var scale(Var a, double s) {
  return detail::unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var add_scalar(Var a, double s) {
  return detail::unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Var relu(Var a) {
  return detail::unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

inline constexpr double kLeakyReluSlope = 0.2;

inline Var leaky_relu(Var a, double alpha = kLeakyReluSlope) {
  return detail::unary(
      "leaky_relu", a, [alpha](double x) { return x > 0 ? x : alpha * x; },
      [alpha](double x, double) { return x > 0 ? 1.0 : alpha; });
}

inline Var tanh(Var a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
  return detail::unary(
      "sigmoid", a, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Var exp(Var a) {
  return detail::unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(Var a) {
  return detail::unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var sqrt(Var a) {
  return detail::unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

inline Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.data()) s += x;
  const auto ia = a.id();
  return a.tape().record("sum", Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, Tensor(t.value(ia).shape(), t.out_grad(self).item()));
  });
}

inline Var mean(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.data()) s += x;
  const double n = static_cast<double>(av.size());
  const auto ia = a.id();
  return a.tape().record("mean", Tensor::scalar(s / n), {a}, [ia, n](Tape& t, std::size_t self) {
    t.accumulate(ia, Tensor(t.value(ia).shape(), t.out_grad(self).item() / n));
  });
}

// Reduction along one matrix axis, keeping it as size 1: axis 0 gives
// [1 x cols], axis 1 gives [rows x 1].
inline Var sum_axis(Var a, int axis) {
  const Tensor& av = a.value();
  const std::size_t R = av.rows(), C = av.cols();
  if (axis != 0 && axis != 1) throw ShapeError("sum_axis: axis must be 0 or 1");
  Tensor out(axis == 0 ? Shape{1, C} : Shape{R, 1});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[axis == 0 ? c : r] += av[r * C + c];
  const auto ia = a.id();
  return a.tape().record("sum_axis", std::move(out), {a},
                         [ia, axis, R, C](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    Tensor ga = Tensor::zeros_like(t.value(ia));
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga[r * C + c] = g[axis == 0 ? c : r];
    t.accumulate(ia, ga);
  });
}

inline Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const auto ia = a.id();
  return a.tape().record("reshape", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.out_grad(self));
  });
}

// Concatenation of matrix views along axis 0 (rows) or 1 (columns).
inline Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  std::vector<std::size_t> rows, cols;
  for (const auto& p : parts) {
    rows.push_back(p.value().rows());
    cols.push_back(p.value().cols());
  }
  std::size_t R = 0, C = 0;
  if (axis == 0) {
    C = cols[0];
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (cols[i] != C) throw ShapeError("concat(axis=0): column counts differ");
      R += rows[i];
    }
  } else {
    R = rows[0];
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (rows[i] != R) throw ShapeError("concat(axis=1): row counts differ");
      C += cols[i];
    }
  }
  Tensor out({R, C});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = parts[i].value();
    for (std::size_t r = 0; r < rows[i]; ++r)
      for (std::size_t c = 0; c < cols[i]; ++c) {
        if (axis == 0)
          out[(offset + r) * C + c] = v[r * cols[i] + c];
        else
          out[r * C + offset + c] = v[r * cols[i] + c];
      }
    offset += axis == 0 ? rows[i] : cols[i];
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(
      "concat", std::move(out), parts, [ids, rows, cols, axis, C](Tape& t, std::size_t self) {
        const Tensor& g = t.out_grad(self);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (t.requires_grad(ids[i])) {
            Tensor gi = Tensor::zeros_like(t.value(ids[i]));
            for (std::size_t r = 0; r < rows[i]; ++r)
              for (std::size_t c = 0; c < cols[i]; ++c)
                gi[r * cols[i] + c] =
                    axis == 0 ? g[(offset + r) * C + c] : g[r * C + offset + c];
            t.accumulate(ids[i], gi);
          }
          offset += axis == 0 ? rows[i] : cols[i];
        }
      });
}

inline Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

// Half-open range [begin, end) along a matrix axis.
inline Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  const std::size_t R = av.rows(), C = av.cols();
  const std::size_t extent = axis == 0 ? R : C;
  if ((axis != 0 && axis != 1) || begin >= end || end > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_str(av.shape()));
  }
  const std::size_t oR = axis == 0 ? end - begin : R;
  const std::size_t oC = axis == 1 ? end - begin : C;
  Tensor out({oR, oC});
  for (std::size_t r = 0; r < oR; ++r)
    for (std::size_t c = 0; c < oC; ++c)
      out[r * oC + c] = axis == 0 ? av[(begin + r) * C + c] : av[r * C + begin + c];
  const auto ia = a.id();
  return a.tape().record("slice", std::move(out), {a},
                         [ia, axis, begin, oR, oC, C](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.out_grad(self);
    Tensor& ga = t.grad_slot(ia);
    for (std::size_t r = 0; r < oR; ++r)
      for (std::size_t c = 0; c < oC; ++c) {
        if (axis == 0)
          ga[(begin + r) * C + c] += g[r * oC + c];
        else
          ga[r * C + begin + c] += g[r * oC + c];
      }
  });
}

// Rows of `a` selected by index (embedding lookup); gradients scatter-add.
inline Var gather_rows(Var a, std::vector<std::size_t> index) {
  const Tensor& av = a.value();
  const std::size_t R = av.rows(), C = av.cols();
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  Tensor out({index.size(), C});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= R) throw ShapeError("gather_rows: row index out of range");
    for (std::size_t c = 0; c < C; ++c) out[i * C + c] = av[index[i] * C + c];
  }
  const auto ia = a.id();
  return a.tape().record("gather_rows", std::move(out), {a},
                         [ia, index = std::move(index), C](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.out_grad(self);
    Tensor& ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t c = 0; c < C; ++c) ga[index[i] * C + c] += g[i * C + c];
  });
}

// Softmax along axis 1 (each row) or axis 0 (each column).
inline Var softmax(Var a, int axis = 1) {
  const Tensor& av = a.value();
  const std::size_t R = av.rows(), C = av.cols();
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t groups = axis == 1 ? R : C;
  const std::size_t len = axis == 1 ? C : R;
  auto idx = [=](std::size_t gi, std::size_t k) {
    return axis == 1 ? gi * C + k : k * C + gi;
  };
  Tensor out(av.shape());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, av[idx(gi, k)]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) z += std::exp(av[idx(gi, k)] - mx);
    for (std::size_t k = 0; k < len; ++k) out[idx(gi, k)] = std::exp(av[idx(gi, k)] - mx) / z;
  }
  const auto ia = a.id();
  return a.tape().record("softmax", std::move(out), {a},
                         [ia, groups, len, idx](Tape& t, std::size_t self) {
    const Tensor& g = t.out_grad(self);
    const Tensor& y = t.value(self);
    Tensor ga = Tensor::zeros_like(y);
    for (std::size_t gi = 0; gi < groups; ++gi) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += g[idx(gi, k)] * y[idx(gi, k)];
      for (std::size_t k = 0; k < len; ++k)
        ga[idx(gi, k)] = y[idx(gi, k)] * (g[idx(gi, k)] - dot);
    }
    t.accumulate(ia, ga);
  });
}

inline constexpr double kLogitClamp = 30.0;

// Mean binary cross-entropy of logits against targets in [0,1]. Logits are
// clamped to +-30 for the value; the gradient passes through the clamp.
inline Var binary_cross_entropy_with_logits(Var logits, const Tensor& targets) {
  const Tensor& x = logits.value();
  if (x.size() != targets.size()) {
    throw ShapeError("binary_cross_entropy_with_logits: " + shape_str(x.shape()) +
                     " logits vs " + shape_str(targets.shape()) + " targets");
  }
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = std::clamp(x[i], -kLogitClamp, kLogitClamp);
    total += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  const auto ix = logits.id();
  return logits.tape().record("binary_cross_entropy_with_logits", Tensor::scalar(total / n),
                              {logits}, [ix, targets, n](Tape& t, std::size_t self) {
    const double g = t.out_grad(self).item();
    const Tensor& x = t.value(ix);
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = std::clamp(x[i], -kLogitClamp, kLogitClamp);
      gx[i] = g * (detail::stable_sigmoid(z) - targets[i]) / n;
    }
    t.accumulate(ix, gx);
  });
}

// Mean over rows of -log softmax(logits)[row, target[row]].
inline Var softmax_cross_entropy(Var logits, std::span<const std::size_t> target) {
  const Tensor& x = logits.value();
  const std::size_t R = x.rows(), C = x.cols();
  if (target.size() != R) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(target.size()) +
                     " targets for " + std::to_string(R) + " rows");
  }
  Tensor prob(x.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    if (target[r] >= C) {
      throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(target[r]) +
                              " outside " + std::to_string(C) + " classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, x[r * C + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(x[r * C + c] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t c = 0; c < C; ++c) prob[r * C + c] = std::exp(x[r * C + c] - log_z);
    total += log_z - x[r * C + target[r]];
  }
  const double n = static_cast<double>(R);
  std::vector<std::size_t> tgt(target.begin(), target.end());
  const auto ix = logits.id();
  return logits.tape().record(
      "softmax_cross_entropy", Tensor::scalar(total / n), {logits},
      [ix, prob = std::move(prob), tgt = std::move(tgt), n, C](Tape& t, std::size_t self) {
        const double g = t.out_grad(self).item();
        Tensor gx = prob;
        for (std::size_t r = 0; r < tgt.size(); ++r) gx[r * C + tgt[r]] -= 1.0;
        for (auto& v : gx.data()) v *= g / n;
        t.accumulate(ix, gx);
      });
}

}  // namespace ops

// Operator sugar over the primitive set.
inline Var operator+(Var a, Var b) { return ops::add(a, b); }
inline Var operator-(Var a, Var b) { return ops::sub(a, b); }
inline Var operator*(Var a, Var b) { return ops::mul(a, b); }
inline Var operator*(double s, Var a) { return ops::scale(a, s); }

}  // namespace treegan
