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

// Class-hierarchy encoder. Every class gets a complex embedding; one shared
// relation embedding r stands for "is a". A (parent, child) pair is scored by
// the cosine between parent*r and child*r (componentwise complex products),
// and a margin ranking loss pushes true pairs above corrupted ones.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "treegan/autodiff.hpp"
#include "treegan/checkpoint.hpp"
#include "treegan/hierarchy.hpp"
#include "treegan/optim.hpp"
#include "treegan/rng.hpp"

namespace treegan {

struct ComplexVec {
  std::vector<double> re;
  std::vector<double> im;

  ComplexVec() = default;
  ComplexVec(std::vector<double> r, std::vector<double> i) : re(std::move(r)), im(std::move(i)) {
    if (re.size() != im.size() || re.empty()) {
      throw std::invalid_argument("complex vector needs equal, non-zero re/im lengths");
    }
  }
  std::size_t dim() const { return re.size(); }
};

class DegenerateEmbeddingError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline ComplexVec complex_transform(const ComplexVec& theta, const ComplexVec& rel) {
  if (theta.dim() != rel.dim()) {
    throw std::invalid_argument("complex_transform: dimension " + std::to_string(theta.dim()) +
                                " vs " + std::to_string(rel.dim()));
  }
  const auto d = theta.dim();
  std::vector<double> re(d), im(d);
  for (std::size_t j = 0; j < d; ++j) {
    re[j] = theta.re[j] * rel.re[j] - theta.im[j] * rel.im[j];
    im[j] = theta.re[j] * rel.im[j] + theta.im[j] * rel.re[j];
  }
  return {std::move(re), std::move(im)};
}

// Cosine of the two flattened (re || im) vectors.
inline double flat_cosine(const ComplexVec& a, const ComplexVec& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("flat_cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    dot += a.re[j] * b.re[j] + a.im[j] * b.im[j];
    na += a.re[j] * a.re[j] + a.im[j] * a.im[j];
    nb += b.re[j] * b.re[j] + b.im[j] * b.im[j];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateEmbeddingError("cosine of a zero-norm vector");
  return dot / std::sqrt(na * nb);
}

// Compatibility of a parent/child pair under relation r, in [-1, 1].
inline double pair_score(const ComplexVec& parent, const ComplexVec& rel, const ComplexVec& child) {
  if (parent.dim() != child.dim()) throw std::invalid_argument("pair_score: dimension mismatch");
  try {
    return flat_cosine(complex_transform(parent, rel), complex_transform(child, rel));
  } catch (const DegenerateEmbeddingError&) {
    throw DegenerateEmbeddingError("pair_score: transformed embedding has zero norm");
  }
}

struct CheConfig {
  std::size_t dim = 16;
  double margin = 0.5;
  std::size_t negatives_per_positive = 10;
  double lr = 0.01;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;

  static CheConfig full_width() {
    CheConfig c;
    c.dim = 100;
    return c;
  }

  void validate() const {
    if (dim == 0 || negatives_per_positive == 0 || epochs == 0 || !(lr > 0) || !(margin > 0)) {
      throw std::invalid_argument("che config: dim, negatives, epochs, lr and margin must be positive");
    }
  }
};

class ClassEmbeddingTable {
 public:
  ClassEmbeddingTable() = default;

  // Class embeddings uniform in +-0.5/sqrt(D); the relation starts as the
  // complex identity (1 + 0i in every component).
  ClassEmbeddingTable(const ClassHierarchy& h, std::size_t dim, Rng& rng)
      : re_{"che.re", Tensor({h.size(), dim})},
        im_{"che.im", Tensor({h.size(), dim})},
        rel_re_{"che.rel_re", Tensor({1, dim}, 1.0)},
        rel_im_{"che.rel_im", Tensor({1, dim}, 0.0)} {
    const double bound = 0.5 / std::sqrt(static_cast<double>(dim));
    for (auto& v : re_.value.data()) v = rng.uniform(-bound, bound);
    for (auto& v : im_.value.data()) v = rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < h.size(); ++i) names_.push_back(h.name(i));
  }

  std::size_t size() const { return re_.value.rows(); }
  std::size_t dim() const { return re_.value.cols(); }
  const std::vector<std::string>& names() const { return names_; }

  ComplexVec embedding(ClassId id) const {
    check(id);
    const auto d = dim();
    std::vector<double> r(d), i(d);
    for (std::size_t j = 0; j < d; ++j) {
      r[j] = re_.value.at(id, j);
      i[j] = im_.value.at(id, j);
    }
    return {std::move(r), std::move(i)};
  }

  ComplexVec relation() const {
    return {rel_re_.value.storage(), rel_im_.value.storage()};
  }

  void set_embedding(ClassId id, const ComplexVec& v) {
    check(id);
    if (v.dim() != dim()) throw std::invalid_argument("set_embedding: dimension mismatch");
    for (std::size_t j = 0; j < dim(); ++j) {
      re_.value.at(id, j) = v.re[j];
      im_.value.at(id, j) = v.im[j];
    }
  }

  void set_relation(const ComplexVec& v) {
    if (v.dim() != dim()) throw std::invalid_argument("set_relation: dimension mismatch");
    rel_re_.value = Tensor({1, dim()}, v.re);
    rel_im_.value = Tensor({1, dim()}, v.im);
  }

  // re, im, rel_re, rel_im.
  std::vector<Parameter*> params() { return {&re_, &im_, &rel_re_, &rel_im_}; }
  std::vector<const Parameter*> params() const { return {&re_, &im_, &rel_re_, &rel_im_}; }

  bool all_finite() const {
    return re_.value.all_finite() && im_.value.all_finite() && rel_re_.value.all_finite() &&
           rel_im_.value.all_finite();
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.metadata = nlohmann::json{{"kind", "class_embeddings"},
                                 {"dim", dim()},
                                 {"classes", names_}}
                      .dump();
    for (const auto* p : params()) ck.tensors.push_back(*p);
    return ck;
  }

  static ClassEmbeddingTable from_checkpoint(const Checkpoint& ck) {
    ClassEmbeddingTable t;
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(ck.metadata);
      if (meta.at("kind") != "class_embeddings") throw CorruptFileError("not an embedding checkpoint");
      t.names_ = meta.at("classes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw CorruptFileError(std::string("embedding checkpoint metadata: ") + e.what());
    }
    t.re_ = {"che.re", ck.get("che.re")};
    t.im_ = {"che.im", ck.get("che.im")};
    t.rel_re_ = {"che.rel_re", ck.get("che.rel_re")};
    t.rel_im_ = {"che.rel_im", ck.get("che.rel_im")};
    const auto n = t.names_.size(), d = t.re_.value.cols();
    if (t.re_.value.shape() != Shape{n, d} || t.im_.value.shape() != Shape{n, d} ||
        t.rel_re_.value.shape() != Shape{1, d} || t.rel_im_.value.shape() != Shape{1, d}) {
      throw CorruptFileError("embedding checkpoint tensor shapes are inconsistent");
    }
    return t;
  }

  // True when the class names match the hierarchy in id order.
  bool matches(const ClassHierarchy& h) const {
    if (h.size() != names_.size()) return false;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h.name(i) != names_[i]) return false;
    return true;
  }

  bool operator==(const ClassEmbeddingTable& o) const {
    return names_ == o.names_ && re_.value == o.re_.value && im_.value == o.im_.value &&
           rel_re_.value == o.rel_re_.value && rel_im_.value == o.rel_im_.value;
  }

 private:
  void check(ClassId id) const {
    if (id >= size()) throw std::out_of_range("class id " + std::to_string(id) + " not in embedding table");
  }

  Parameter re_, im_, rel_re_, rel_im_;
  std::vector<std::string> names_;
};

// Flattened (re || im) conditioning vector of length 2D.
inline std::vector<double> leaf_condition_vector(const ClassEmbeddingTable& table, ClassId y) {
  const auto e = table.embedding(y);
  std::vector<double> out = e.re;
  out.insert(out.end(), e.im.begin(), e.im.end());
  return out;
}

using ClassPair = std::pair<ClassId, ClassId>;

// n corruptions of a true (parent, child) pair. Each draw picks a side with
// probability 1/2 and replaces it by a class drawn uniformly from those that
// leave the two classes unrelated: no self pair and no edge in either
// direction (the score is symmetric, so a reversed edge would tie its
// positive). If that side admits no candidate the other side is used.
inline std::vector<ClassPair> sample_negatives(const ClassHierarchy& h, ClassPair pair,
                                               std::size_t n, Rng& rng) {
  if (h.size() < 3) {
    throw std::invalid_argument("sample_negatives: hierarchy needs at least 3 classes");
  }
  if (!h.is_parent_child(pair.first, pair.second)) {
    throw std::invalid_argument("sample_negatives: input is not a parent-child pair");
  }
  if (n == 0) throw std::invalid_argument("sample_negatives: n must be >= 1");
  const auto [p, c] = pair;
  std::vector<ClassId> parents, children;
  for (ClassId x = 0; x < h.size(); ++x) {
    if (x != c && !h.is_parent_child(x, c) && !h.is_parent_child(c, x)) parents.push_back(x);
    if (x != p && !h.is_parent_child(p, x) && !h.is_parent_child(x, p)) children.push_back(x);
  }
  std::vector<ClassPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool replace_parent = rng.below(2) == 0;
    if (replace_parent && parents.empty()) replace_parent = false;
    if (!replace_parent && children.empty()) replace_parent = true;
    if (replace_parent) {
      out.emplace_back(parents[rng.below(parents.size())], c);
    } else {
      out.emplace_back(p, children[rng.below(children.size())]);
    }
  }
  return out;
}

// Sum over (positive, negative) of max(0, margin + neg - pos); `neg` holds
// negatives_per_positive consecutive entries per positive.
inline double che_margin_loss(std::span<const double> pos, std::span<const double> neg,
                              double margin) {
  if (pos.empty()) return 0.0;
  if (neg.size() % pos.size() != 0) {
    throw std::invalid_argument("che_margin_loss: negatives not evenly paired with positives");
  }
  const auto per = neg.size() / pos.size();
  double total = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < per; ++j) total += std::max(0.0, margin + neg[i * per + j] - pos[i]);
  return total;
}

// Tape view of an embedding table: re, im, rel_re, rel_im.
struct EmbeddingVars {
  Var re, im, rel_re, rel_im;
};

inline EmbeddingVars bind_embeddings(Tape& tape, const ClassEmbeddingTable& table, bool trainable) {
  auto ps = table.params();
  auto bind = [&](const Parameter* p) { return trainable ? tape.param(*p) : tape.constant(p->value); };
  return {bind(ps[0]), bind(ps[1]), bind(ps[2]), bind(ps[3])};
}

// [n x 1] compatibility scores for a list of pairs.
inline Var pair_scores(const EmbeddingVars& e, std::span<const ClassPair> pairs) {
  using namespace ops;
  std::vector<std::size_t> ps, cs;
  for (auto [p, c] : pairs) {
    ps.push_back(p);
    cs.push_back(c);
  }
  auto transform = [&](std::vector<std::size_t> idx) {
    auto re = gather_rows(e.re, idx);
    auto im = gather_rows(e.im, std::move(idx));
    return std::pair{re * e.rel_re - im * e.rel_im, re * e.rel_im + im * e.rel_re};
  };
  auto [pr, pi] = transform(std::move(ps));
  auto [cr, ci] = transform(std::move(cs));
  auto dot = sum_axis(pr * cr + pi * ci, 1);
  auto np = sum_axis(pr * pr + pi * pi, 1);
  auto nc = sum_axis(cr * cr + ci * ci, 1);
  return div(dot, ops::sqrt(np * nc));
}

// Hinge sum over positive scores [P x 1] and their negatives [P x n].
inline Var che_margin_loss(Var pos, Var neg, double margin) {
  using namespace ops;
  return sum(relu(add_scalar(sub(neg, pos), margin)));
}

// Negatives for every true pair, laid out pair-major.
inline std::vector<ClassPair> sample_all_negatives(const ClassHierarchy& h,
                                                   std::span<const ClassPair> positives,
                                                   std::size_t per, Rng& rng) {
  std::vector<ClassPair> out;
  out.reserve(positives.size() * per);
  for (const auto& pair : positives) {
    auto negs = sample_negatives(h, pair, per, rng);
    out.insert(out.end(), negs.begin(), negs.end());
  }
  return out;
}

// Margin loss over all parent-child pairs with freshly drawn negatives.
inline Var che_loss_graph(const EmbeddingVars& e, const ClassHierarchy& h, std::size_t per,
                          double margin, Rng& rng) {
  const auto positives = h.parent_child_pairs();
  const auto negatives = sample_all_negatives(h, positives, per, rng);
  auto pos = pair_scores(e, positives);
  auto neg = ops::reshape(pair_scores(e, negatives), {positives.size(), per});
  return che_margin_loss(pos, neg, margin);
}

struct CheTrace {
  std::vector<double> loss;
};

inline ClassEmbeddingTable train_che(const ClassHierarchy& h, const CheConfig& cfg,
                                     CheTrace* trace = nullptr) {
  cfg.validate();
  Rng rng(cfg.seed);
  ClassEmbeddingTable table(h, cfg.dim, rng);
  if (h.parent_child_pairs().empty()) return table;
  Adam opt(table.params(), {.lr = cfg.lr, .beta1 = 0.5, .beta2 = 0.999});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    ParamBinding bound(tape, opt.params());
    EmbeddingVars e{bound[0], bound[1], bound[2], bound[3]};
    Var loss;
    try {
      loss = che_loss_graph(e, h, cfg.negatives_per_positive, cfg.margin, rng);
    } catch (const NonFiniteError& err) {
      throw NonFiniteError("train_che epoch " + std::to_string(epoch) + ": " + err.op());
    }
    if (trace) trace->loss.push_back(loss.value().item());
    tape.backward(loss);
    opt.step(bound.grads());
  }
  return table;
}

// Fraction of true pairs that outscore every one of `per` fresh negatives.
inline double ranking_accuracy(const ClassEmbeddingTable& table, const ClassHierarchy& h,
                               std::size_t per, std::uint64_t seed) {
  Rng rng(seed);
  const auto rel = table.relation();
  const auto positives = h.parent_child_pairs();
  if (positives.empty()) return 1.0;
  std::size_t wins = 0;
  for (const auto& pair : positives) {
    const double pos = pair_score(table.embedding(pair.first), rel, table.embedding(pair.second));
    bool all = true;
    for (const auto& [p, c] : sample_negatives(h, pair, per, rng)) {
      if (pair_score(table.embedding(p), rel, table.embedding(c)) >= pos) all = false;
    }
    wins += all ? 1 : 0;
  }
  return static_cast<double>(wins) / static_cast<double>(positives.size());
}

// Cosine similarity between classes in the relation-transformed space the
// compatibility score is defined in; entry (i, j) = pair_score(e_i, r, e_j).
inline std::vector<std::vector<double>> similarity_matrix(const ClassEmbeddingTable& table) {
  const auto n = table.size();
  const auto rel = table.relation();
  std::vector<ComplexVec> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(complex_transform(table.embedding(i), rel));
  std::vector<std::vector<double>> s(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i][j] = flat_cosine(t[i], t[j]);
  return s;
}

struct SiblingSimilarity {
  double sibling = 0.0;
  double non_sibling = 0.0;
  double gap() const { return sibling - non_sibling; }
};

// Mean leaf-leaf similarity (as in similarity_matrix) for pairs sharing a
// parent versus pairs that do not.
inline SiblingSimilarity sibling_similarity(const ClassEmbeddingTable& table,
                                            const ClassHierarchy& h) {
  double s = 0, ns = 0;
  std::size_t cs = 0, cns = 0;
  const auto& leaves = h.leaves();
  const auto sims = similarity_matrix(table);
  for (std::size_t a = 0; a < leaves.size(); ++a)
    for (std::size_t b = a + 1; b < leaves.size(); ++b) {
      const double sim = sims[leaves[a]][leaves[b]];
      if (h.node(leaves[a]).parent == h.node(leaves[b]).parent) {
        s += sim;
        ++cs;
      } else {
        ns += sim;
        ++cns;
      }
    }
  return {cs ? s / static_cast<double>(cs) : 0.0, cns ? ns / static_cast<double>(cns) : 0.0};
}

}  // namespace treegan
