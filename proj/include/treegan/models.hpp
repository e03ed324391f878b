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

// Networks: a two-stage conditional generator, per-resolution conditional
// discriminators and shared-trunk hierarchical classifiers. Everything is an
// MLP over flattened pixels.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "treegan/autodiff.hpp"
#include "treegan/checkpoint.hpp"
#include "treegan/embed.hpp"
#include "treegan/hierarchy.hpp"
#include "treegan/optim.hpp"
#include "treegan/rng.hpp"
#include "treegan/synthdata.hpp"

namespace treegan {

enum class Activation { kNone, kLeakyRelu, kSigmoid };

inline Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::kLeakyRelu:
      return ops::leaky_relu(x);
    case Activation::kSigmoid:
      return ops::sigmoid(x);
    case Activation::kNone:
      break;
  }
  return x;
}

// Fully connected stack. Weights are [in x out], biases [1 x out], both
// initialised uniform in +-1/sqrt(fan_in).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& prefix, std::size_t in, std::vector<std::size_t> hidden, std::size_t out,
      Activation hidden_act, Activation out_act, Rng& rng)
      : hidden_act_(hidden_act), out_act_(out_act) {
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
      Parameter w{prefix + ".w" + std::to_string(l), Tensor({dims[l], dims[l + 1]})};
      Parameter b{prefix + ".b" + std::to_string(l), Tensor({1, dims[l + 1]})};
      for (auto& v : w.value.data()) v = rng.uniform(-bound, bound);
      for (auto& v : b.value.data()) v = rng.uniform(-bound, bound);
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    }
  }

  std::size_t in_dim() const { return params_.front().value.rows(); }
  std::size_t out_dim() const { return params_.back().value.cols(); }
  std::size_t layers() const { return params_.size() / 2; }

  std::vector<Parameter*> params() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<const Parameter*> params() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params_) out.push_back(&p);
    return out;
  }

  // Leaf vars for the weights; constants when the net is frozen for this tape.
  std::vector<Var> bind(Tape& tape, bool trainable) const {
    std::vector<Var> out;
    for (const auto& p : params_) out.push_back(trainable ? tape.param(p) : tape.constant(p.value));
    return out;
  }

  Var forward(std::span<const Var> w, Var x) const {
    if (x.value().cols() != in_dim()) {
      throw ShapeError("mlp input width " + std::to_string(x.value().cols()) + ", expected " +
                       std::to_string(in_dim()));
    }
    for (std::size_t l = 0; l < layers(); ++l) {
      x = ops::add(ops::matmul(x, w[2 * l]), w[2 * l + 1]);
      x = activate(x, l + 1 == layers() ? out_act_ : hidden_act_);
    }
    return x;
  }

 private:
  std::vector<Parameter> params_;
  Activation hidden_act_ = Activation::kLeakyRelu;
  Activation out_act_ = Activation::kNone;
};

struct ModelConfig {
  std::size_t cond_dim = 32;  // 2D: flattened complex embedding
  std::size_t noise_dim = 32;
  std::vector<std::size_t> gen_hidden = {128, 128};
  std::vector<std::size_t> disc_hidden = {128, 128};
  std::vector<std::size_t> clf_trunk = {64, 64};
  std::size_t feature_width = 32;

  nlohmann::json to_json() const {
    return {{"cond_dim", cond_dim},       {"noise_dim", noise_dim},
            {"gen_hidden", gen_hidden},   {"disc_hidden", disc_hidden},
            {"clf_trunk", clf_trunk},     {"feature_width", feature_width}};
  }
  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.cond_dim = j.at("cond_dim").get<std::size_t>();
    c.noise_dim = j.at("noise_dim").get<std::size_t>();
    c.gen_hidden = j.at("gen_hidden").get<std::vector<std::size_t>>();
    c.disc_hidden = j.at("disc_hidden").get<std::vector<std::size_t>>();
    c.clf_trunk = j.at("clf_trunk").get<std::vector<std::size_t>>();
    c.feature_width = j.at("feature_width").get<std::size_t>();
    return c;
  }
  bool operator==(const ModelConfig&) const = default;
};

namespace detail {

inline Checkpoint pack(const std::string& kind, nlohmann::json meta,
                       const std::vector<const Parameter*>& params) {
  Checkpoint ck;
  meta["kind"] = kind;
  ck.metadata = meta.dump();
  for (const auto* p : params) ck.tensors.push_back(*p);
  return ck;
}

inline nlohmann::json unpack_meta(const Checkpoint& ck, const std::string& kind) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ck.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError("checkpoint metadata is not JSON: " + std::string(e.what()));
  }
  if (meta.value("kind", "") != kind) {
    throw CorruptFileError("checkpoint holds '" + meta.value("kind", "?") + "', expected '" + kind + "'");
  }
  return meta;
}

// Copies stored tensors into freshly built parameters, validating shapes.
inline void restore(const Checkpoint& ck, const std::vector<Parameter*>& params) {
  if (ck.tensors.size() != params.size()) {
    throw CorruptFileError("checkpoint has " + std::to_string(ck.tensors.size()) +
                           " tensors, architecture expects " + std::to_string(params.size()));
  }
  for (auto* p : params) {
    const Tensor& t = ck.get(p->name);
    if (t.shape() != p->value.shape()) {
      throw CorruptFileError("tensor '" + p->name + "' has shape " + shape_str(t.shape()) +
                             ", architecture expects " + shape_str(p->value.shape()));
    }
    p->value = t;
  }
}

inline bool same_values(const std::vector<const Parameter*>& a, const std::vector<const Parameter*>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i]->name == b[i]->name && a[i]->value == b[i]->value)) return false;
  return true;
}

}  // namespace detail

// Stage I: [e_c || z] -> 8x8 image.
class GeneratorStage1 {
 public:
  GeneratorStage1() = default;
  GeneratorStage1(const ModelConfig& cfg, Rng& rng)
      : cfg_(cfg),
        net_("g1", cfg.cond_dim + cfg.noise_dim, cfg.gen_hidden, kLoPixels, Activation::kLeakyRelu,
             Activation::kSigmoid, rng) {}

  const ModelConfig& config() const { return cfg_; }
  const Mlp& net() const { return net_; }
  std::vector<Parameter*> params() { return net_.params(); }
  std::vector<const Parameter*> params() const { return net_.params(); }

  Var forward(std::span<const Var> w, Var cond, Var noise) const {
    return net_.forward(w, ops::concat({cond, noise}, 1));
  }

  Checkpoint to_checkpoint() const { return detail::pack("generator_stage1", {{"arch", cfg_.to_json()}}, params()); }
  static GeneratorStage1 from_checkpoint(const Checkpoint& ck) {
    auto meta = detail::unpack_meta(ck, "generator_stage1");
    Rng rng(0);
    GeneratorStage1 g(ModelConfig::from_json(meta.at("arch")), rng);
    detail::restore(ck, g.params());
    return g;
  }
  bool operator==(const GeneratorStage1& o) const { return detail::same_values(params(), o.params()); }

 private:
  ModelConfig cfg_;
  Mlp net_;
};

// Stage II: [e_c || stage-I image] -> 16x16 image.
class GeneratorStage2 {
 public:
  GeneratorStage2() = default;
  GeneratorStage2(const ModelConfig& cfg, Rng& rng)
      : cfg_(cfg),
        net_("g2", cfg.cond_dim + kLoPixels, cfg.gen_hidden, kHiPixels, Activation::kLeakyRelu,
             Activation::kSigmoid, rng) {}

  const ModelConfig& config() const { return cfg_; }
  const Mlp& net() const { return net_; }
  std::vector<Parameter*> params() { return net_.params(); }
  std::vector<const Parameter*> params() const { return net_.params(); }

  Var forward(std::span<const Var> w, Var cond, Var low) const {
    return net_.forward(w, ops::concat({cond, low}, 1));
  }

  Checkpoint to_checkpoint() const { return detail::pack("generator_stage2", {{"arch", cfg_.to_json()}}, params()); }
  static GeneratorStage2 from_checkpoint(const Checkpoint& ck) {
    auto meta = detail::unpack_meta(ck, "generator_stage2");
    Rng rng(0);
    GeneratorStage2 g(ModelConfig::from_json(meta.at("arch")), rng);
    detail::restore(ck, g.params());
    return g;
  }
  bool operator==(const GeneratorStage2& o) const { return detail::same_values(params(), o.params()); }

 private:
  ModelConfig cfg_;
  Mlp net_;
};

// [image || e_c] -> one logit.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const ModelConfig& cfg, Resolution res, Rng& rng)
      : cfg_(cfg),
        res_(res),
        net_(res == Resolution::kLow ? "d8" : "d16", pixels(res) + cfg.cond_dim, cfg.disc_hidden, 1,
             Activation::kLeakyRelu, Activation::kNone, rng) {}

  Resolution resolution() const { return res_; }
  std::vector<Parameter*> params() { return net_.params(); }
  std::vector<const Parameter*> params() const { return net_.params(); }
  const Mlp& net() const { return net_; }

  Var forward(std::span<const Var> w, Var image, Var cond) const {
    if (image.value().cols() != pixels(res_)) throw ShapeError("discriminator: resolution mismatch");
    return net_.forward(w, ops::concat({image, cond}, 1));
  }

  Checkpoint to_checkpoint() const {
    return detail::pack("discriminator", {{"arch", cfg_.to_json()}, {"resolution", static_cast<int>(res_)}},
                        params());
  }
  static Discriminator from_checkpoint(const Checkpoint& ck) {
    auto meta = detail::unpack_meta(ck, "discriminator");
    Rng rng(0);
    Discriminator d(ModelConfig::from_json(meta.at("arch")), parse_resolution(meta.at("resolution").get<int>()), rng);
    detail::restore(ck, d.params());
    return d;
  }
  bool operator==(const Discriminator& o) const { return detail::same_values(params(), o.params()); }

 private:
  ModelConfig cfg_;
  Resolution res_ = Resolution::kLow;
  Mlp net_;
};

// Shared trunk (pixels -> ... -> F features, leaky ReLU throughout) and one
// linear head per level, head k emitting M_k logits.
class HierClassifier {
 public:
  HierClassifier() = default;
  HierClassifier(const ModelConfig& cfg, Resolution res, const ClassHierarchy& h, Rng& rng)
      : cfg_(cfg), res_(res) {
    const std::string tag = res == Resolution::kLow ? "c8" : "c16";
    trunk_ = Mlp(tag + ".trunk", pixels(res), cfg.clf_trunk, cfg.feature_width, Activation::kLeakyRelu,
                 Activation::kLeakyRelu, rng);
    for (int k = 1; k <= h.depth(); ++k) {
      heads_.emplace_back(tag + ".head" + std::to_string(k), cfg.feature_width, std::vector<std::size_t>{},
                          h.level_size(k), Activation::kNone, Activation::kNone, rng);
      head_sizes_.push_back(h.level_size(k));
    }
  }

  Resolution resolution() const { return res_; }
  std::size_t feature_width() const { return cfg_.feature_width; }
  std::size_t levels() const { return heads_.size(); }
  const std::vector<std::size_t>& head_sizes() const { return head_sizes_; }
  const ModelConfig& config() const { return cfg_; }

  std::vector<Parameter*> params() {
    auto out = trunk_.params();
    for (auto& hd : heads_)
      for (auto* p : hd.params()) out.push_back(p);
    return out;
  }
  std::vector<const Parameter*> params() const {
    auto out = trunk_.params();
    for (const auto& hd : heads_)
      for (const auto* p : hd.params()) out.push_back(p);
    return out;
  }

  struct Bound {
    std::vector<Var> trunk;
    std::vector<std::vector<Var>> heads;
  };

  Bound bind(Tape& tape, bool trainable) const {
    Bound b{trunk_.bind(tape, trainable), {}};
    for (const auto& hd : heads_) b.heads.push_back(hd.bind(tape, trainable));
    return b;
  }

  void check_input(Var x) const {
    if (x.value().cols() != pixels(res_)) {
      throw ShapeError("classifier expects " + std::to_string(pixels(res_)) + "-pixel images, got " +
                       std::to_string(x.value().cols()));
    }
  }

  Var features(const Bound& b, Var x) const {
    check_input(x);
    return trunk_.forward(b.trunk, x);
  }

  std::vector<Var> heads_from_features(const Bound& b, Var feats) const {
    std::vector<Var> out;
    for (std::size_t k = 0; k < heads_.size(); ++k) out.push_back(heads_[k].forward(b.heads[k], feats));
    return out;
  }

  std::vector<Var> logits(const Bound& b, Var x) const { return heads_from_features(b, features(b, x)); }

  Checkpoint to_checkpoint(const ClassHierarchy& h) const {
    return detail::pack("hier_classifier",
                        {{"arch", cfg_.to_json()},
                         {"resolution", static_cast<int>(res_)},
                         {"hierarchy", h.serialize()}},
                        params());
  }

  // Rebuilds and validates against the stored hierarchy text.
  static HierClassifier from_checkpoint(const Checkpoint& ck, const ClassHierarchy* expect = nullptr) {
    auto meta = detail::unpack_meta(ck, "hier_classifier");
    const auto h = parse_hierarchy(meta.at("hierarchy").get<std::string>());
    if (expect && !(h == *expect)) throw CorruptFileError("classifier was trained on a different hierarchy");
    Rng rng(0);
    HierClassifier c(ModelConfig::from_json(meta.at("arch")), parse_resolution(meta.at("resolution").get<int>()),
                     h, rng);
    detail::restore(ck, c.params());
    return c;
  }

  bool operator==(const HierClassifier& o) const { return detail::same_values(params(), o.params()); }

 private:
  ModelConfig cfg_;
  Resolution res_ = Resolution::kLow;
  Mlp trunk_;
  std::vector<Mlp> heads_;
  std::vector<std::size_t> head_sizes_;
};

struct GeneratedImages {
  Tensor lo;  // [n x 64]
  Tensor hi;  // [n x 256]
};

// Two-stage generation for conditioning rows `cond` and noise rows `noise`.
inline GeneratedImages generate(const GeneratorStage1& g1, const GeneratorStage2& g2, const Tensor& cond,
                                const Tensor& noise) {
  if (cond.cols() != g1.config().cond_dim || noise.cols() != g1.config().noise_dim ||
      cond.rows() != noise.rows()) {
    throw ShapeError("generate: conditioning " + shape_str(cond.shape()) + " / noise " +
                     shape_str(noise.shape()) + " do not match the generator");
  }
  Tape tape;
  auto w1 = g1.net().bind(tape, false);
  auto w2 = g2.net().bind(tape, false);
  auto c = tape.constant(cond);
  auto lo = g1.forward(w1, c, tape.constant(noise));
  auto hi = g2.forward(w2, c, lo);
  return {lo.value(), hi.value()};
}

// Per-target-row head indices: targets[k][i] = level index of a_{k+1}(y_i).
inline std::vector<std::vector<std::size_t>> level_targets(const ClassHierarchy& h,
                                                           std::span<const ClassId> leaves) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(h.depth()));
  for (auto y : leaves) {
    if (!h.is_leaf(y)) throw std::invalid_argument("class " + std::to_string(y) + " is not a leaf");
    for (int k = 1; k <= h.depth(); ++k)
      out[static_cast<std::size_t>(k - 1)].push_back(h.level_index(h.ancestor(y, k)));
  }
  return out;
}

// Batch mean of sum_k CE(head_k, a_k(y)).
inline Var hier_loss_graph(std::span<const Var> head_logits, const ClassHierarchy& h,
                           std::span<const ClassId> leaves) {
  const auto targets = level_targets(h, leaves);
  if (head_logits.size() != targets.size()) throw ShapeError("hier_loss: head count differs from depth");
  Var total = ops::softmax_cross_entropy(head_logits[0], targets[0]);
  for (std::size_t k = 1; k < head_logits.size(); ++k)
    total = ops::add(total, ops::softmax_cross_entropy(head_logits[k], targets[k]));
  return total;
}

inline std::vector<Tensor> classifier_logits(const HierClassifier& clf, const Tensor& images) {
  Tape tape;
  auto b = clf.bind(tape, false);
  std::vector<Tensor> out;
  for (auto v : clf.logits(b, tape.constant(images))) out.push_back(v.value());
  return out;
}

inline std::vector<std::vector<double>> classifier_logits(const HierClassifier& clf,
                                                          std::span<const double> image) {
  auto logits = classifier_logits(clf, Tensor({1, image.size()}, {image.begin(), image.end()}));
  std::vector<std::vector<double>> out;
  for (const auto& t : logits) out.push_back(t.storage());
  return out;
}

inline Tensor classifier_features(const HierClassifier& clf, const Tensor& images) {
  Tape tape;
  auto b = clf.bind(tape, false);
  return clf.features(b, tape.constant(images)).value();
}

inline double hier_loss(const HierClassifier& clf, std::span<const double> image, ClassId y,
                        const ClassHierarchy& h) {
  Tape tape;
  auto b = clf.bind(tape, false);
  auto logits = clf.logits(b, tape.constant(Tensor({1, image.size()}, {image.begin(), image.end()})));
  const ClassId ys[] = {y};
  return hier_loss_graph(logits, h, ys).value().item();
}

// Argmax (lowest index on ties) of one logit row.
inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

// Head-wise argmax mapped to class ids, one path per row of logits.
inline std::vector<std::vector<ClassId>> paths_from_logits(std::span<const Tensor> head_logits,
                                                           const ClassHierarchy& h) {
  const std::size_t n = head_logits.empty() ? 0 : head_logits[0].rows();
  std::vector<std::vector<ClassId>> out(n);
  for (std::size_t k = 0; k < head_logits.size(); ++k) {
    const auto& lvl = h.level_classes(static_cast<int>(k) + 1);
    const auto& t = head_logits[k];
    for (std::size_t i = 0; i < n; ++i)
      out[i].push_back(lvl[argmax(t.data().subspan(i * t.cols(), t.cols()))]);
  }
  return out;
}

inline std::vector<ClassId> predict_path(const HierClassifier& clf, std::span<const double> image,
                                         const ClassHierarchy& h) {
  auto logits = classifier_logits(clf, Tensor({1, image.size()}, {image.begin(), image.end()}));
  return paths_from_logits(logits, h).at(0);
}

inline std::vector<std::vector<ClassId>> predict_paths(const HierClassifier& clf, const Tensor& images,
                                                       const ClassHierarchy& h) {
  return paths_from_logits(classifier_logits(clf, images), h);
}

struct ClassifierTrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  // Negative control: train on uniformly permuted labels.
  bool shuffle_labels = false;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Minimises mean hier_loss over the training split with Adam. The returned
// classifier is meant to be used frozen.
inline HierClassifier train_classifier(const Dataset& data, Resolution res, const ModelConfig& arch,
                                       const ClassifierTrainConfig& cfg,
                                       std::vector<double>* loss_trace = nullptr) {
  const auto& h = data.spec.hierarchy;
  Rng rng(cfg.seed);
  HierClassifier clf(arch, res, h, rng);
  std::vector<ClassId> labels;
  for (const auto& s : data.train) labels.push_back(s.leaf);
  if (cfg.shuffle_labels) shuffle(labels.begin(), labels.end(), rng);
  const Tensor all = images_tensor(data.train, res);
  const auto px = pixels(res);
  Adam opt(clf.params(), {.lr = cfg.lr, .beta1 = 0.9, .beta2 = 0.999});
  BatchStream stream(data.train.size(), cfg.batch_size, rng.next_u64());
  const std::size_t steps = cfg.epochs * stream.batches_per_epoch();
  for (std::size_t step = 0; step < steps; ++step) {
    const auto idx = stream.next();
    Tensor x({idx.size(), px});
    std::vector<ClassId> y;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy_n(all.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * px), px,
                  x.data().begin() + static_cast<std::ptrdiff_t>(i * px));
      y.push_back(labels[idx[i]]);
    }
    Tape tape;
    auto b = clf.bind(tape, true);
    Var loss;
    try {
      loss = hier_loss_graph(clf.logits(b, tape.constant(std::move(x))), h, y);
    } catch (const NonFiniteError& e) {
      throw DivergenceError("classifier training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    if (loss_trace) loss_trace->push_back(loss.value().item());
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (const auto& v : b.trunk) grads.push_back(tape.grad(v));
    for (const auto& hd : b.heads)
      for (const auto& v : hd) grads.push_back(tape.grad(v));
    opt.step(grads);
  }
  return clf;
}

struct ClassifierAccuracy {
  double leaf = 0.0;
  std::vector<double> per_level;  // levels 1..K
  double path_consistency = 0.0;  // predicted parent chain is a real path
  std::size_t samples = 0;
};

inline ClassifierAccuracy evaluate_classifier(const HierClassifier& clf, const std::vector<Sample>& samples,
                                              const ClassHierarchy& h) {
  ClassifierAccuracy acc;
  acc.samples = samples.size();
  acc.per_level.assign(static_cast<std::size_t>(h.depth()), 0.0);
  if (samples.empty()) return acc;
  const auto paths = predict_paths(clf, images_tensor(samples, clf.resolution()), h);
  std::size_t leaf_ok = 0, consistent = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto truth = h.ancestor_path(samples[i].leaf);
    for (std::size_t k = 0; k < truth.size(); ++k) acc.per_level[k] += paths[i][k] == truth[k] ? 1.0 : 0.0;
    leaf_ok += paths[i].back() == samples[i].leaf ? 1 : 0;
    bool chain = true;
    for (std::size_t k = 1; k < paths[i].size(); ++k)
      chain = chain && h.is_parent_child(paths[i][k - 1], paths[i][k]);
    consistent += chain ? 1 : 0;
  }
  const double n = static_cast<double>(samples.size());
  acc.leaf = static_cast<double>(leaf_ok) / n;
  for (auto& v : acc.per_level) v /= n;
  acc.path_consistency = static_cast<double>(consistent) / n;
  return acc;
}

struct AdversarialLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

// d = BCE(real, 1) + BCE(fake, 0); g = BCE(fake, 1) (non-saturating).
inline Var discriminator_loss_graph(Var real_logits, Var fake_logits) {
  return ops::add(ops::binary_cross_entropy_with_logits(real_logits, Tensor(real_logits.shape(), 1.0)),
                  ops::binary_cross_entropy_with_logits(fake_logits, Tensor(fake_logits.shape(), 0.0)));
}

inline Var generator_loss_graph(Var fake_logits) {
  return ops::binary_cross_entropy_with_logits(fake_logits, Tensor(fake_logits.shape(), 1.0));
}

inline AdversarialLosses adversarial_losses_from_logits(const Tensor& real_logits, const Tensor& fake_logits) {
  Tape tape;
  auto r = tape.constant(real_logits), f = tape.constant(fake_logits);
  return {discriminator_loss_graph(r, f).value().item(), generator_loss_graph(f).value().item()};
}

inline AdversarialLosses adversarial_losses(const Discriminator& d, const Tensor& real, const Tensor& fake,
                                            const Tensor& cond) {
  if (real.cols() != fake.cols()) throw ShapeError("adversarial_losses: real/fake resolution mismatch");
  if (cond.rows() != real.rows() || cond.rows() != fake.rows()) {
    throw ShapeError("adversarial_losses: conditioning rows must match both batches");
  }
  Tape tape;
  auto w = d.net().bind(tape, false);
  auto c = tape.constant(cond);
  auto rl = d.forward(w, tape.constant(real), c);
  auto fl = d.forward(w, tape.constant(fake), c);
  return {discriminator_loss_graph(rl, fl).value().item(), generator_loss_graph(fl).value().item()};
}

struct ModelSet {
  GeneratorStage1 g1;
  GeneratorStage2 g2;
  Discriminator d8;
  Discriminator d16;
  HierClassifier c8;
  HierClassifier c16;
  ClassEmbeddingTable embeddings;

  void validate() const {
    if (d8.resolution() != Resolution::kLow || c8.resolution() != Resolution::kLow ||
        d16.resolution() != Resolution::kHigh || c16.resolution() != Resolution::kHigh) {
      throw std::invalid_argument("model set: resolution pairing is inconsistent");
    }
    if (2 * embeddings.dim() != g1.config().cond_dim) {
      throw std::invalid_argument("model set: embedding width does not match generator conditioning");
    }
  }
};

}  // namespace treegan
