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

// Quality measures computed in the feature space of a frozen hierarchical
// classifier: Frechet distance, inception score and hierarchy consistency.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "treegan/models.hpp"

namespace treegan {

class NumericalDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Eigenvalues at or above this are treated as zero rather than rejected.
inline constexpr double kPsdTolerance = -1e-8;

// Images of one leaf at one stage. `samples` is [count x pixels] and is
// meaningless when count == 0 (tensors have no empty shape).
struct GeneratedBatch {
  Tensor samples;
  std::size_t count = 0;
  ClassId leaf = 0;
  int stage = 2;

  std::size_t size() const { return count; }
  Resolution resolution() const { return stage == 1 ? Resolution::kLow : Resolution::kHigh; }
};

inline Tensor repeat_row(std::span<const double> row, std::size_t n) {
  Tensor out({n, row.size()});
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) std::copy(row.begin(), row.end(), dst.begin() + static_cast<std::ptrdiff_t>(i * row.size()));
  return out;
}

// n images of leaf c from standard-normal noise seeded by (seed, c).
inline GeneratedBatch generate_set(const ModelSet& m, const ClassHierarchy& h, ClassId c, std::size_t n,
                                   std::uint64_t seed, int stage = 2) {
  if (c >= h.size() || !h.is_leaf(c)) {
    throw std::invalid_argument("generate_set: class " + std::to_string(c) + " is not a leaf");
  }
  if (stage != 1 && stage != 2) throw std::invalid_argument("generate_set: stage must be 1 or 2");
  GeneratedBatch out;
  out.leaf = c;
  out.stage = stage;
  out.count = n;
  if (n == 0) return out;
  Rng rng = Rng(seed).fork(c);
  Tensor noise({n, m.g1.config().noise_dim});
  for (auto& v : noise.data()) v = rng.normal();
  auto imgs = generate(m.g1, m.g2, repeat_row(leaf_condition_vector(m.embeddings, c), n), noise);
  out.samples = stage == 1 ? std::move(imgs.lo) : std::move(imgs.hi);
  return out;
}

class InsufficientSamplesError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;

  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
};

// Penultimate trunk activations, one row per image.
inline Tensor feature_extract(const HierClassifier& clf, const Tensor& images) {
  return classifier_features(clf, images);
}

// Sample mean and unbiased covariance, symmetrised.
inline GaussianStats fit_gaussian(const Tensor& features) {
  const std::size_t n = features.rows(), f = features.cols();
  if (n < 2) throw InsufficientSamplesError("fit_gaussian needs at least 2 samples, got " + std::to_string(n));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      features.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  GaussianStats s;
  s.mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mu.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  s.sigma = 0.5 * (cov + cov.transpose());
  return s;
}

namespace detail {

// Eigenvalues of a symmetric matrix, tolerance-checked and clamped to >= 0.
inline Eigen::VectorXd psd_eigenvalues(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, const char* what) {
  if (es.info() != Eigen::Success) throw NumericalDomainError(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (!std::isfinite(lam[i]) || lam[i] < kPsdTolerance) {
      throw NumericalDomainError(std::string(what) + " is not positive semi-definite (eigenvalue " +
                                 std::to_string(lam[i]) + ")");
    }
    lam[i] = std::max(lam[i], 0.0);
  }
  return lam;
}

}  // namespace detail

// ||mu_a - mu_b||^2 + Tr(Sa) + Tr(Sb) - 2 Tr((Sa^1/2 Sb Sa^1/2)^1/2).
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim() || a.sigma.rows() != a.mu.size() || b.sigma.rows() != b.mu.size()) {
    throw ShapeError("frechet_distance: dimension " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a.sigma);
  const Eigen::VectorXd la = detail::psd_eigenvalues(ea, "first covariance");
  detail::psd_eigenvalues(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b.sigma, Eigen::EigenvaluesOnly),
                          "second covariance");
  const Eigen::MatrixXd root_a = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd inner = root_a * b.sigma * root_a;
  inner = 0.5 * (inner + inner.transpose());
  const Eigen::VectorXd li =
      detail::psd_eigenvalues(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(inner, Eigen::EigenvaluesOnly),
                              "covariance product");
  const double d = (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * li.cwiseSqrt().sum();
  return std::max(d, 0.0);
}

// exp(mean_x KL(p(y|x) || p(y))) over rows of probabilities.
inline double inception_score(const Tensor& probs) {
  const std::size_t n = probs.rows(), m = probs.cols();
  std::vector<double> marginal(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double p = probs.at(i, j);
      if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("inception_score: row " + std::to_string(i) + " has an invalid probability");
      total += p;
      marginal[j] += p / static_cast<double>(n);
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw std::invalid_argument("inception_score: row " + std::to_string(i) + " sums to " + std::to_string(total));
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double p = probs.at(i, j);
      if (p > 0.0) kl += p * (std::log(p) - std::log(marginal[j]));
    }
  return std::max(1.0, std::exp(kl / static_cast<double>(n)));
}

// Leaf-head softmax rows.
inline Tensor leaf_probabilities(const HierClassifier& clf, const Tensor& images) {
  Tape tape;
  auto b = clf.bind(tape, false);
  auto heads = clf.logits(b, tape.constant(images));
  return ops::softmax(heads.back(), 1).value();
}

// Fraction of samples whose predicted path equals the leaf's ancestor path
// at every level; 0 for an empty batch.
inline double consistency_rate(const HierClassifier& clf, const GeneratedBatch& batch, const ClassHierarchy& h) {
  if (batch.size() == 0) return 0.0;
  if (batch.resolution() != clf.resolution()) throw ShapeError("consistency_rate: resolution mismatch");
  const auto truth = h.ancestor_path(batch.leaf);
  std::size_t ok = 0;
  for (const auto& path : predict_paths(clf, batch.samples, h)) ok += path == truth ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(batch.size());
}

struct LeafMetrics {
  std::string name;  // "Average" for the summary row
  ClassId leaf = 0;
  double desk_fid = 0.0;
  double desk_is = 1.0;
  double consistency_rate = 0.0;
  std::size_t n_generated = 0;
  std::size_t n_real = 0;
};

struct MetricsReport {
  int stage = 2;
  std::string feature_source;
  std::vector<LeafMetrics> leaves;
  LeafMetrics average;

  std::string to_csv() const {
    std::string out = "class,desk_fid,desk_is,consistency_rate\n";
    char buf[160];
    auto row = [&](const LeafMetrics& m) {
      std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.10g\n", m.desk_fid, m.desk_is, m.consistency_rate);
      out += m.name + buf;
    };
    for (const auto& m : leaves) row(m);
    row(average);
    return out;
  }

  nlohmann::json to_json() const {
    auto leaf_json = [](const LeafMetrics& m) {
      return nlohmann::json{{"class", m.name},           {"desk_fid", m.desk_fid},
                            {"desk_is", m.desk_is},      {"consistency_rate", m.consistency_rate},
                            {"n_generated", m.n_generated}, {"n_real", m.n_real}};
    };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& m : leaves) rows.push_back(leaf_json(m));
    return {{"stage", stage}, {"feature_source", feature_source}, {"classes", rows}, {"average", leaf_json(average)}};
  }
};

inline LeafMetrics average_of(const std::vector<LeafMetrics>& rows) {
  LeafMetrics avg;
  avg.name = "Average";
  if (rows.empty()) return avg;
  avg.desk_is = 0.0;
  for (const auto& m : rows) {
    avg.desk_fid += m.desk_fid;
    avg.desk_is += m.desk_is;
    avg.consistency_rate += m.consistency_rate;
    avg.n_generated += m.n_generated;
    avg.n_real += m.n_real;
  }
  const double n = static_cast<double>(rows.size());
  avg.desk_fid /= n;
  avg.desk_is /= n;
  avg.consistency_rate /= n;
  return avg;
}

inline const HierClassifier& classifier_for_stage(const ModelSet& m, int stage) {
  return stage == 1 ? m.c8 : m.c16;
}

// Per-leaf metrics of generated samples against the real test split.
inline MetricsReport evaluate(const ModelSet& m, const Dataset& data, std::size_t n_per_class = 500,
                              std::uint64_t seed = 0, int stage = 2, std::string feature_source = {}) {
  const auto& h = data.spec.hierarchy;
  const auto& clf = classifier_for_stage(m, stage);
  const Resolution res = clf.resolution();
  MetricsReport report;
  report.stage = stage;
  report.feature_source = std::move(feature_source);
  for (ClassId leaf : h.leaves()) {
    const auto idx = data.indices_of(Split::kTest, leaf);
    if (idx.size() < 2) {
      throw InsufficientSamplesError("class '" + h.name(leaf) + "' has " + std::to_string(idx.size()) +
                                     " test samples; at least 2 are needed");
    }
    if (n_per_class < 2) throw InsufficientSamplesError("evaluation needs at least 2 generated samples per class");
    const auto real = fit_gaussian(feature_extract(clf, images_tensor(data.test, idx, res)));
    const auto gen = generate_set(m, h, leaf, n_per_class, seed, stage);
    LeafMetrics lm;
    lm.name = h.name(leaf);
    lm.leaf = leaf;
    lm.desk_fid = frechet_distance(fit_gaussian(feature_extract(clf, gen.samples)), real);
    lm.desk_is = inception_score(leaf_probabilities(clf, gen.samples));
    lm.consistency_rate = consistency_rate(clf, gen, h);
    lm.n_generated = gen.size();
    lm.n_real = idx.size();
    report.leaves.push_back(lm);
  }
  report.average = average_of(report.leaves);
  return report;
}

// Mean over leaves of the distance between the two halves of each leaf's
// test samples, in the feature space of `clf`.
inline double real_vs_real_fid(const HierClassifier& clf, const Dataset& data) {
  const auto& h = data.spec.hierarchy;
  double total = 0.0;
  for (ClassId leaf : h.leaves()) {
    const auto idx = data.indices_of(Split::kTest, leaf);
    if (idx.size() < 4) throw InsufficientSamplesError("class '" + h.name(leaf) + "' has too few test samples to halve");
    const std::size_t half = idx.size() / 2;
    const std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
    const std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
    total += frechet_distance(fit_gaussian(feature_extract(clf, images_tensor(data.test, a, clf.resolution()))),
                              fit_gaussian(feature_extract(clf, images_tensor(data.test, b, clf.resolution()))));
  }
  return total / static_cast<double>(h.leaves().size());
}

}  // namespace treegan
