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

// Run configuration file: one JSON object with optional sections hierarchy,
// dataset, che, classifier, gan and eval. Unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "treegan/io.hpp"
#include "treegan/training.hpp"

namespace treegan {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EvalConfig {
  std::size_t samples_per_class = 500;
  std::uint64_t seed = 0;
};

struct RunConfig {
  DatasetSpec dataset;
  CheConfig che;
  ClassifierTrainConfig classifier;
  ModelConfig classifier_arch;
  TrainConfig gan;
  EvalConfig eval;
  nlohmann::json source = nlohmann::json::object();  // the document as given

  // Embedding width and margin loss settings are shared between the
  // stand-alone encoder and the joint modes.
  TrainConfig gan_config(TrainMode mode) const {
    TrainConfig t = gan;
    t.mode = mode;
    t.embed_dim = che.dim;
    t.margin = che.margin;
    t.negatives_per_positive = che.negatives_per_positive;
    return t;
  }

  void override_seed(std::uint64_t s) {
    dataset.seed = che.seed = classifier.seed = gan.seed = eval.seed = s;
  }

  nlohmann::json resolved() const {
    auto g = gan.to_json();
    g.erase("mode");
    return {{"dataset", dataset.to_json()},
            {"che",
             {{"dim", che.dim},
              {"margin", che.margin},
              {"negatives_per_positive", che.negatives_per_positive},
              {"lr", che.lr},
              {"epochs", che.epochs},
              {"seed", che.seed}}},
            {"classifier",
             {{"lr", classifier.lr},
              {"epochs", classifier.epochs},
              {"batch_size", classifier.batch_size},
              {"seed", classifier.seed},
              {"trunk", classifier_arch.clf_trunk},
              {"feature_width", classifier_arch.feature_width}}},
            {"gan", g},
            {"eval", {{"samples_per_class", eval.samples_per_class}, {"seed", eval.seed}}}};
  }
};

namespace detail {

// Reads keys out of one object section, rejecting anything unread.
class Section {
 public:
  Section(const nlohmann::json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = root.at(name);
    if (!obj_.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type: " + obj_.at(key).dump());
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
  }

 private:
  std::string name_;
  nlohmann::json obj_ = nlohmann::json::object();
  std::set<std::string> seen_;
};

}  // namespace detail

// `base` resolves a relative hierarchy.file.
inline RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base = {}) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kSections = {"hierarchy", "dataset", "che", "classifier", "gan", "eval"};
  for (const auto& [k, v] : doc.items())
    if (!kSections.count(k)) throw ConfigError("unknown config section '" + k + "'");
  RunConfig c;
  c.source = doc;

  detail::Section hs(doc, "hierarchy");
  std::string text, file;
  hs.read("text", text);
  hs.read("file", file);
  hs.finish();
  if (!text.empty() && !file.empty()) throw ConfigError("hierarchy: give either 'text' or 'file', not both");
  try {
    if (!file.empty()) {
      const std::filesystem::path p = std::filesystem::path(file).is_absolute() ? std::filesystem::path(file) : base / file;
      c.dataset.hierarchy = parse_hierarchy(read_text_file(p));
    } else if (!text.empty()) {
      c.dataset.hierarchy = parse_hierarchy(text);
    }
  } catch (const ParseError& e) {
    throw ConfigError(std::string("hierarchy: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("hierarchy: ") + e.what());
  }

  detail::Section ds(doc, "dataset");
  ds.read("samples_per_leaf", c.dataset.samples_per_leaf);
  const bool explicit_noise = ds.has("level_noise");
  ds.read("level_noise", c.dataset.level_noise);
  ds.read("observation_noise", c.dataset.observation_noise);
  ds.read("seed", c.dataset.seed);
  ds.finish();
  if (!explicit_noise && c.dataset.level_noise.size() != static_cast<std::size_t>(c.dataset.hierarchy.depth()) + 1) {
    throw ConfigError("dataset.level_noise must be given for a hierarchy of depth " +
                      std::to_string(c.dataset.hierarchy.depth()));
  }

  detail::Section cs(doc, "che");
  cs.read("dim", c.che.dim);
  cs.read("margin", c.che.margin);
  cs.read("negatives_per_positive", c.che.negatives_per_positive);
  cs.read("lr", c.che.lr);
  cs.read("epochs", c.che.epochs);
  cs.read("seed", c.che.seed);
  cs.finish();

  detail::Section ks(doc, "classifier");
  ks.read("lr", c.classifier.lr);
  ks.read("epochs", c.classifier.epochs);
  ks.read("batch_size", c.classifier.batch_size);
  ks.read("seed", c.classifier.seed);
  ks.read("trunk", c.classifier_arch.clf_trunk);
  ks.read("feature_width", c.classifier_arch.feature_width);
  ks.finish();

  detail::Section gs(doc, "gan");
  gs.read("lambda1", c.gan.lambda1);
  gs.read("lambda2", c.gan.lambda2);
  gs.read("batch_size", c.gan.batch_size);
  gs.read("gan_lr", c.gan.gan_lr);
  gs.read("beta1", c.gan.beta1);
  gs.read("beta2", c.gan.beta2);
  gs.read("embed_lr", c.gan.embed_lr);
  gs.read("steps_per_stage", c.gan.steps_per_stage);
  gs.read("eval_every", c.gan.eval_every);
  gs.read("eval_samples", c.gan.eval_samples);
  gs.read("gen_hidden", c.gan.gen_hidden);
  gs.read("disc_hidden", c.gan.disc_hidden);
  gs.read("seed", c.gan.seed);
  gs.finish();

  detail::Section es(doc, "eval");
  es.read("samples_per_class", c.eval.samples_per_class);
  es.read("seed", c.eval.seed);
  es.finish();

  try {
    c.dataset.validate();
    c.che.validate();
    c.gan_config(TrainMode::kTreeGan).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.classifier.epochs == 0 || c.classifier.batch_size == 0 || !(c.classifier.lr > 0) ||
      c.classifier_arch.feature_width == 0) {
    throw ConfigError("classifier: lr, epochs, batch_size and feature_width must be positive");
  }
  if (c.eval.samples_per_class < 2) throw ConfigError("eval.samples_per_class must be at least 2");
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

}  // namespace treegan
