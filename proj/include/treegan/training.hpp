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

// Joint adversarial training of the two-stage generator with the class
// embeddings and the frozen hierarchical classifiers, in four modes.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "treegan/metrics.hpp"

namespace treegan {

// TREEGAN: joint embeddings + post constraint. NPC: joint embeddings,
// lambda1 = 0. SEG: pre-trained embeddings frozen, lambda1 = 0. FLAT: fixed
// random embeddings, no embedding loss, lambda1 = 0.
enum class TrainMode { kTreeGan, kNpc, kSeg, kFlat };

inline std::string mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kTreeGan:
      return "treegan";
    case TrainMode::kNpc:
      return "npc";
    case TrainMode::kSeg:
      return "seg";
    case TrainMode::kFlat:
      return "flat";
  }
  return "?";
}

inline TrainMode parse_mode(std::string_view s) {
  for (auto m : {TrainMode::kTreeGan, TrainMode::kNpc, TrainMode::kSeg, TrainMode::kFlat})
    if (s == mode_name(m)) return m;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (expected treegan, npc, seg or flat)");
}

struct TrainConfig {
  TrainMode mode = TrainMode::kTreeGan;
  double lambda1 = 15.0;
  double lambda2 = 1.0;
  std::size_t batch_size = 64;
  double gan_lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double embed_lr = 2e-3;
  std::size_t embed_dim = 16;
  std::size_t negatives_per_positive = 10;
  double margin = 0.5;
  std::size_t steps_per_stage = 3000;
  std::size_t eval_every = 500;
  std::size_t eval_samples = 500;
  std::vector<std::size_t> gen_hidden = {128, 128};
  std::vector<std::size_t> disc_hidden = {128, 128};
  std::uint64_t seed = 0;

  bool joint_embeddings() const { return mode == TrainMode::kTreeGan || mode == TrainMode::kNpc; }
  double effective_lambda1() const { return mode == TrainMode::kTreeGan ? lambda1 : 0.0; }

  ModelConfig model_config() const {
    ModelConfig a;
    a.cond_dim = a.noise_dim = 2 * embed_dim;
    a.gen_hidden = gen_hidden;
    a.disc_hidden = disc_hidden;
    return a;
  }

  AdamConfig gan_adam() const { return {.lr = gan_lr, .beta1 = beta1, .beta2 = beta2}; }
  AdamConfig embed_adam() const { return {.lr = embed_lr, .beta1 = beta1, .beta2 = beta2}; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive(gan_lr, "gan_lr");
    positive(embed_lr, "embed_lr");
    positive(margin, "margin");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw std::invalid_argument("lambda1 and lambda2 must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam betas must lie in [0, 1)");
    }
    if (batch_size == 0 || embed_dim == 0 || negatives_per_positive == 0 || steps_per_stage == 0) {
      throw std::invalid_argument("batch_size, embed_dim, negatives_per_positive and steps_per_stage must be positive");
    }
    if (eval_every == 0) throw std::invalid_argument("eval_every must be positive");
    if (eval_samples < 2) throw std::invalid_argument("eval_samples must be at least 2");
  }

  nlohmann::json to_json() const {
    return {{"mode", mode_name(mode)},
            {"lambda1", lambda1},
            {"lambda2", lambda2},
            {"batch_size", batch_size},
            {"gan_lr", gan_lr},
            {"beta1", beta1},
            {"beta2", beta2},
            {"embed_lr", embed_lr},
            {"embed_dim", embed_dim},
            {"negatives_per_positive", negatives_per_positive},
            {"margin", margin},
            {"steps_per_stage", steps_per_stage},
            {"eval_every", eval_every},
            {"eval_samples", eval_samples},
            {"gen_hidden", gen_hidden},
            {"disc_hidden", disc_hidden},
            {"seed", seed}};
  }
};

// Mean over the batch of hier_loss with every row labelled `leaf`.
inline Var hierarchy_penalty_graph(const HierClassifier& clf, const HierClassifier::Bound& b, Var images,
                                   ClassId leaf, const ClassHierarchy& h) {
  const std::vector<ClassId> labels(images.value().rows(), leaf);
  return hier_loss_graph(clf.logits(b, images), h, labels);
}

inline double hierarchy_penalty(const HierClassifier& clf, const GeneratedBatch& batch, const ClassHierarchy& h) {
  if (batch.resolution() != clf.resolution()) throw ShapeError("hierarchy_penalty: resolution mismatch");
  if (batch.size() == 0) throw std::invalid_argument("hierarchy_penalty: empty batch");
  Tape tape;
  auto b = clf.bind(tape, false);
  return hierarchy_penalty_graph(clf, b, tape.constant(batch.samples), batch.leaf, h).value().item();
}

struct OptimizerStates {
  AdamState g1, g2, d8, d16, embeddings;
};

struct StepLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double h_penalty = 0.0;
  double che_loss = 0.0;
};

// Draws shared by the three phases of one round.
struct StepInputs {
  int stage = 1;
  ClassId leaf = 0;
  Tensor real;   // [B x pixels(stage)]
  Tensor cond;   // [B x 2D], e_c repeated
  Tensor noise;  // [B x 2D]
};

inline StepInputs make_step_inputs(const ModelSet& m, int stage, ClassId leaf, Tensor real, Rng& rng) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  if (real.cols() != (stage == 1 ? kLoPixels : kHiPixels)) throw ShapeError("real batch does not match stage");
  StepInputs in{stage, leaf, std::move(real), {}, {}};
  const std::size_t b = in.real.rows();
  in.cond = repeat_row(leaf_condition_vector(m.embeddings, leaf), b);
  in.noise = Tensor({b, m.g1.config().noise_dim});
  for (auto& v : in.noise.data()) v = rng.normal();
  return in;
}

namespace detail {

inline std::vector<Tensor> grads_of(const Tape& tape, std::span<const Var> vars) {
  std::vector<Tensor> out;
  for (const auto& v : vars) out.push_back(tape.grad(v));
  return out;
}

// Generator output at the stage resolution. Only the active stage's weights
// are trainable; stage 1 is frozen during stage 2.
inline Var fake_graph(Tape& tape, const ModelSet& m, int stage, Var cond, Var noise, bool trainable,
                      std::vector<Var>* active) {
  auto w1 = m.g1.net().bind(tape, trainable && stage == 1);
  Var lo = m.g1.forward(w1, cond, noise);
  if (stage == 1) {
    if (active) *active = std::move(w1);
    return lo;
  }
  auto w2 = m.g2.net().bind(tape, trainable);
  Var hi = m.g2.forward(w2, cond, lo);
  if (active) *active = std::move(w2);
  return hi;
}

}  // namespace detail

// Phase 1: discriminator Adam step on d_loss with the fake batch detached.
inline double discriminator_step(ModelSet& m, const StepInputs& in, const TrainConfig& cfg, OptimizerStates& opt) {
  auto& d = in.stage == 1 ? m.d8 : m.d16;
  Tensor fake;
  {
    Tape tape;
    fake = detail::fake_graph(tape, m, in.stage, tape.constant(in.cond), tape.constant(in.noise), false, nullptr)
               .value();
  }
  Tape tape;
  auto w = d.net().bind(tape, true);
  auto c = tape.constant(in.cond);
  Var loss = discriminator_loss_graph(d.forward(w, tape.constant(in.real), c), d.forward(w, tape.constant(fake), c));
  tape.backward(loss);
  const auto grads = detail::grads_of(tape, w);
  adam_step(d.params(), grads, in.stage == 1 ? opt.d8 : opt.d16, cfg.gan_adam());
  return loss.value().item();
}

struct GeneratorStepResult {
  double g_loss = 0.0;
  double h_penalty = 0.0;
  Tensor cond_grad;  // d(objective)/d(e_c) summed over the batch, length 2D
};

// Phase 2: generator Adam step on g_loss + lambda1 * hierarchy_penalty. The
// discriminator and classifier enter as constants.
inline GeneratorStepResult generator_step(ModelSet& m, const ClassHierarchy& h, const StepInputs& in,
                                          const TrainConfig& cfg, OptimizerStates& opt) {
  Tape tape;
  Var cond = cfg.joint_embeddings() ? tape.leaf(in.cond) : tape.constant(in.cond);
  std::vector<Var> active;
  Var fake = detail::fake_graph(tape, m, in.stage, cond, tape.constant(in.noise), true, &active);
  const auto& d = in.stage == 1 ? m.d8 : m.d16;
  const auto& clf = in.stage == 1 ? m.c8 : m.c16;
  Var g = generator_loss_graph(d.forward(d.net().bind(tape, false), fake, cond));
  Var hp = hierarchy_penalty_graph(clf, clf.bind(tape, false), fake, in.leaf, h);
  Var total = ops::add(g, ops::scale(hp, cfg.effective_lambda1()));
  tape.backward(total);
  const auto grads = detail::grads_of(tape, active);
  if (in.stage == 1) {
    adam_step(m.g1.params(), grads, opt.g1, cfg.gan_adam());
  } else {
    adam_step(m.g2.params(), grads, opt.g2, cfg.gan_adam());
  }
  GeneratorStepResult r{g.value().item(), hp.value().item(), Tensor({1, in.cond.cols()})};
  if (cfg.joint_embeddings()) r.cond_grad = ops::sum_axis(tape.constant(tape.grad(cond)), 0).value();
  return r;
}

// Phase 3: embedding Adam step on lambda2 * margin loss plus the generator
// pathway gradient on row `leaf`. Negatives are drawn in every mode so that
// all modes consume the same random stream; only joint modes update.
inline double embedding_step(ModelSet& m, const ClassHierarchy& h, ClassId leaf, const Tensor& cond_grad,
                             const TrainConfig& cfg, OptimizerStates& opt, Rng& rng) {
  const bool joint = cfg.joint_embeddings();
  Tape tape;
  auto e = bind_embeddings(tape, m.embeddings, joint);
  Var che = che_loss_graph(e, h, cfg.negatives_per_positive, cfg.margin, rng);
  if (!joint) return che.value().item();
  tape.backward(ops::scale(che, cfg.lambda2));
  std::vector<Tensor> grads{tape.grad(e.re), tape.grad(e.im), tape.grad(e.rel_re), tape.grad(e.rel_im)};
  const std::size_t dim = m.embeddings.dim();
  for (std::size_t j = 0; j < dim; ++j) {
    grads[0].data()[leaf * dim + j] += cond_grad[j];
    grads[1].data()[leaf * dim + j] += cond_grad[dim + j];
  }
  adam_step(m.embeddings.params(), grads, opt.embeddings, cfg.embed_adam());
  return che.value().item();
}

// One alternating round for leaf c: D, then G, then the embeddings.
inline StepLosses joint_step(ModelSet& m, const ClassHierarchy& h, int stage, ClassId c, Tensor real,
                             const TrainConfig& cfg, OptimizerStates& opt, Rng& rng) {
  if (c >= h.size() || !h.is_leaf(c)) throw std::invalid_argument("joint_step: class " + std::to_string(c) + " is not a leaf");
  const auto in = make_step_inputs(m, stage, c, std::move(real), rng);
  StepLosses out;
  out.d_loss = discriminator_step(m, in, cfg, opt);
  const auto g = generator_step(m, h, in, cfg, opt);
  out.g_loss = g.g_loss;
  out.h_penalty = g.h_penalty;
  out.che_loss = embedding_step(m, h, c, g.cond_grad, cfg, opt, rng);
  return out;
}

struct TraceRow {
  std::size_t step = 0;
  int stage = 1;
  ClassId class_id = 0;
  StepLosses losses;
};

struct EvalRecord {
  std::size_t step = 0;  // steps completed
  int stage = 1;
  MetricsReport report;
};

struct RunArtifacts {
  ModelSet models;
  std::vector<TraceRow> trace;
  std::vector<EvalRecord> evals;
  nlohmann::json manifest;

  std::string trace_csv() const {
    std::string out = "step,stage,class_id,d_loss,g_loss,h_penalty,che_loss\n";
    char buf[256];
    for (const auto& r : trace) {
      std::snprintf(buf, sizeof buf, "%zu,%d,%zu,%.17g,%.17g,%.17g,%.17g\n", r.step, r.stage, r.class_id,
                    r.losses.d_loss, r.losses.g_loss, r.losses.h_penalty, r.losses.che_loss);
      out += buf;
    }
    return out;
  }
};

class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(const std::string& what, RunArtifacts last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const RunArtifacts& last_good() const { return last_good_; }

 private:
  RunArtifacts last_good_;
};

inline std::string checkpoint_digest(const Checkpoint& ck) { return digest_of(encode_checkpoint(ck)); }

inline std::string dataset_digest(const Dataset& d) { return digest_of(encode_dataset(d)); }

struct RunOptions {
  // SEG: required pre-trained table. FLAT: must be empty. Joint modes: an
  // optional starting point instead of a random table.
  std::optional<ClassEmbeddingTable> embeddings;
  bool evaluate = true;
  std::function<void(const std::string&)> log;
};

inline void check_classifier(const HierClassifier& clf, Resolution res, const ClassHierarchy& h, const char* which) {
  if (clf.resolution() != res) throw std::invalid_argument(std::string(which) + " classifier has the wrong resolution");
  std::vector<std::size_t> sizes;
  for (int k = 1; k <= h.depth(); ++k) sizes.push_back(h.level_size(k));
  if (clf.head_sizes() != sizes) {
    throw std::invalid_argument(std::string(which) + " classifier heads do not match the dataset hierarchy");
  }
}

// Stage 1 (G1, D8, C8) then stage 2 (G2, D16, C16, G1 frozen), each for
// steps_per_stage rounds over the leaves in id order.
inline RunArtifacts run_training(const Dataset& data, const HierClassifier& c8, const HierClassifier& c16,
                                 const TrainConfig& cfg, RunOptions opts = {}) {
  cfg.validate();
  const auto& h = data.spec.hierarchy;
  check_classifier(c8, Resolution::kLow, h, "8x8");
  check_classifier(c16, Resolution::kHigh, h, "16x16");
  if (cfg.mode == TrainMode::kSeg && !opts.embeddings) {
    throw std::invalid_argument("seg mode requires pre-trained embeddings");
  }
  if (cfg.mode == TrainMode::kFlat && opts.embeddings) {
    throw std::invalid_argument("flat mode uses fixed random embeddings and accepts none");
  }
  if (opts.embeddings && (!opts.embeddings->matches(h) || opts.embeddings->dim() != cfg.embed_dim)) {
    throw std::invalid_argument("embedding table does not match the hierarchy or embed_dim");
  }
  auto log = [&](const std::string& s) {
    if (opts.log) opts.log(s);
  };

  Rng master(cfg.seed);
  Rng model_rng = master.fork(1), embed_rng = master.fork(2), step_rng = master.fork(3), data_rng = master.fork(4);
  const auto arch = cfg.model_config();
  RunArtifacts run;
  ClassEmbeddingTable random_table(h, cfg.embed_dim, embed_rng);
  const bool pretrained = opts.embeddings.has_value();
  run.models = ModelSet{GeneratorStage1(arch, model_rng),
                        GeneratorStage2(arch, model_rng),
                        Discriminator(arch, Resolution::kLow, model_rng),
                        Discriminator(arch, Resolution::kHigh, model_rng),
                        c8,
                        c16,
                        pretrained ? std::move(*opts.embeddings) : std::move(random_table)};
  run.models.validate();

  const std::string features = "clf8:" + checkpoint_digest(c8.to_checkpoint(h)) + ",clf16:" + checkpoint_digest(c16.to_checkpoint(h));
  run.manifest = {{"config", cfg.to_json()},
                  {"mode", mode_name(cfg.mode)},
                  {"seed", cfg.seed},
                  {"dataset_digest", dataset_digest(data)},
                  {"dataset_spec", data.spec.to_json()},
                  {"classifiers", features},
                  {"embeddings", pretrained ? "provided" : "random"}};

  const auto& leaves = h.leaves();
  std::vector<BatchStream> streams;
  std::vector<std::vector<std::size_t>> leaf_idx;
  for (ClassId leaf : leaves) {
    leaf_idx.push_back(data.indices_of(Split::kTrain, leaf));
    if (leaf_idx.back().empty()) throw std::invalid_argument("class '" + h.name(leaf) + "' has no training samples");
    streams.emplace_back(leaf_idx.back().size(), cfg.batch_size, data_rng.fork(leaf).next_u64());
  }

  OptimizerStates opt;
  RunArtifacts last_good = run;
  const std::uint64_t eval_seed = cfg.seed ^ 0x5eedf00dULL;
  std::size_t global = 0;
  for (int stage = 1; stage <= 2; ++stage) {
    const Resolution res = stage == 1 ? Resolution::kLow : Resolution::kHigh;
    for (std::size_t s = 0; s < cfg.steps_per_stage; ++s, ++global) {
      const std::size_t li = s % leaves.size();
      std::vector<std::size_t> rows;
      for (auto i : streams[li].next()) rows.push_back(leaf_idx[li][i]);
      StepLosses losses;
      try {
        losses = joint_step(run.models, h, stage, leaves[li], images_tensor(data.train, rows, res), cfg, opt, step_rng);
      } catch (const NonFiniteError& e) {
        throw TrainingDivergedError("non-finite value in '" + e.op() + "' at step " + std::to_string(global) +
                                        " (stage " + std::to_string(stage) + ")",
                                    std::move(last_good));
      }
      run.trace.push_back({global, stage, leaves[li], losses});
      const bool boundary = (s + 1) % cfg.eval_every == 0 || s + 1 == cfg.steps_per_stage;
      if (boundary) {
        if (opts.evaluate) {
          run.evals.push_back(
              {global + 1, stage, evaluate(run.models, data, cfg.eval_samples, eval_seed, stage, features)});
          const auto& avg = run.evals.back().report.average;
          char buf[200];
          std::snprintf(buf, sizeof buf, "step %zu stage %d: desk_fid %.4f desk_is %.4f consistency %.4f", global + 1,
                        stage, avg.desk_fid, avg.desk_is, avg.consistency_rate);
          log(buf);
        }
        last_good = run;
      }
    }
  }
  return run;
}

// Run directory layout.
inline void write_run(const std::filesystem::path& dir, const RunArtifacts& run, const ClassHierarchy& h) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "g1.ckpt", run.models.g1.to_checkpoint());
  save_checkpoint(dir / "g2.ckpt", run.models.g2.to_checkpoint());
  save_checkpoint(dir / "d8.ckpt", run.models.d8.to_checkpoint());
  save_checkpoint(dir / "d16.ckpt", run.models.d16.to_checkpoint());
  save_checkpoint(dir / "clf8.ckpt", run.models.c8.to_checkpoint(h));
  save_checkpoint(dir / "clf16.ckpt", run.models.c16.to_checkpoint(h));
  save_checkpoint(dir / "embeddings.ckpt", run.models.embeddings.to_checkpoint());
  write_file(dir / "trace.csv", run.trace_csv());
  nlohmann::json evals = nlohmann::json::array();
  for (const auto& e : run.evals) {
    auto j = e.report.to_json();
    j["step"] = e.step;
    evals.push_back(j);
  }
  write_file(dir / "evals.json", evals.dump(2) + "\n");
  write_file(dir / "manifest.json", run.manifest.dump(2) + "\n");
}

inline ModelSet load_run_models(const std::filesystem::path& dir, const ClassHierarchy& h) {
  ModelSet m{GeneratorStage1::from_checkpoint(load_checkpoint(dir / "g1.ckpt")),
             GeneratorStage2::from_checkpoint(load_checkpoint(dir / "g2.ckpt")),
             Discriminator::from_checkpoint(load_checkpoint(dir / "d8.ckpt")),
             Discriminator::from_checkpoint(load_checkpoint(dir / "d16.ckpt")),
             HierClassifier::from_checkpoint(load_checkpoint(dir / "clf8.ckpt"), &h),
             HierClassifier::from_checkpoint(load_checkpoint(dir / "clf16.ckpt"), &h),
             ClassEmbeddingTable::from_checkpoint(load_checkpoint(dir / "embeddings.ckpt"))};
  if (!m.embeddings.matches(h)) throw CorruptFileError("run embeddings do not match the hierarchy");
  m.validate();
  return m;
}

}  // namespace treegan
