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

// Acceptance runner: one [PASS]/[FAIL] line per criterion, followed by the
// measured quantities. Criteria can be selected by number on the command
// line; with no arguments all ten run. Exit status is non-zero on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "support/oracles.hpp"
#include "treegan/training.hpp"

namespace fs = std::filesystem;
using namespace treegan;
using namespace treegan::oracle;

namespace {

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;
};

std::string fmt(const char* spec, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ClassHierarchy& fixture() {
  static const auto h = parse_hierarchy(kAnimalHierarchyText);
  return h;
}

const Dataset& default_data() {
  static const Dataset d = generate_dataset(DatasetSpec{});
  return d;
}

const HierClassifier& default_classifier(Resolution r) {
  static std::map<Resolution, HierClassifier> cache;
  auto it = cache.find(r);
  if (it == cache.end()) it = cache.emplace(r, train_classifier(default_data(), r, ModelConfig{}, {})).first;
  return it->second;
}

// 1. Every primitive and the composite generator objective vs central differences.
Outcome gradient_correctness() {
  Outcome o;
  o.pass = true;
  Rng rng(20261014);
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& pc : primitive_cases()) {
    double case_worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t r = 1 + rng.below(6), c = 1 + rng.below(6);
      const auto rep = grad_check(pc.graph, pc.inputs(rng, r, c));
      case_worst = std::max(case_worst, rep.worst_rel_error);
      o.pass = o.pass && rep.passed && rep.worst_rel_error < 1e-4;
      ++checks;
    }
    worst = std::max(worst, case_worst);
    if (case_worst >= 1e-4) o.details.push_back(pc.name + " worst relative error " + fmt("%.3g", case_worst));
  }

  // g_loss + lambda1 * penalty on D=2 with 2-unit layers, both stages,
  // w.r.t. generator weights and the conditioning embedding.
  const auto& h = fixture();
  for (int trial = 0; trial < 3; ++trial) {
    TrainConfig cfg;
    cfg.embed_dim = 2;
    cfg.gen_hidden = {2};
    cfg.disc_hidden = {2};
    const auto arch = cfg.model_config();
    ModelConfig carch;
    carch.clf_trunk = {2};
    carch.feature_width = 2;
    const HierClassifier c8(carch, Resolution::kLow, h, rng), c16(carch, Resolution::kHigh, h, rng);
    const GeneratorStage1 g1(arch, rng);
    const GeneratorStage2 g2(arch, rng);
    const Discriminator d8(arch, Resolution::kLow, rng), d16(arch, Resolution::kHigh, rng);
    const std::size_t b = 1 + rng.below(3);
    Tensor cond({b, 4}), noise({b, 4});
    for (auto& v : cond.data()) v = rng.uniform(-1, 1);
    for (auto& v : noise.data()) v = rng.normal();
    const ClassId leaf = h.leaves()[rng.below(6)];
    for (int stage = 1; stage <= 2; ++stage) {
      std::vector<Tensor> params{cond};
      for (const auto* p : (stage == 1 ? g1.params() : g2.params())) params.push_back(p->value);
      auto f = [&](Tape& tape, std::span<const Var> v) {
        Var c = v[0];
        auto w = v.subspan(1);
        Var fake = stage == 1 ? g1.forward(w, c, tape.constant(noise))
                              : g2.forward(w, c, g1.forward(g1.net().bind(tape, false), c, tape.constant(noise)));
        const auto& d = stage == 1 ? d8 : d16;
        const auto& clf = stage == 1 ? c8 : c16;
        Var g = generator_loss_graph(d.forward(d.net().bind(tape, false), fake, c));
        Var hp = hierarchy_penalty_graph(clf, clf.bind(tape, false), fake, leaf, h);
        return ops::add(g, ops::scale(hp, cfg.lambda1));
      };
      const auto rep = grad_check(f, params);
      o.pass = o.pass && rep.passed && rep.worst_rel_error < 1e-4;
      worst = std::max(worst, rep.worst_rel_error);
      ++checks;
      if (!rep.passed) o.details.push_back("composite stage " + std::to_string(stage) + " worst " + fmt("%.3g", rep.worst_rel_error));
    }
  }
  o.details.push_back(std::to_string(checks) + " checks, worst relative error " + fmt("%.3g", worst) + " (< 1e-4)");
  return o;
}

// 2. hier_loss vs a softmax/log loop on 1000 random cases and the M=(2,4) value.
Outcome hier_loss_oracle() {
  Outcome o;
  const auto& h = fixture();
  Rng rng(7);
  Tape probe;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ClassId y = h.leaves()[rng.below(h.leaves().size())];
    std::vector<std::vector<double>> raw{std::vector<double>(2), std::vector<double>(6)};
    const double spread = rng.uniform(0.1, 20.0);
    for (auto& head : raw)
      for (auto& v : head) v = rng.uniform(-spread, spread);
    Tape tape;
    std::vector<Var> logits{tape.constant(Tensor({1, 2}, raw[0])), tape.constant(Tensor({1, 6}, raw[1]))};
    const ClassId ys[] = {y};
    const double got = hier_loss_graph(logits, h, ys).value().item();
    const double want = static_cast<double>(loop_hier_loss(raw, {h.level_index(h.ancestor(y, 1)), h.level_index(y)}));
    worst = std::max(worst, std::abs(got - want));
  }
  const auto h24 = parse_hierarchy("r\nr/a\nr/a/x\nr/a/y\nr/b\nr/b/z\nr/b/w\n");
  Tape tape;
  std::vector<Var> uniform{tape.constant(Tensor({1, 2})), tape.constant(Tensor({1, 4}))};
  const ClassId y[] = {h24.id_of("w")};
  const double forced = hier_loss_graph(uniform, h24, y).value().item();
  const double ln = std::log(2.0) + std::log(4.0);
  o.pass = worst <= 1e-12 && std::abs(forced - ln) <= 1e-12 && std::abs(forced - 2.079442) < 5e-7;
  o.details.push_back("1000 cases, max |impl - loop| " + fmt("%.3g", worst) + " (<= 1e-12)");
  o.details.push_back("uniform logits M=(2,4): " + fmt("%.9f", forced) + " vs ln2+ln4 = " + fmt("%.9f", ln));
  return o;
}

// 3. pair_score symmetry and scale invariance; complex_transform vs std::complex.
Outcome pair_score_properties() {
  Outcome o;
  Rng rng(3);
  double sym = 0.0, scale = 0.0, cplx = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 1 + rng.below(16);
    const auto p = random_cvec(rng, d), r = random_cvec(rng, d), c = random_cvec(rng, d);
    const double s = pair_score(p, r, c);
    sym = std::max(sym, std::abs(s - pair_score(c, r, p)));
    const double k1 = rng.uniform(0.01, 100.0), k2 = rng.uniform(0.01, 100.0);
    ComplexVec ps = p, cs = c;
    for (std::size_t j = 0; j < d; ++j) {
      ps.re[j] *= k1;
      ps.im[j] *= k1;
      cs.re[j] *= k2;
      cs.im[j] *= k2;
    }
    scale = std::max(scale, std::abs(s - pair_score(ps, r, cs)));
    const auto got = complex_transform(p, r), want = complex_oracle(p, r);
    for (std::size_t j = 0; j < d; ++j)
      cplx = std::max({cplx, std::abs(got.re[j] - want.re[j]), std::abs(got.im[j] - want.im[j])});
  }
  o.pass = sym <= 1e-12 && scale <= 1e-12 && cplx <= 1e-12;
  o.details.push_back("1000 triples: symmetry " + fmt("%.3g", sym) + ", scale " + fmt("%.3g", scale) +
                      ", complex oracle " + fmt("%.3g", cplx) + " (all <= 1e-12)");
  return o;
}

// 4. Ranking accuracy and sibling gap after train_che, 5 seeds.
Outcome che_ranking() {
  Outcome o;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CheConfig cfg;
    cfg.seed = seed;
    const auto table = train_che(fixture(), cfg);
    const double acc = ranking_accuracy(table, fixture(), cfg.negatives_per_positive, 1000 + seed);
    const auto sib = sibling_similarity(table, fixture());
    const bool ok = acc >= 0.95 && sib.gap() >= 0.05;
    good += ok ? 1 : 0;
    o.details.push_back("seed " + std::to_string(seed) + ": ranking " + fmt("%.3f", acc) + ", sibling " +
                        fmt("%.3f", sib.sibling) + " vs non-sibling " + fmt("%.3f", sib.non_sibling) + " (gap " +
                        fmt("%.3f", sib.gap()) + ")" + (ok ? "" : " below bar"));
  }
  o.pass = good >= 4;
  o.details.push_back(std::to_string(good) + "/5 seeds meet ranking >= 0.95 and gap >= 0.05 (need >= 4)");
  return o;
}

GaussianStats stats1d(double mu, double var) {
  GaussianStats s;
  s.mu = Eigen::VectorXd::Constant(1, mu);
  s.sigma = Eigen::MatrixXd::Constant(1, 1, var);
  return s;
}

// 5. Frechet distance and inception score against closed forms and oracles.
Outcome metric_oracles() {
  Outcome o;
  const double eq_var = frechet_distance(stats1d(0, 1), stats1d(1, 1));
  const double eq_mean = frechet_distance(stats1d(0, 1), stats1d(0, 4));
  Rng rng(5);
  double worst = 0.0, asym = 0.0;
  for (int i = 0; i < 500; ++i) {
    auto make = [&] {
      GaussianStats s;
      s.mu = Eigen::VectorXd(3);
      for (int j = 0; j < 3; ++j) s.mu[j] = rng.uniform(-2, 2);
      Eigen::MatrixXd a(3, 3);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = rng.uniform(-1, 1);
      s.sigma = a * a.transpose();
      return s;
    };
    const auto a = make(), b = make();
    const double ab = frechet_distance(a, b);
    worst = std::max(worst, std::abs(ab - static_cast<double>(fid_oracle(a, b))));
    asym = std::max(asym, std::abs(ab - frechet_distance(b, a)));
  }
  const double is_marginal = inception_score(Tensor({4, 3}, {0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3}));
  const double is_two = inception_score(Tensor({2, 2}, {1, 0, 0, 1}));
  Tensor onehot({12, 6});
  for (std::size_t i = 0; i < 12; ++i) onehot.data()[i * 6 + i % 6] = 1.0;
  const double is_six = inception_score(onehot);
  o.pass = eq_var == 1.0 && eq_mean == 1.0 && worst <= 1e-8 && asym <= 1e-8 && std::abs(is_marginal - 1.0) <= 1e-9 &&
           std::abs(is_two - 2.0) <= 1e-9 && std::abs(is_six - 6.0) <= 1e-9;
  o.details.push_back("1-D closed forms: " + fmt("%.17g", eq_var) + ", " + fmt("%.17g", eq_mean) + " (exactly 1.0)");
  o.details.push_back("500 random 3x3 PSD pairs: max |impl - Jacobi| " + fmt("%.3g", worst) + ", asymmetry " +
                      fmt("%.3g", asym) + " (<= 1e-8)");
  o.details.push_back("IS marginal rows " + fmt("%.12f", is_marginal) + ", 2 one-hot " + fmt("%.12f", is_two) +
                      ", 6 one-hot " + fmt("%.12f", is_six));
  return o;
}

// 6. Held-out accuracy at both resolutions and the shuffled-label control.
Outcome classifier_accuracy() {
  Outcome o;
  o.pass = true;
  const auto& d = default_data();
  for (auto r : {Resolution::kLow, Resolution::kHigh}) {
    const auto acc = evaluate_classifier(default_classifier(r), d.test, d.spec.hierarchy);
    bool ok = acc.leaf >= 0.95;
    for (double a : acc.per_level) ok = ok && a >= 0.95;
    ClassifierTrainConfig shuffled;
    shuffled.shuffle_labels = true;
    const auto ctrl = evaluate_classifier(train_classifier(d, r, ModelConfig{}, shuffled), d.test, d.spec.hierarchy);
    const double chance = 1.0 / static_cast<double>(d.spec.hierarchy.leaves().size());
    const bool ctrl_ok = std::abs(ctrl.leaf - chance) <= 0.05;
    o.pass = o.pass && ok && ctrl_ok;
    const std::string side = r == Resolution::kLow ? "8x8" : "16x16";
    o.details.push_back(side + ": leaf " + fmt("%.3f", acc.leaf) + ", level 1 " + fmt("%.3f", acc.per_level[0]) +
                        ", level 2 " + fmt("%.3f", acc.per_level[1]) + " (>= 0.95); shuffled-label leaf " +
                        fmt("%.3f", ctrl.leaf) + " vs chance " + fmt("%.3f", chance) + " (within 0.05)");
  }
  return o;
}

// 7. lambda1 = 0 TREEGAN vs NPC generator trajectories; SEG embedding freeze.
Outcome ablation_identity() {
  Outcome o;
  const auto& d = default_data();
  const auto& h = d.spec.hierarchy;
  const auto& c8 = default_classifier(Resolution::kLow);
  const auto& c16 = default_classifier(Resolution::kHigh);
  TrainConfig tg;
  tg.lambda1 = 0.0;
  tg.steps_per_stage = 150;
  TrainConfig npc = tg;
  npc.mode = TrainMode::kNpc;
  npc.lambda1 = 15.0;  // ignored by NPC

  // Step-by-step trajectory under shared seeds.
  Rng init_a(11), init_b(11);
  auto build = [&](Rng& rng) {
    const auto arch = tg.model_config();
    return ModelSet{GeneratorStage1(arch, rng),         GeneratorStage2(arch, rng),
                    Discriminator(arch, Resolution::kLow, rng), Discriminator(arch, Resolution::kHigh, rng),
                    c8, c16, ClassEmbeddingTable(h, tg.embed_dim, rng)};
  };
  auto a = build(init_a), b = build(init_b);
  OptimizerStates oa, ob;
  Rng ra(12), rb(12);
  std::size_t identical = 0, steps = 0;
  for (int stage = 1; stage <= 2; ++stage) {
    for (std::size_t s = 0; s < 60; ++s, ++steps) {
      const ClassId leaf = h.leaves()[s % h.leaves().size()];
      auto idx = d.indices_of(Split::kTrain, leaf);
      idx.resize(tg.batch_size);
      const auto real = images_tensor(d.train, idx, stage == 1 ? Resolution::kLow : Resolution::kHigh);
      joint_step(a, h, stage, leaf, real, tg, oa, ra);
      joint_step(b, h, stage, leaf, real, npc, ob, rb);
      identical += (a.g1 == b.g1 && a.g2 == b.g2) ? 1 : 0;
    }
  }
  // Whole runs: identical traces and generator checkpoint bytes.
  RunOptions no_eval;
  no_eval.evaluate = false;
  const auto run_tg = run_training(d, c8, c16, tg, no_eval);
  const auto run_npc = run_training(d, c8, c16, npc, no_eval);
  const bool runs_equal =
      encode_checkpoint(run_tg.models.g1.to_checkpoint()) == encode_checkpoint(run_npc.models.g1.to_checkpoint()) &&
      encode_checkpoint(run_tg.models.g2.to_checkpoint()) == encode_checkpoint(run_npc.models.g2.to_checkpoint()) &&
      run_tg.trace_csv() == run_npc.trace_csv();

  CheConfig cc;
  const auto table = train_che(h, cc);
  TrainConfig seg = tg;
  seg.mode = TrainMode::kSeg;
  RunOptions with_table;
  with_table.evaluate = false;
  with_table.embeddings = table;
  const auto run_seg = run_training(d, c8, c16, seg, with_table);
  const bool frozen =
      encode_checkpoint(run_seg.models.embeddings.to_checkpoint()) == encode_checkpoint(table.to_checkpoint());

  o.pass = identical == steps && runs_equal && frozen;
  o.details.push_back("generator parameters bit-identical after " + std::to_string(identical) + "/" +
                      std::to_string(steps) + " joint steps");
  o.details.push_back(std::string("2x150-step runs: generator checkpoints and traces ") +
                      (runs_equal ? "byte-identical" : "DIFFER"));
  o.details.push_back(std::string("SEG embedding table after 300 steps: ") + (frozen ? "bit-unchanged" : "CHANGED"));
  return o;
}

struct TrendRun {
  MetricsReport first;  // first evaluation checkpoint
  MetricsReport last;   // final stage-2 checkpoint
  double seconds = 0.0;
};

std::map<std::pair<TrainMode, std::uint64_t>, TrendRun> trend_runs;
double trend_seconds = 0.0;

void run_trend(const std::vector<TrainMode>& modes, std::optional<std::size_t> steps) {
  const auto& d = default_data();
  const auto& c8 = default_classifier(Resolution::kLow);
  const auto& c16 = default_classifier(Resolution::kHigh);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (auto mode : modes) {
      if (trend_runs.count({mode, seed})) continue;
      const auto t0 = std::chrono::steady_clock::now();
      TrainConfig cfg;
      cfg.mode = mode;
      cfg.seed = seed;
      if (steps) cfg.steps_per_stage = *steps;
      RunOptions opts;
      if (mode == TrainMode::kSeg) {
        CheConfig cc;
        cc.seed = seed;
        opts.embeddings = train_che(d.spec.hierarchy, cc);
      }
      const auto run = run_training(d, c8, c16, cfg, opts);
      TrendRun tr{run.evals.front().report, run.evals.back().report, seconds_since(t0)};
      trend_seconds += tr.seconds;
      std::fprintf(stderr, "  trend run %-8s seed %llu: %.1f s, final desk_fid %.3f consistency %.3f\n",
                   mode_name(mode).c_str(), static_cast<unsigned long long>(seed), tr.seconds, tr.last.average.desk_fid,
                   tr.last.average.consistency_rate);
      trend_runs[{mode, seed}] = std::move(tr);
    }
  }
}

// 8. TREEGAN vs NPC vs FLAT over 5 seeds (SEG reported alongside).
Outcome trend_analog() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  default_classifier(Resolution::kLow);
  default_classifier(Resolution::kHigh);
  const double setup = seconds_since(t0);
  run_trend({TrainMode::kFlat, TrainMode::kSeg, TrainMode::kNpc, TrainMode::kTreeGan}, std::nullopt);
  auto final_of = [](TrainMode m, std::uint64_t s) { return trend_runs.at({m, s}).last.average; };
  std::map<TrainMode, double> fid, cons;
  int cons_viol = 0, fid_tn_viol = 0, fid_nf_viol = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    std::string row = "seed " + std::to_string(s) + ":";
    for (auto m : {TrainMode::kTreeGan, TrainMode::kNpc, TrainMode::kSeg, TrainMode::kFlat}) {
      const auto a = final_of(m, s);
      fid[m] += a.desk_fid / 5.0;
      cons[m] += a.consistency_rate / 5.0;
      row += " " + mode_name(m) + " fid " + fmt("%.2f", a.desk_fid) + " cons " + fmt("%.3f", a.consistency_rate) + ";";
    }
    cons_viol += final_of(TrainMode::kTreeGan, s).consistency_rate - final_of(TrainMode::kFlat, s).consistency_rate < 0.05;
    fid_tn_viol += final_of(TrainMode::kTreeGan, s).desk_fid > final_of(TrainMode::kNpc, s).desk_fid;
    fid_nf_viol += final_of(TrainMode::kNpc, s).desk_fid > final_of(TrainMode::kFlat, s).desk_fid;
    o.details.push_back(row);
  }
  const bool a_ok = cons[TrainMode::kTreeGan] - cons[TrainMode::kFlat] >= 0.05 && cons_viol <= 1;
  const bool b_ok = fid[TrainMode::kTreeGan] <= fid[TrainMode::kNpc] && fid[TrainMode::kNpc] <= fid[TrainMode::kFlat] &&
                    fid_tn_viol <= 1 && fid_nf_viol <= 1;
  const double total = setup + trend_seconds;
  o.pass = a_ok && b_ok && total < 30 * 60;
  o.details.push_back("(a) mean consistency TREEGAN " + fmt("%.3f", cons[TrainMode::kTreeGan]) + " vs FLAT " +
                      fmt("%.3f", cons[TrainMode::kFlat]) + " (need +0.05), seed violations " +
                      std::to_string(cons_viol) + " (<= 1)");
  o.details.push_back("(b) mean desk-FID TREEGAN " + fmt("%.2f", fid[TrainMode::kTreeGan]) + " <= NPC " +
                      fmt("%.2f", fid[TrainMode::kNpc]) + " <= FLAT " + fmt("%.2f", fid[TrainMode::kFlat]) +
                      "; seed violations " + std::to_string(fid_tn_viol) + " and " + std::to_string(fid_nf_viol) +
                      " (<= 1 each); SEG " + fmt("%.2f", fid[TrainMode::kSeg]) + " reported only");
  o.details.push_back("4 modes x 5 seeds in " + fmt("%.0f", total) + " s (limit 1800 s)");
  return o;
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && TREEGAN_LOG=quiet '" TREEGAN_CLI "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 9. Reruns with identical config and seed reproduce byte-identical artifacts.
Outcome determinism() {
  Outcome o;
  bool lib = true;
  DatasetSpec spec;
  spec.samples_per_leaf = 40;
  const auto d1 = generate_dataset(spec), d2 = generate_dataset(spec);
  lib = lib && encode_dataset(d1) == encode_dataset(d2);
  ClassifierTrainConfig cc;
  cc.epochs = 5;
  const auto a8 = train_classifier(d1, Resolution::kLow, ModelConfig{}, cc);
  const auto b8 = train_classifier(d2, Resolution::kLow, ModelConfig{}, cc);
  const auto a16 = train_classifier(d1, Resolution::kHigh, ModelConfig{}, cc);
  lib = lib && encode_checkpoint(a8.to_checkpoint(spec.hierarchy)) == encode_checkpoint(b8.to_checkpoint(spec.hierarchy));
  TrainConfig tc;
  tc.steps_per_stage = 60;
  tc.eval_every = 30;
  tc.eval_samples = 40;
  const auto r1 = run_training(d1, a8, a16, tc), r2 = run_training(d1, a8, a16, tc);
  lib = lib && r1.trace_csv() == r2.trace_csv() &&
        encode_checkpoint(r1.models.g2.to_checkpoint()) == encode_checkpoint(r2.models.g2.to_checkpoint()) &&
        encode_checkpoint(r1.models.embeddings.to_checkpoint()) == encode_checkpoint(r2.models.embeddings.to_checkpoint()) &&
        r1.evals.back().report.to_csv() == r2.evals.back().report.to_csv() &&
        evaluate(r1.models, d1, 40, 3).to_csv() == evaluate(r2.models, d1, 40, 3).to_csv();
  o.details.push_back(std::string("library: dataset, classifier, run checkpoints, trace and reports ") +
                      (lib ? "byte-identical" : "DIFFER"));

  const fs::path dir = fs::temp_directory_path() / "treegan_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "animals.txt", std::string(kAnimalHierarchyText));
  write_file(dir / "c.json",
             R"({"dataset":{"samples_per_leaf":40},"classifier":{"epochs":5},)"
             R"("gan":{"steps_per_stage":30,"eval_every":15,"eval_samples":20},"eval":{"samples_per_class":20}})");
  bool cli_ok = true;
  for (const std::string tag : {"a", "b"}) {
    const std::string t = tag + "/";
    for (const std::string& args :
         {"gen-data --config c.json --out " + t + "d.bin", "train-che --config c.json --hierarchy animals.txt --out " + t + "e.ckpt",
          "train-clf --config c.json --data " + t + "d.bin --resolution 8 --out " + t + "c8.ckpt",
          "train-clf --config c.json --data " + t + "d.bin --resolution 16 --out " + t + "c16.ckpt",
          "train-gan --config c.json --mode treegan --data " + t + "d.bin --clf8 " + t + "c8.ckpt --clf16 " + t + "c16.ckpt --out " + t + "run",
          "train-gan --config c.json --mode seg --data " + t + "d.bin --clf8 " + t + "c8.ckpt --clf16 " + t + "c16.ckpt --embeddings " + t + "e.ckpt --out " + t + "seg",
          "eval --config c.json --run " + t + "run --data " + t + "d.bin --out " + t + "report.csv",
          "inspect-embeddings --embeddings " + t + "e.ckpt --hierarchy animals.txt --out " + t + "sim.csv"}) {
      cli_ok = cli_ok && run_cli(dir, args) == 0;
    }
  }
  std::size_t files = 0, same = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    ++files;
    same += fs::exists(dir / "b" / rel) && read_file(entry.path()) == read_file(dir / "b" / rel) ? 1 : 0;
  }
  cli_ok = cli_ok && files > 0 && same == files;
  o.details.push_back("CLI pipeline rerun: " + std::to_string(same) + "/" + std::to_string(files) +
                      " output files byte-identical");
  fs::remove_all(dir);
  o.pass = lib && cli_ok;
  return o;
}

// 10. Real-vs-real desk-FID vs real-vs-FLAT at the first evaluation checkpoint.
Outcome evaluation_sanity() {
  Outcome o;
  if (!trend_runs.count({TrainMode::kFlat, 0})) {
    // Runs up to the first checkpoint are identical for any longer run.
    run_trend({TrainMode::kFlat}, TrainConfig{}.eval_every);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int stage = trend_runs.at({TrainMode::kFlat, 0}).first.stage;
  const auto& clf = default_classifier(stage == 1 ? Resolution::kLow : Resolution::kHigh);
  const double rr = real_vs_real_fid(clf, default_data());
  const double elapsed = seconds_since(t0);
  o.pass = elapsed < 120;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const double flat = trend_runs.at({TrainMode::kFlat, s}).first.average.desk_fid;
    const double ratio = rr / flat;
    o.pass = o.pass && ratio < 0.05;
    o.details.push_back("seed " + std::to_string(s) + ": real-vs-FLAT " + fmt("%.2f", flat) + ", ratio " +
                        fmt("%.4f", ratio) + " (< 0.05)");
  }
  o.details.push_back("real-vs-real (test halves, stage " + std::to_string(stage) + " features) " + fmt("%.4f", rr) +
                      ", computed in " + fmt("%.2f", elapsed) + " s");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: timed inside the criterion
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient correctness", 60, gradient_correctness},
      {2, "hierarchical loss oracle", 10, hier_loss_oracle},
      {3, "compatibility score properties", 10, pair_score_properties},
      {4, "class-hierarchy encoder ranking", 120, che_ranking},
      {5, "metric oracles", 10, metric_oracles},
      {6, "hierarchical classifier", 300, classifier_accuracy},
      {7, "ablation identity", 120, ablation_identity},
      {8, "trend analog (4 modes x 5 seeds)", 0, trend_analog},
      {9, "determinism", 0, determinism},
      {10, "evaluation sanity", 0, evaluation_sanity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    const double t = seconds_since(t0);
    if (c.limit_seconds > 0 && t >= c.limit_seconds) {
      o.pass = false;
      o.details.push_back("runtime " + fmt("%.1f", t) + " s exceeds " + fmt("%.0f", c.limit_seconds) + " s");
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %d %s (%.1f s%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, t,
                c.limit_seconds > 0 ? (", limit " + fmt("%.0f", c.limit_seconds) + " s").c_str() : "");
    for (const auto& d : o.details) std::printf("       %s\n", d.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
