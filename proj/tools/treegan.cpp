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

// treegan: command-line front end for data generation, encoder and
// classifier training, adversarial training per mode, and evaluation.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "treegan/config.hpp"
#include "treegan/training.hpp"

namespace fs = std::filesystem;
using namespace treegan;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* v = std::getenv("TREEGAN_LOG");
  if (!v) return LogLevel::kInfo;
  const std::string s(v);
  if (s == "quiet" || s == "0") return LogLevel::kQuiet;
  if (s == "debug" || s == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[treegan] " << msg << "\n";
}

void debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[treegan:debug] " << msg << "\n";
}

// Exclusive marker next to (or inside) an output; removed on scope exit.
class OutputLock {
 public:
  explicit OutputLock(fs::path path) : path_(std::move(path)) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw std::runtime_error("output is locked by another invocation (remove '" + path_.string() +
                               "' if no other run is active)");
    }
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

fs::path lock_for_file(const fs::path& out) { return fs::path(out.string() + ".lock"); }

void ensure_parent(const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig c = path.empty() ? parse_run_config(nlohmann::json::object()) : load_run_config(path);
  if (seed) c.override_seed(*seed);
  return c;
}

std::string file_checksum(const fs::path& p) { return file_digest(p); }

nlohmann::json base_manifest(const std::string& command, const RunConfig& cfg, std::optional<std::uint64_t> seed) {
  nlohmann::json m = {{"command", command}, {"config_file", cfg.source}, {"config", cfg.resolved()}};
  m["seed_override"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  return m;
}

void write_sidecar(const fs::path& out, const nlohmann::json& manifest) {
  write_file(fs::path(out.string() + ".manifest.json"), manifest.dump(2) + "\n");
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Dataset load_data_checked(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("dataset '" + path + "' does not exist");
  return load_dataset(path);
}

int cmd_gen_data(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
  const auto cfg = load_config(config, seed);
  ensure_parent(out);
  OutputLock lock(lock_for_file(out));
  const auto d = generate_dataset(cfg.dataset);
  save_dataset(d, out);
  auto m = base_manifest("gen-data", cfg, seed);
  m["output_digest"] = file_checksum(out);
  write_sidecar(out, m);
  std::cout << "dataset " << out << ": " << d.train.size() << " train, " << d.test.size() << " test samples\n";
  std::cout << "digest " << file_checksum(out) << "\n";
  return 0;
}

int cmd_train_che(const std::string& config, std::optional<std::uint64_t> seed, const std::string& hierarchy,
                  const std::string& out) {
  const auto cfg = load_config(config, seed);
  if (!fs::exists(hierarchy)) throw UsageError("hierarchy file '" + hierarchy + "' does not exist");
  const auto h = parse_hierarchy(read_text_file(hierarchy));
  ensure_parent(out);
  OutputLock lock(lock_for_file(out));
  CheTrace trace;
  const auto table = train_che(h, cfg.che, &trace);
  save_checkpoint(out, table.to_checkpoint());
  const double acc = ranking_accuracy(table, h, cfg.che.negatives_per_positive, cfg.che.seed + 1);
  const auto sib = sibling_similarity(table, h);
  auto m = base_manifest("train-che", cfg, seed);
  m["hierarchy_digest"] = file_checksum(hierarchy);
  m["output_digest"] = file_checksum(out);
  m["final_loss"] = trace.loss.empty() ? 0.0 : trace.loss.back();
  m["ranking_accuracy"] = acc;
  m["sibling_similarity"] = sib.sibling;
  m["non_sibling_similarity"] = sib.non_sibling;
  write_sidecar(out, m);
  std::cout << "ranking_accuracy " << fmt(acc) << "\n"
            << "sibling_similarity " << fmt(sib.sibling) << "\n"
            << "non_sibling_similarity " << fmt(sib.non_sibling) << "\n"
            << "gap " << fmt(sib.gap()) << "\n";
  return 0;
}

int cmd_train_clf(const std::string& config, std::optional<std::uint64_t> seed, const std::string& data, int side,
                  const std::string& out) {
  const auto cfg = load_config(config, seed);
  Resolution res;
  try {
    res = parse_resolution(side);
  } catch (const std::invalid_argument&) {
    throw UsageError("--resolution must be 8 or 16");
  }
  const auto d = load_data_checked(data);
  const auto& h = d.spec.hierarchy;
  ensure_parent(out);
  OutputLock lock(lock_for_file(out));
  const auto clf = train_classifier(d, res, cfg.classifier_arch, cfg.classifier);
  save_checkpoint(out, clf.to_checkpoint(h));
  const auto acc = evaluate_classifier(clf, d.test, h);
  auto m = base_manifest("train-clf", cfg, seed);
  m["resolution"] = side;
  m["dataset_digest"] = file_checksum(data);
  m["output_digest"] = file_checksum(out);
  m["test_leaf_accuracy"] = acc.leaf;
  m["test_level_accuracy"] = acc.per_level;
  m["test_path_consistency"] = acc.path_consistency;
  write_sidecar(out, m);
  std::cout << "level,accuracy\n";
  for (std::size_t k = 0; k < acc.per_level.size(); ++k) std::cout << k + 1 << "," << fmt(acc.per_level[k]) << "\n";
  std::cout << "leaf," << fmt(acc.leaf) << "\n" << "path_consistency," << fmt(acc.path_consistency) << "\n";
  return 0;
}

int cmd_train_gan(const std::string& config, std::optional<std::uint64_t> seed, const std::string& mode_text,
                  const std::string& data, const std::string& clf8, const std::string& clf16,
                  const std::string& embeddings, const std::string& out) {
  TrainMode mode;
  try {
    mode = parse_mode(mode_text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (mode == TrainMode::kSeg && embeddings.empty()) {
    throw UsageError("--mode seg requires --embeddings (a checkpoint from train-che)");
  }
  if (mode == TrainMode::kFlat && !embeddings.empty()) {
    throw UsageError("--mode flat uses fixed random embeddings; remove --embeddings");
  }
  for (const auto& [flag, path] : {std::pair{"--clf8", clf8}, std::pair{"--clf16", clf16}}) {
    if (!fs::exists(path)) throw UsageError(std::string(flag) + " '" + path + "' does not exist");
  }
  const auto cfg = load_config(config, seed);
  const auto d = load_data_checked(data);
  const auto& h = d.spec.hierarchy;
  const auto c8 = HierClassifier::from_checkpoint(load_checkpoint(clf8), &h);
  const auto c16 = HierClassifier::from_checkpoint(load_checkpoint(clf16), &h);
  RunOptions opts;
  if (!embeddings.empty()) {
    if (!fs::exists(embeddings)) throw UsageError("--embeddings '" + embeddings + "' does not exist");
    opts.embeddings = ClassEmbeddingTable::from_checkpoint(load_checkpoint(embeddings));
  }
  opts.log = [](const std::string& s) { info(s); };
  const auto tc = cfg.gan_config(mode);

  fs::create_directories(out);
  OutputLock lock(fs::path(out) / ".lock");
  auto finish = [&](RunArtifacts run) {
    run.manifest["command"] = "train-gan";
    run.manifest["config_file"] = cfg.source;
    run.manifest["resolved_config"] = cfg.resolved();
    run.manifest["inputs"] = {{"dataset_digest", file_checksum(data)},
                              {"clf8_digest", file_checksum(clf8)},
                              {"clf16_digest", file_checksum(clf16)},
                              {"embeddings_digest", embeddings.empty() ? nlohmann::json(nullptr)
                                                                      : nlohmann::json(file_checksum(embeddings))}};
    write_run(out, run, h);
  };
  try {
    auto run = run_training(d, c8, c16, tc, std::move(opts));
    finish(std::move(run));
  } catch (const TrainingDivergedError& e) {
    auto last = e.last_good();
    last.manifest["diverged"] = e.what();
    finish(std::move(last));
    throw std::runtime_error(std::string("training diverged: ") + e.what() + "; last good checkpoint written to '" +
                             out + "'");
  }
  const auto evals = nlohmann::json::parse(read_text_file(fs::path(out) / "evals.json"));
  if (!evals.empty()) {
    const auto& last = evals.back().at("average");
    std::cout << "final desk_fid " << fmt(last.at("desk_fid").get<double>()) << " desk_is "
              << fmt(last.at("desk_is").get<double>()) << " consistency "
              << fmt(last.at("consistency_rate").get<double>()) << "\n";
  }
  std::cout << "run written to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& config, std::optional<std::uint64_t> seed, const std::string& run_dir,
             const std::string& data, const std::string& out) {
  if (!fs::is_directory(run_dir)) throw UsageError("--run '" + run_dir + "' is not a run directory");
  const auto cfg = load_config(config, seed);
  const auto d = load_data_checked(data);
  const auto& h = d.spec.hierarchy;
  const auto models = load_run_models(run_dir, h);
  const auto manifest = nlohmann::json::parse(read_text_file(fs::path(run_dir) / "manifest.json"));
  if (manifest.value("dataset_digest", "") != dataset_digest(d)) {
    info("warning: dataset differs from the one the run was trained on");
  }
  ensure_parent(out);
  OutputLock lock(lock_for_file(out));
  const std::string source = "clf16:" + file_checksum(fs::path(run_dir) / "clf16.ckpt");
  const auto report = evaluate(models, d, cfg.eval.samples_per_class, cfg.eval.seed, 2, source);
  write_file(out, report.to_csv());
  auto j = report.to_json();
  j["real_vs_real_fid"] = real_vs_real_fid(models.c16, d);
  j["run_manifest"] = manifest;
  j["config"] = cfg.resolved();
  write_file(fs::path(out).replace_extension(".json"), j.dump(2) + "\n");
  std::cout << report.to_csv();
  return 0;
}

int cmd_inspect(const std::string& embeddings, const std::string& hierarchy, const std::string& out) {
  for (const auto& p : {embeddings, hierarchy})
    if (!fs::exists(p)) throw UsageError("'" + p + "' does not exist");
  const auto h = parse_hierarchy(read_text_file(hierarchy));
  const auto table = ClassEmbeddingTable::from_checkpoint(load_checkpoint(embeddings));
  if (!table.matches(h)) throw UsageError("embedding table does not match hierarchy '" + hierarchy + "'");
  ensure_parent(out);
  OutputLock lock(lock_for_file(out));
  const auto sim = similarity_matrix(table);
  std::string csv = "class";
  for (std::size_t j = 0; j < h.size(); ++j) csv += "," + h.name(j);
  csv += "\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    csv += h.name(i);
    for (double v : sim[i]) csv += "," + fmt(v, "%.10g");
    csv += "\n";
  }
  write_file(out, csv);
  const auto sib = sibling_similarity(table, h);
  std::cout << "sibling_similarity " << fmt(sib.sibling) << " non_sibling_similarity " << fmt(sib.non_sibling)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"treegan: hierarchy-aware conditional image generation at desk scale"};
  app.require_subcommand(1);
  std::string config, out, hierarchy, data, mode, clf8, clf16, embeddings, run_dir;
  int resolution = 0;
  std::optional<std::uint64_t> seed;

  auto common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) {
      sub->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
      sub->add_option("--seed", seed, "override every seed in the configuration");
    }
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  common(gen);
  gen->add_option("--out", out, "dataset file")->required();

  auto* che = app.add_subcommand("train-che", "train class embeddings on a hierarchy");
  common(che);
  che->add_option("--hierarchy", hierarchy, "hierarchy file")->required();
  che->add_option("--out", out, "embedding checkpoint")->required();

  auto* clf = app.add_subcommand("train-clf", "train a hierarchical classifier");
  common(clf);
  clf->add_option("--data", data, "dataset file")->required();
  clf->add_option("--resolution", resolution, "8 or 16")->required();
  clf->add_option("--out", out, "classifier checkpoint")->required();

  auto* gan = app.add_subcommand("train-gan", "train the two-stage generator");
  common(gan);
  gan->add_option("--mode", mode, "treegan, npc, seg or flat")->required();
  gan->add_option("--data", data, "dataset file")->required();
  gan->add_option("--clf8", clf8, "8x8 classifier checkpoint")->required();
  gan->add_option("--clf16", clf16, "16x16 classifier checkpoint")->required();
  gan->add_option("--embeddings", embeddings, "embedding checkpoint (required for seg, refused for flat)");
  gan->add_option("--out", out, "run directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a run");
  common(ev);
  ev->add_option("--run", run_dir, "run directory")->required();
  ev->add_option("--data", data, "dataset file")->required();
  ev->add_option("--out", out, "report CSV (a JSON twin is written alongside)")->required();

  auto* insp = app.add_subcommand("inspect-embeddings", "write the class similarity matrix");
  common(insp, false);
  insp->add_option("--embeddings", embeddings, "embedding checkpoint")->required();
  insp->add_option("--hierarchy", hierarchy, "hierarchy file")->required();
  insp->add_option("--out", out, "similarity CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 1;
  }

  try {
    debug("starting " + app.get_subcommands().front()->get_name());
    if (gen->parsed()) return cmd_gen_data(config, seed, out);
    if (che->parsed()) return cmd_train_che(config, seed, hierarchy, out);
    if (clf->parsed()) return cmd_train_clf(config, seed, data, resolution, out);
    if (gan->parsed()) return cmd_train_gan(config, seed, mode, data, clf8, clf16, embeddings, out);
    if (ev->parsed()) return cmd_eval(config, seed, run_dir, data, out);
    if (insp->parsed()) return cmd_inspect(embeddings, hierarchy, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "hierarchy error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
