// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: synth, pretrain, eval.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simc3d/checkpoint.hpp"
#include "simc3d/config.hpp"
#include "simc3d/dataio.hpp"
#include "simc3d/eval.hpp"
#include "simc3d/synth.hpp"
#include "simc3d/train.hpp"

namespace fs = std::filesystem;
using namespace simc3d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

// Raised for bad flags or inputs; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthArgs {
  fs::path out;
  long scenes = 8;
  std::uint64_t seed = 0;
  int width = 160;
  int height = 120;
};

struct PretrainArgs {
  fs::path data;
  std::optional<fs::path> config;
  fs::path out;
  std::optional<std::string> target;
  std::optional<std::string> objective;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  std::string probe;
  fs::path out;
  std::uint64_t seed = 0;
  int clusters = 8;
  long max_points = 0;
  bool oracle = false;
};

int cmd_synth(const SynthArgs& a) {
  if (a.scenes < 1) throw UsageError("--scenes must be at least 1");
  if (a.width < 2 || a.height < 2) throw UsageError("--width/--height must be at least 2");
  const Manifest m = write_synthetic_dataset(a.out, static_cast<std::size_t>(a.scenes), a.seed,
                                             a.width, a.height);
  std::cout << "scenes=" << m.entries.size() << "\n"
            << "manifest=" << (a.out / "manifest.txt").string() << "\n";
  return kExitOk;
}

std::optional<int> env_threads() {
  const char* v = std::getenv("SIMC3D_THREADS");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const int t = std::stoi(v, &used);
    if (used == std::string(v).size()) return t;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string("SIMC3D_THREADS is not an integer: '") + v + "'");
}

int cmd_pretrain(const PretrainArgs& a) {
  TrainConfig cfg;
  if (a.config) {
    if (!fs::is_regular_file(*a.config)) throw UsageError("config not found: " + a.config->string());
    ParsedConfig parsed = parse_train_config(read_text_file(*a.config));
    for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
    cfg = parsed.config;
  }
  if (a.target) cfg.model.target = parse_target_variant(*a.target);
  if (a.objective) cfg.loss.objective = parse_objective(*a.objective);
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  else if (auto t = env_threads()) cfg.threads = *t;
  cfg.validate();

  if (!fs::is_regular_file(a.data)) throw UsageError("manifest not found: " + a.data.string());
  const Manifest manifest = read_manifest(a.data);
  TrainerOptions options;
  options.out_dir = a.out;
  options.log = &std::cerr;
  const TrainResult r = train(cfg, manifest, options);
  const MetricsRecord& last = r.metrics.records.back();
  std::cout << "steps=" << r.final_checkpoint.step << "\n"
            << "initial_loss=" << r.metrics.records.front().loss << "\n"
            << "final_loss=" << last.loss << "\n"
            << "pos_sim=" << last.pos_sim << "\n"
            << "neg_sim=" << last.neg_sim << "\n"
            << "checkpoint=" << (a.out / "final.ckpt").string() << "\n";
  return kExitOk;
}

std::vector<fs::path> checkpoint_files(const fs::path& p) {
  if (fs::is_regular_file(p)) return {p};
  if (!fs::is_directory(p)) throw UsageError("checkpoint not found: " + p.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ".ckpt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("no .ckpt files in " + p.string());
  return files;
}

Matrix<double> probe_features(const Checkpoint& ckpt, const std::vector<LoadedScene>& scenes,
                              const EvalArgs& a) {
  Matrix<double> f = extract_features(ckpt, scenes.front(), a.seed);
  if (a.max_points > 0 && f.rows() > a.max_points) f.conservativeResize(a.max_points, f.cols());
  return f;
}

int cmd_eval(const EvalArgs& a) {
  static const std::vector<std::string> kProbes{"retrieval", "similarity", "pca", "kmeans"};
  if (std::find(kProbes.begin(), kProbes.end(), a.probe) == kProbes.end())
    throw UsageError("unknown probe '" + a.probe + "' (valid: retrieval, similarity, pca, kmeans)");

  std::vector<Checkpoint> series;
  for (const fs::path& f : checkpoint_files(a.checkpoint)) series.push_back(load_checkpoint(f));
  if (a.probe != "similarity" && series.size() > 1)
    throw UsageError("probe '" + a.probe + "' needs a single checkpoint file");
  const Checkpoint& ckpt = series.back();

  if (!fs::is_regular_file(a.data)) throw UsageError("manifest not found: " + a.data.string());
  const std::vector<LoadedScene> scenes =
      load_scenes(read_manifest(a.data), checkpoint_config(ckpt), &std::cerr);
  if (scenes.empty()) throw UsageError("no loadable scenes in " + a.data.string());

  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  std::ofstream out(a.out);
  if (!out && a.probe != "pca") throw UsageError("cannot write " + a.out.string());
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };

  if (a.probe == "retrieval") {
    const RetrievalResult r = position_retrieval_probe(ckpt, scenes, a.seed, a.oracle);
    out << "top1_accuracy,points,chance\n"
        << num(r.accuracy) << "," << r.points << "," << num(r.chance) << "\n";
    std::cout << "top1_accuracy=" << num(r.accuracy) << "\n"
              << "points=" << r.points << "\n"
              << "chance=" << num(r.chance) << "\n";
  } else if (a.probe == "similarity") {
    const std::vector<SimilarityRow> rows = similarity_curves(series, scenes, a.seed);
    out << "step,pos_sim,neg_sim\n";
    for (const auto& r : rows) out << r.step << "," << num(r.pos_sim) << "," << num(r.neg_sim) << "\n";
    std::cout << "rows=" << rows.size() << "\n"
              << "pos_sim=" << num(rows.back().pos_sim) << "\n"
              << "neg_sim=" << num(rows.back().neg_sim) << "\n";
  } else if (a.probe == "pca") {
    const Matrix<double> f = probe_features(ckpt, scenes, a);
    if (f.rows() < 3)
      throw UsageError("pca needs at least 3 feature rows, got " + std::to_string(f.rows()));
    out.close();
    const PcaResult r = pca_feature_export(f);
    write_feature_csv(r.table, a.out);
    std::cout << "rows=" << r.table.rows << "\n";
    for (int i = 0; i < 3; ++i) std::cout << "explained_" << i + 1 << "=" << num(r.explained[static_cast<std::size_t>(i)]) << "\n";
  } else {
    const Matrix<double> f = probe_features(ckpt, scenes, a);
    if (a.clusters < 1 || a.clusters > f.rows())
      throw UsageError("--clusters must be in [1, " + std::to_string(f.rows()) + "]");
    const KMeansResult r = kmeans(f, a.clusters, a.seed);
    out << "row,label\n";
    for (std::size_t i = 0; i < r.labels.size(); ++i) out << i << "," << r.labels[i] << "\n";
    std::cout << "rows=" << r.labels.size() << "\n"
              << "clusters=" << a.clusters << "\n"
              << "iterations=" << r.inertia_history.size() << "\n"
              << "inertia=" << num(r.inertia) << "\n";
  }
  if (!out.good() && out.is_open()) throw std::runtime_error("write failed: " + a.out.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simc3d: synthetic contrastive 3D pretraining at desk scale"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render synthetic depth/color frames and a manifest");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--scenes", sa.scenes, "Number of scenes");
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--width", sa.width, "Image width in pixels");
  synth->add_option("--height", sa.height, "Image height in pixels");

  PretrainArgs pa;
  auto* pretrain = app.add_subcommand("pretrain", "Contrastive pretraining from a manifest");
  pretrain->add_option("--data", pa.data, "Manifest file")->required();
  pretrain->add_option("--config", pa.config, "key=value training config");
  pretrain->add_option("--out", pa.out, "Output directory for checkpoints and metrics.csv")
      ->required();
  pretrain->add_option("--target", pa.target, "pe2d|pe1d|learnable|conv_color|conv_depth");
  pretrain->add_option("--objective", pa.objective, "infonce|posclass");
  pretrain->add_option("--threads", pa.threads, "Worker threads (default 1; SIMC3D_THREADS)");
  pretrain->add_option("--seed", pa.seed, "Override the config seed");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Probe a checkpoint (or a directory of checkpoints)");
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint file or directory")->required();
  eval->add_option("--data", ea.data, "Manifest of probe scenes")->required();
  eval->add_option("--probe", ea.probe, "retrieval|similarity|pca|kmeans")->required();
  eval->add_option("--out", ea.out, "Output CSV")->required();
  eval->add_option("--seed", ea.seed, "Probe seed");
  eval->add_option("--clusters", ea.clusters, "k for the kmeans probe");
  eval->add_option("--max-points", ea.max_points, "Use at most this many feature rows (pca/kmeans)");
  eval->add_flag("--oracle", ea.oracle, "Retrieval with target-branch queries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (synth->parsed()) return cmd_synth(sa);
    if (pretrain->parsed()) return cmd_pretrain(pa);
    return cmd_eval(ea);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
