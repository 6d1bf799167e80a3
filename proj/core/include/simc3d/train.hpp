// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "simc3d/augment.hpp"
#include "simc3d/camera.hpp"
#include "simc3d/checkpoint.hpp"
#include "simc3d/config.hpp"
#include "simc3d/dataio.hpp"
#include "simc3d/model.hpp"
#include "simc3d/targets.hpp"

namespace simc3d {

/// Raised when the loss or a parameter stops being finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A manifest entry after metric conversion, back-projection and grid
/// sampling.
struct LoadedScene {
  PointCloud cloud;
  int width = 0;
  int height = 0;
  CameraIntrinsics intrinsics;
  /// Per-scene target grid for the conv-locality providers.
  std::optional<TargetGrid> conv_grid;
};

/// Loads every readable entry; unreadable ones are skipped with a warning
/// written to `log` (if given).
std::vector<LoadedScene> load_scenes(const Manifest& manifest, const TrainConfig& cfg,
                                     std::ostream* log = nullptr);

/// Metric depth → backprojected, grid-sampled cloud for one frame.
LoadedScene prepare_scene(const DepthMap& depth, const ColorImage* color,
                          const TrainConfig& cfg, int view_id = 0);

/// In-memory equivalent of synthesizing `count` scenes and loading them.
std::vector<LoadedScene> synthetic_scenes(std::size_t count, std::uint64_t seed, int width,
                                          int height, const TrainConfig& cfg);

/// Source of per-point target vectors.
class TargetProvider {
 public:
  TargetProvider(TargetVariant variant, int grid, int d_model, std::uint64_t conv_seed);

  TargetVariant variant() const { return variant_; }
  /// The grid targets are sampled from for `scene`: the constant map for the
  /// positional variants, the scene's conv output otherwise. For the
  /// learnable variant this is the initial grid.
  const TargetGrid& grid_for(const LoadedScene& scene) const;
  const TargetGrid& constant_grid() const { return constant_; }
  const ConvLocalityTarget& conv() const { return conv_; }

  /// Conv-locality grid of a frame (color image or depth heatmap).
  TargetGrid conv_grid(const DepthMap& depth, const ColorImage* color) const;

 private:
  TargetVariant variant_;
  TargetGrid constant_;
  ConvLocalityTarget conv_;
};

struct BatchItem {
  AugmentedView view;
  std::vector<Eigen::Vector2d> match_uv;
  /// Scene index (into the loaded scenes) of every src_view id in the view.
  std::vector<std::size_t> view_scene;
  Matrix<float> targets;  // N×d_model
  std::vector<int> cell_labels;
  Eigen::SparseMatrix<float, Eigen::RowMajor> target_weights;
};

/// Builds one scene's view and targets: optional mixup with `partner`, the
/// paired augmentation, then a bilinear target lookup at every point's
/// source pixel.
BatchItem build_item(const std::vector<LoadedScene>& scenes, std::size_t scene,
                     std::optional<std::size_t> partner, const TrainConfig& cfg,
                     const TargetProvider& provider, Rng& rng);

/// Scene indices and per-scene items of a training step, fully determined
/// by (cfg.seed, step).
std::vector<std::size_t> batch_scene_indices(std::size_t num_scenes, const TrainConfig& cfg,
                                             long step);
std::vector<BatchItem> build_batch(const std::vector<LoadedScene>& scenes,
                                   const TrainConfig& cfg, const TargetProvider& provider,
                                   long step);

/// Neighbor table + encoder input + targets in the form the objective takes.
SceneInputs<float> scene_inputs(const BatchItem& item, const TrainConfig& cfg);

struct MetricsRecord {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double pos_sim = 0.0;
  double neg_sim = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRecord> records;

  /// "step,lr,loss,pos_sim,neg_sim" header, 9 significant digits.
  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;
};

struct TrainerOptions {
  std::optional<std::filesystem::path> out_dir;
  std::ostream* log = nullptr;
  /// Stop after this many total steps (exclusive), for resume tests.
  std::optional<long> stop_at;
};

/// Single owner of parameters and optimizer state.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<LoadedScene> scenes);

  /// Continue from a checkpoint written by this trainer's configuration.
  void resume(const Checkpoint& ckpt);

  long total_steps() const;
  long steps_per_epoch() const;
  long current_step() const { return step_; }

  /// One optimizer step. Throws NumericError on a non-finite loss.
  MetricsRecord step();

  /// Runs to completion (or options.stop_at), writing epoch checkpoints and
  /// metrics.csv when out_dir is set.
  MetricsLog run(const TrainerOptions& options = {});

  Checkpoint checkpoint() const;
  const ParameterSet<float>& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<LoadedScene>& scenes() const { return scenes_; }
  const TargetProvider& provider() const { return provider_; }

 private:
  TrainConfig cfg_;
  ModelConfig model_;
  std::vector<LoadedScene> scenes_;
  TargetProvider provider_;
  ParameterSet<float> params_;
  ParameterSet<float> velocity_;
  long step_ = 0;
};

struct TrainResult {
  Checkpoint final_checkpoint;
  MetricsLog metrics;
};

TrainResult train(const TrainConfig& cfg, const Manifest& manifest,
                  const TrainerOptions& options = {});

}  // namespace simc3d
