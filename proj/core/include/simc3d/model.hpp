// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include "simc3d/graph.hpp"
#include "simc3d/loss.hpp"
#include "simc3d/pcd.hpp"
#include "simc3d/targets.hpp"
#include "simc3d/tensor.hpp"

namespace simc3d {

class Rng;
struct AugmentedView;

struct EncoderConfig {
  int in_channels = 3;  // 3 = xyz, 6 = xyz + rgb
  int k = 16;
  std::vector<int> hidden{64, 128};
  int feature_dim = 128;
  int proj_dim = 64;
  /// Layers after the first also receive the mean of their input rows
  /// through a separate weight (PointNet segmentation style scene context).
  bool global_context = true;
  /// Rotate positions about +z so the cloud centroid's bearing lies on +x
  /// before building the per-point input (a fixed input-alignment step).
  bool canonical_yaw = true;

  /// Width of the per-point input row: centroid offset (3) + channels.
  int input_width() const { return 3 + in_channels; }
  void validate() const;
};

/// Everything that fixes the parameter layout.
struct ModelConfig {
  EncoderConfig encoder;
  int d_model = 64;
  int grid = 7;
  TargetVariant target = TargetVariant::kPe2d;
  Objective objective = Objective::kInfoNce;
  /// Target branch reuses the online head (requires d_model == feature_dim).
  bool shared_target_head = false;
  /// Linear color head on encoder features for the reconstruction term.
  bool color_head = false;

  void validate() const;
};

/// Layer sizes: encoder input → hidden... → feature_dim; heads are two
/// layers with hidden width feature_dim. Weights are He-normal, biases zero.
/// The learnable target grid starts at the 2D sinusoidal map.
ParameterSet<float> init_parameters(const ModelConfig& cfg, Rng& rng);

/// Rotation about +z taking the centroid bearing of `cloud` to +x
/// (identity when the centroid lies on the z axis).
Eigen::Matrix3d canonical_yaw_frame(const PointCloud& cloud);

/// Per-point rows [p − mean of its k neighbors, p, rgb?]; k = table.k. Both
/// vectors are expressed in the canonical yaw frame when enabled.

template <typename T>
Matrix<T> encoder_input(const PointCloud& cloud, const NeighborTable& neighbors,
                        const EncoderConfig& cfg);

/// Shared MLP over encoder_input rows → N×feature_dim. ReLU after every
/// hidden layer, linear output.
template <typename T>
typename Graph<T>::Node encode_points(Graph<T>& g, typename Graph<T>::Node input,
                                      const EncoderConfig& cfg);

enum class HeadKind { kOnline, kTarget };

/// Two-layer MLP with ReLU between layers, rows L2-normalized (ε = 1e-8).
template <typename T>
typename Graph<T>::Node project_head(Graph<T>& g, typename Graph<T>::Node features,
                                     HeadKind which, const ModelConfig& cfg);

/// Convenience forward passes without a caller-owned tape.
template <typename T>
Matrix<T> encode_points(const AugmentedView& view, const NeighborTable& neighbors,
                        const ParameterSet<T>& params, const EncoderConfig& cfg);
template <typename T>
Matrix<T> project_head(const Matrix<T>& features, const ParameterSet<T>& params,
                       HeadKind which, const ModelConfig& cfg);

/// Everything one scene contributes to the objective.
template <typename T>
struct SceneInputs {
  Matrix<T> encoder_input;
  /// N×d_model sampled targets (constant providers).
  Matrix<T> targets;
  /// N×G² bilinear weights into the learnable grid.
  Eigen::SparseMatrix<T, Eigen::RowMajor> target_weights;
  std::vector<int> cell_labels;
  Matrix<T> color_target;
  std::vector<std::uint8_t> color_mask;
};

template <typename T>
struct SceneOutputs {
  T loss = 0;
  T main_loss = 0;
  T color_loss = 0;
  T pos_sim = 0;
  T neg_sim = 0;
};

/// Builds the full online + target forward pass for one scene, evaluates the
/// configured objective and, when `grads` is non-null, accumulates
/// grad_scale·∂loss/∂θ into it.
template <typename T>
SceneOutputs<T> scene_objective(const ParameterSet<T>& params, const ModelConfig& model,
                                const LossConfig& loss, const SceneInputs<T>& inputs,
                                GradientSet<T>* grads, T grad_scale = T(1));

/// v ← momentum·v + grad + weight_decay·param; param ← param − lr·v.
template <typename T>
void sgd_momentum_step(ParameterSet<T>& params, const GradientSet<T>& grads,
                       ParameterSet<T>& velocity, double lr, double momentum,
                       double weight_decay);

/// Linear warmup from 0, then base_lr·½(1 + cos(π·progress)).
double cosine_lr(double base_lr, long step, long total_steps, long warmup_steps);

}  // namespace simc3d
