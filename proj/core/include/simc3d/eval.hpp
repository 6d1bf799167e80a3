// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "simc3d/augment.hpp"
#include "simc3d/checkpoint.hpp"
#include "simc3d/config.hpp"
#include "simc3d/dataio.hpp"
#include "simc3d/tensor.hpp"
#include "simc3d/train.hpp"

namespace simc3d {

struct SimilarityRow {
  long step = 0;
  double pos_sim = 0.0;
  double neg_sim = 0.0;
};

/// Two augmented views of every probe scene through encoder + online head.
/// Positive = mean cosine between rows that share a source point; negative =
/// mean cosine over all other cross-view row pairs. `augment` overrides the
/// checkpoint's augmentation config when given.
SimilarityRow similarity_probe(const Checkpoint& ckpt, const std::vector<LoadedScene>& scenes,
                               std::uint64_t seed,
                               const std::optional<AugmentationConfig>& augment = {});

std::vector<SimilarityRow> similarity_curves(const std::vector<Checkpoint>& series,
                                             const std::vector<LoadedScene>& scenes,
                                             std::uint64_t seed);

struct RetrievalResult {
  double accuracy = 0.0;
  std::size_t points = 0;
  /// Accuracy expected if predictions were independent of the labels:
  /// Σ_c P(pred = c)·P(label = c) over the probed points.
  double chance = 0.0;
};

/// Online head features are assigned to the grid cell whose head-projected
/// target vector has the highest cosine; accuracy is the fraction equal to
/// the nearest cell of the point's source pixel. With `oracle`, each point's
/// bilinearly sampled raw target is matched against the raw cell vectors
/// instead (no learned weights involved).
RetrievalResult position_retrieval_probe(const Checkpoint& ckpt,
                                         const std::vector<LoadedScene>& scenes,
                                         std::uint64_t seed, bool oracle = false);

/// Online encoder features of one augmented view of a scene (N×feature_dim).
Matrix<double> extract_features(const Checkpoint& ckpt, const LoadedScene& scene,
                                std::uint64_t seed);

struct PcaResult {
  FeatureTable table;                 // N×3, columns pc1..pc3 in [0, 1]
  std::array<double, 3> explained{};  // variance fraction per component
  Matrix<double> components;          // 3×D, rows unit length
  Eigen::VectorXd mean;
};

/// Top-3 principal directions of the mean-centered rows (covariance
/// eigendecomposition); each direction's largest-magnitude loading is made
/// positive. Throws std::invalid_argument when N < 3.
PcaResult pca_feature_export(const Matrix<double>& features);

/// Squared reconstruction error of the centered rows using the top `r`
/// principal directions.
double pca_reconstruction_error(const Matrix<double>& features, int r);

struct KMeansResult {
  std::vector<int> labels;
  Matrix<double> centers;
  std::vector<double> inertia_history;  // after each Lloyd iteration
  double inertia = 0.0;
};

/// Lloyd iterations (at most 50) from a seeded farthest-point start.
/// Throws std::invalid_argument when k > N or k < 1.
KMeansResult kmeans(const Matrix<double>& features, int k, std::uint64_t seed);
std::vector<int> kmeans_labels(const Matrix<double>& features, int k, std::uint64_t seed);

/// Rebuilds the run configuration stored in a checkpoint.
TrainConfig checkpoint_config(const Checkpoint& ckpt);

}  // namespace simc3d
