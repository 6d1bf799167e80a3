// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "simc3d/pcd.hpp"

namespace simc3d {

class Rng;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Magnitudes of the geometric and photometric augmentations. Defaults are
/// common indoor-pretraining choices.
struct AugmentationConfig {
  Range scale{0.8, 1.25};
  Range yaw{0.0, 6.283185307179586};  // about the gravity (world z) axis
  Range tilt{-0.1, 0.1};              // about world x and y
  Range translation{-0.5, 0.5};       // per axis, meters
  Range crop_keep{0.6, 1.0};          // fraction of the x/y extent kept
  double drop_ratio = 0.2;
  std::size_t sample_count = 4096;
  double color_jitter = 0.05;
  double mask_ratio = 0.3;
  int mask_block_voxels = 10;
  double voxel_size = 0.02;

  /// Everything disabled; `sample_count` is the number of points to keep.
  static AugmentationConfig identity(std::size_t sample_count);
  void validate() const;
};

/// x ↦ scale · rotation · x + translation.
struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const {
    return scale * (rotation * x) + translation;
  }
};

struct AxisBox {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

/// An augmented cloud and its correspondence to the source cloud.
///
/// Row i of `cloud` came from source row `source_rows[i]`, whose point_id is
/// `kept[i]`. `kept` is injective unless the view was upsampled, in which
/// case duplicated rows map to the same source id. The view's own point_ids
/// are fresh (0..M-1).
struct AugmentedView {
  PointCloud cloud;
  std::vector<std::int64_t> kept;
  std::vector<std::size_t> source_rows;
  Similarity transform;
  AxisBox crop_box;  // in augmented coordinates
  std::vector<std::uint8_t> color_masked;
  /// Source colors before jitter and masking (empty if the source had none).
  std::vector<Eigen::Vector3d> original_colors;

  std::size_t size() const { return cloud.size(); }
};

/// scale → rotate → translate → crop → drop → sample → jitter → mask.
/// Throws std::invalid_argument on an empty cloud.
AugmentedView apply_augmentations(const PointCloud& pc, const AugmentationConfig& cfg,
                                  Rng& rng);

/// Adds uniform noise in [-amplitude, amplitude] per channel, then clamps to
/// [0, 1].
std::vector<Eigen::Vector3d> color_jitter(const std::vector<Eigen::Vector3d>& colors,
                                          double amplitude, Rng& rng);

/// One online view plus, per view row, the source pixel its target is
/// sampled at.
struct PairedViews {
  AugmentedView view;
  std::vector<Eigen::Vector2d> match_uv;
};

PairedViews paired_views(const PointCloud& pc, const AugmentationConfig& cfg, Rng& rng);

}  // namespace simc3d
