// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace simc3d {

class Rng;

/// World-frame point set with per-point provenance back to the source image.
///
/// All per-point arrays share one length. `colors` is either empty or the
/// same length as `positions`.
struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;
  std::vector<Eigen::Vector2d> src_uv;
  std::vector<std::int32_t> src_view;
  std::vector<std::int64_t> point_id;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_colors() const { return !colors.empty(); }

  void reserve(std::size_t n);
  /// Appends row `i` of `other`.
  void push_from(const PointCloud& other, std::size_t i);
  /// Rows of this cloud selected by index, in the given order.
  PointCloud select(const std::vector<std::size_t>& rows) const;

  /// Throws std::invalid_argument if array lengths disagree, positions are
  /// not finite or point ids repeat.
  void validate() const;
};

/// Keeps one point per occupied voxel of edge `cell`: the smallest point_id.
/// Output rows are ordered by point_id.
PointCloud grid_sample(const PointCloud& pc, double cell);

/// With probability p concatenates `b` after `a`. The rows of `b` get
/// src_view shifted past a's largest view id and point ids shifted past a's
/// largest id, so both stay unique. Otherwise returns `a` unchanged.
PointCloud view_mixup(const PointCloud& a, const PointCloud& b, double probability,
                      Rng& rng);

/// Row-major N×k table of neighbor row indices.
struct NeighborTable {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;

  std::uint32_t at(std::size_t i, std::size_t j) const { return indices[i * k + j]; }
};

/// Exact k nearest neighbors (self included), ordered by distance with
/// ties broken by smaller point_id. Throws std::invalid_argument if k > N or
/// k == 0.
NeighborTable knn_indices(const PointCloud& pc, std::size_t k);

}  // namespace simc3d
