// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "simc3d/image.hpp"

namespace simc3d {

/// grid_y × grid_x × dim vectors, row-major by (y, x).
struct TargetGrid {
  int grid_x = 0;
  int grid_y = 0;
  int dim = 0;
  std::vector<double> values;

  std::size_t cells() const {
    return static_cast<std::size_t>(grid_x) * static_cast<std::size_t>(grid_y);
  }
  const double* cell(int x, int y) const {
    return values.data() + (static_cast<std::size_t>(y) * grid_x + x) * dim;
  }
  double* cell(int x, int y) {
    return values.data() + (static_cast<std::size_t>(y) * grid_x + x) * dim;
  }
  Eigen::Map<const Eigen::VectorXd> cell_vector(int x, int y) const {
    return Eigen::Map<const Eigen::VectorXd>(cell(x, y), dim);
  }
};

/// The constant sinusoidal position grid.
using PositionalEncodingMap = TargetGrid;

/// Dims [0, d/2) encode x as interleaved sin/cos at frequencies
/// 10000^(-4i/d); dims [d/2, d) encode y the same way.
/// Throws std::invalid_argument unless d_model is a positive multiple of 4.
Eigen::VectorXd positional_encoding_2d(double x, double y, int d_model);

/// Ablation variant that is constant along x: both halves encode y.
Eigen::VectorXd positional_encoding_1d_variant(double x, double y, int d_model);

/// values[y][x] = positional_encoding_2d(x, y, d_model) at integer cells.
PositionalEncodingMap build_pe_map(int grid_x, int grid_y, int d_model);
PositionalEncodingMap build_pe1d_map(int grid_x, int grid_y, int d_model);

enum class TargetVariant { kPe2d, kPe1d, kLearnable, kConvColor, kConvDepth };

std::string_view to_string(TargetVariant v);
TargetVariant parse_target_variant(std::string_view text);

/// Continuous grid coordinate of a source pixel: u·(G−1)/(W−1), clamped to
/// [0, G−1].
Eigen::Vector2d pixel_to_grid(const Eigen::Vector2d& uv, int image_width, int image_height,
                              int grid_x, int grid_y);

/// Nearest grid cell id (y·grid_x + x) of a source pixel.
int nearest_cell(const Eigen::Vector2d& uv, int image_width, int image_height, int grid_x,
                 int grid_y);

/// The four cells surrounding a continuous grid coordinate and their
/// bilinear weights (weights sum to 1; unused corners carry weight 0).
struct BilinearStencil {
  int cell[4];
  double weight[4];
};
BilinearStencil bilinear_stencil(const Eigen::Vector2d& grid_xy, int grid_x, int grid_y);

/// Bilinear sample of `grid` at source pixel uv. Out-of-image uv clamps to
/// the grid edge.
Eigen::VectorXd sample_target(const TargetGrid& grid, const Eigen::Vector2d& uv,
                              int image_width, int image_height);

/// A single frozen convolution whose 7×7 output acts as a locality target.
struct ConvLocalityTarget {
  static constexpr int kKernel = 38;
  static constexpr int kStride = 32;
  static constexpr int kInputSize = 230;
  static constexpr int kChannels = 3;

  int out_channels = 0;
  /// out_channels × (kKernel·kKernel·kChannels), patch laid out (dy, dx, c).
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  /// Gaussian weights scaled by 1/sqrt(fan_in); bias drawn the same way.
  static ConvLocalityTarget random(int out_channels, std::uint64_t seed);

  static constexpr int output_size(int input) { return (input - kKernel) / kStride + 1; }
};

/// Valid (unpadded) convolution of a 230×230×3 image. Throws
/// std::invalid_argument on any other size.
TargetGrid conv_locality_forward(const ColorImage& image, const ConvLocalityTarget& target);

/// Piecewise-linear blue→green→red colormap, t in [0, 1].
std::array<float, 3> heat_colormap(double t);

/// Per-frame min-max normalized depth through the heat colormap. Constant
/// maps render as colormap(0.5).
ColorImage depth_to_heatmap(const DepthMap& depth);

}  // namespace simc3d
