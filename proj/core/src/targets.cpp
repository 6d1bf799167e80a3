// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/targets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "simc3d/rng.hpp"

namespace simc3d {
namespace {

void check_d_model(int d_model) {
  if (d_model <= 0 || d_model % 4 != 0)
    throw std::invalid_argument("positional encoding dimension must be a positive multiple of 4, got " +
                                std::to_string(d_model));
}

void check_grid(int grid_x, int grid_y) {
  if (grid_x < 2 || grid_y < 2) throw std::invalid_argument("target grid must be at least 2×2");
}

template <typename Fn>
TargetGrid build_grid(int grid_x, int grid_y, int d_model, Fn encode) {
  check_grid(grid_x, grid_y);
  check_d_model(d_model);
  TargetGrid g;
  g.grid_x = grid_x;
  g.grid_y = grid_y;
  g.dim = d_model;
  g.values.resize(g.cells() * static_cast<std::size_t>(d_model));
  for (int y = 0; y < grid_y; ++y)
    for (int x = 0; x < grid_x; ++x) {
      const Eigen::VectorXd v = encode(x, y);
      std::copy(v.data(), v.data() + d_model, g.cell(x, y));
    }
  return g;
}

}  // namespace

Eigen::VectorXd positional_encoding_2d(double x, double y, int d_model) {
  check_d_model(d_model);
  Eigen::VectorXd pe(d_model);
  const int half = d_model / 2;
  for (int i = 0; 2 * i < half; ++i) {
    const double freq = std::pow(10000.0, -4.0 * i / d_model);
    pe[2 * i] = std::sin(x * freq);
    pe[2 * i + 1] = std::cos(x * freq);
    pe[half + 2 * i] = std::sin(y * freq);
    pe[half + 2 * i + 1] = std::cos(y * freq);
  }
  return pe;
}

Eigen::VectorXd positional_encoding_1d_variant(double /*x*/, double y, int d_model) {
  check_d_model(d_model);
  // Standard 1D sinusoidal code of the row coordinate over all d_model dims.
  Eigen::VectorXd pe(d_model);
  for (int i = 0; 2 * i < d_model; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / d_model);
    pe[2 * i] = std::sin(y * freq);
    pe[2 * i + 1] = std::cos(y * freq);
  }
  return pe;
}

PositionalEncodingMap build_pe_map(int grid_x, int grid_y, int d_model) {
  return build_grid(grid_x, grid_y, d_model,
                    [d_model](int x, int y) { return positional_encoding_2d(x, y, d_model); });
}

PositionalEncodingMap build_pe1d_map(int grid_x, int grid_y, int d_model) {
  return build_grid(grid_x, grid_y, d_model, [d_model](int x, int y) {
    return positional_encoding_1d_variant(x, y, d_model);
  });
}

std::string_view to_string(TargetVariant v) {
  switch (v) {
    case TargetVariant::kPe2d: return "pe2d";
    case TargetVariant::kPe1d: return "pe1d";
    case TargetVariant::kLearnable: return "learnable";
    case TargetVariant::kConvColor: return "conv_color";
    case TargetVariant::kConvDepth: return "conv_depth";
  }
  return "pe2d";
}

TargetVariant parse_target_variant(std::string_view text) {
  for (TargetVariant v : {TargetVariant::kPe2d, TargetVariant::kPe1d, TargetVariant::kLearnable,
                          TargetVariant::kConvColor, TargetVariant::kConvDepth})
    if (to_string(v) == text) return v;
  throw std::invalid_argument("unknown target variant '" + std::string(text) +
                              "' (valid: pe2d, pe1d, learnable, conv_color, conv_depth)");
}

Eigen::Vector2d pixel_to_grid(const Eigen::Vector2d& uv, int image_width, int image_height,
                              int grid_x, int grid_y) {
  auto axis = [](double p, int size, int grid) {
    if (size <= 1) return 0.0;
    return std::clamp(p * (grid - 1) / (size - 1.0), 0.0, grid - 1.0);
  };
  return {axis(uv.x(), image_width, grid_x), axis(uv.y(), image_height, grid_y)};
}

int nearest_cell(const Eigen::Vector2d& uv, int image_width, int image_height, int grid_x,
                 int grid_y) {
  const Eigen::Vector2d g = pixel_to_grid(uv, image_width, image_height, grid_x, grid_y);
  const int x = std::clamp(static_cast<int>(std::lround(g.x())), 0, grid_x - 1);
  const int y = std::clamp(static_cast<int>(std::lround(g.y())), 0, grid_y - 1);
  return y * grid_x + x;
}

BilinearStencil bilinear_stencil(const Eigen::Vector2d& grid_xy, int grid_x, int grid_y) {
  check_grid(grid_x, grid_y);
  const double gx = std::clamp(grid_xy.x(), 0.0, grid_x - 1.0);
  const double gy = std::clamp(grid_xy.y(), 0.0, grid_y - 1.0);
  const int x0 = std::min(static_cast<int>(std::floor(gx)), grid_x - 2);
  const int y0 = std::min(static_cast<int>(std::floor(gy)), grid_y - 2);
  const double fx = gx - x0;
  const double fy = gy - y0;
  BilinearStencil s;
  s.cell[0] = y0 * grid_x + x0;
  s.cell[1] = y0 * grid_x + x0 + 1;
  s.cell[2] = (y0 + 1) * grid_x + x0;
  s.cell[3] = (y0 + 1) * grid_x + x0 + 1;
  s.weight[0] = (1.0 - fx) * (1.0 - fy);
  s.weight[1] = fx * (1.0 - fy);
  s.weight[2] = (1.0 - fx) * fy;
  s.weight[3] = fx * fy;
  return s;
}

Eigen::VectorXd sample_target(const TargetGrid& grid, const Eigen::Vector2d& uv, int image_width,
                              int image_height) {
  const BilinearStencil s = bilinear_stencil(
      pixel_to_grid(uv, image_width, image_height, grid.grid_x, grid.grid_y), grid.grid_x,
      grid.grid_y);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.dim);
  for (int c = 0; c < 4; ++c) {
    if (s.weight[c] == 0.0) continue;
    out += s.weight[c] *
           Eigen::Map<const Eigen::VectorXd>(
               grid.values.data() + static_cast<std::size_t>(s.cell[c]) * grid.dim, grid.dim);
  }
  return out;
}

ConvLocalityTarget ConvLocalityTarget::random(int out_channels, std::uint64_t seed) {
  if (out_channels <= 0) throw std::invalid_argument("conv target needs positive out_channels");
  ConvLocalityTarget t;
  t.out_channels = out_channels;
  const int fan_in = kKernel * kKernel * kChannels;
  const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Rng rng(seed);
  t.weights.resize(out_channels, fan_in);
  for (int o = 0; o < out_channels; ++o)
    for (int i = 0; i < fan_in; ++i) t.weights(o, i) = sd * rng.normal();
  t.bias.resize(out_channels);
  for (int o = 0; o < out_channels; ++o) t.bias[o] = sd * rng.normal();
  return t;
}

TargetGrid conv_locality_forward(const ColorImage& image, const ConvLocalityTarget& target) {
  constexpr int K = ConvLocalityTarget::kKernel;
  constexpr int S = ConvLocalityTarget::kStride;
  constexpr int C = ConvLocalityTarget::kChannels;
  if (image.width != ConvLocalityTarget::kInputSize ||
      image.height != ConvLocalityTarget::kInputSize)
    throw std::invalid_argument("conv_locality_forward: input must be 230×230, got " +
                                std::to_string(image.width) + "×" + std::to_string(image.height));
  const int out = ConvLocalityTarget::output_size(ConvLocalityTarget::kInputSize);
  Eigen::MatrixXd patches(out * out, K * K * C);
  for (int oy = 0; oy < out; ++oy)
    for (int ox = 0; ox < out; ++ox) {
      const int row = oy * out + ox;
      int col = 0;
      for (int dy = 0; dy < K; ++dy)
        for (int dx = 0; dx < K; ++dx) {
          const std::size_t i = image.index(ox * S + dx, oy * S + dy);
          for (int c = 0; c < C; ++c) patches(row, col++) = image.rgb[i + c];
        }
    }
  const Eigen::MatrixXd response =
      (patches * target.weights.transpose()).rowwise() + target.bias.transpose();

  TargetGrid g;
  g.grid_x = out;
  g.grid_y = out;
  g.dim = target.out_channels;
  g.values.resize(g.cells() * g.dim);
  for (int cell = 0; cell < out * out; ++cell)
    for (int o = 0; o < g.dim; ++o)
      g.values[static_cast<std::size_t>(cell) * g.dim + o] = response(cell, o);
  return g;
}

std::array<float, 3> heat_colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t <= 0.5)
    return {0.0f, static_cast<float>(2.0 * t), static_cast<float>(1.0 - 2.0 * t)};
  return {static_cast<float>(2.0 * t - 1.0), static_cast<float>(2.0 - 2.0 * t), 0.0f};
}

ColorImage depth_to_heatmap(const DepthMap& depth) {
  ColorImage out(depth.width, depth.height);
  if (depth.values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(depth.values.begin(), depth.values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u) {
      const double t = range > 0.0 ? (depth.at(u, v) - lo) / range : 0.5;
      out.set_pixel(u, v, heat_colormap(t));
    }
  return out;
}

}  // namespace simc3d
