// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace simc3d {

enum class DepthKind { kMetric, kInverse };

std::string_view to_string(DepthKind kind);
/// Parses "metric" or "inverse"; throws std::invalid_argument otherwise.
DepthKind parse_depth_kind(std::string_view text);

/// Row-major per-pixel depth. Metric maps are in meters, inverse maps are
/// unitless reciprocal-depth predictions.
struct DepthMap {
  int width = 0;
  int height = 0;
  DepthKind kind = DepthKind::kMetric;
  std::vector<double> values;

  DepthMap() = default;
  DepthMap(int w, int h, DepthKind k, double fill = 0.0)
      : width(w), height(h), kind(k),
        values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int u, int v) { return values[index(u, v)]; }
  double at(int u, int v) const { return values[index(u, v)]; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(u);
  }
};

/// Row-major RGB image with channels in [0, 1].
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;  // 3 floats per pixel

  ColorImage() = default;
  ColorImage(int w, int h, float fill = 0.0f)
      : width(w), height(h),
        rgb(3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::size_t index(int u, int v) const {
    return 3 * (static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(u));
  }
  std::array<float, 3> pixel(int u, int v) const {
    const std::size_t i = index(u, v);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void set_pixel(int u, int v, std::array<float, 3> c) {
    const std::size_t i = index(u, v);
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }
};

/// Bilinear resize of a color image to the given size (pixel-center aligned).
ColorImage resize_bilinear(const ColorImage& image, int width, int height);

}  // namespace simc3d
