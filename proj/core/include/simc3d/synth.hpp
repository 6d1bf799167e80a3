// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "simc3d/camera.hpp"
#include "simc3d/dataio.hpp"
#include "simc3d/image.hpp"

namespace simc3d {

class Rng;

using Albedo = std::array<float, 3>;

struct SceneBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  Albedo albedo{0.5f, 0.5f, 0.5f};

  Eigen::Vector3d min_corner() const { return center - 0.5 * size; }
  Eigen::Vector3d max_corner() const { return center + 0.5 * size; }
};

/// Axis-aligned room spanning [0, extents] in a z-up scene frame.
struct SceneSpec {
  Eigen::Vector3d extents{4.0, 4.0, 3.0};
  std::vector<SceneBox> boxes;
  /// -x, +x, -y, +y, floor, ceiling.
  std::array<Albedo, 6> wall_albedo{};
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when extents are not positive or a box
  /// leaves the room.
  void validate() const;
};

/// Horizontal camera looking along yaw (radians, 0 = +x, π/2 = +y).
struct CameraPose {
  Eigen::Vector3d position{2.0, 0.5, 1.5};
  double yaw = 1.5707963267948966;
};

struct Frame {
  DepthMap depth;
  ColorImage color;
};

/// Ray-casts the room: depth is the camera-frame z of the nearest
/// intersection, color the albedo times a fixed Lambert term.
/// Throws std::invalid_argument when the camera is not strictly inside the
/// room or inside a box.
Frame generate_frame(const SceneSpec& spec, const CameraIntrinsics& k,
                     const CameraPose& pose);

/// Room extents in [2, 6] m per axis with 1-6 boxes standing on the floor.
SceneSpec sample_scene(Rng& rng);

/// Camera near one wall, facing across the room along an axis so every
/// rendered depth stays within (0, 6].
CameraPose sample_camera_pose(const SceneSpec& spec, Rng& rng);

/// Scene `index` of the dataset drawn from `seed`, rendered at width×height.
Frame synthesize_frame(std::uint64_t seed, std::size_t index, int width, int height);

/// Writes `count` PFM/PPM pairs plus manifest.txt into `dir`.
/// Throws std::invalid_argument for count < 1 and std::runtime_error when
/// `dir` cannot be written.
Manifest write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count,
                                 std::uint64_t seed, int width, int height);

}  // namespace simc3d
