// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "simc3d/image.hpp"
#include "simc3d/pcd.hpp"

namespace simc3d {

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse_matrix() const;
  /// Throws std::invalid_argument when fx/fy are not positive or the
  /// principal point lies outside the image.
  void validate() const;
};

/// Camera-from-world rigid transform: x_cam = rotation * x_world + translation.
struct WorldTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// The fixed extrinsic: identity with the camera Y and Z axes exchanged.
  /// One axis is negated so the rotation stays proper (det = +1); the
  /// camera's optical axis maps to world +Y and image-down maps to world -Z.
  static WorldTransform axis_exchange();

  /// (this ∘ other): apply `other` first, then this.
  WorldTransform compose(const WorldTransform& other) const;
  WorldTransform inverse() const;
  bool is_orthonormal(double tol = 1e-9) const;
};

/// ScanNet-derived intrinsics scaled to the image size.
/// fx = 574·w/1296, fy = 575·h/968; the principal point (324, 241) is scaled
/// by the same ratios.
CameraIntrinsics intrinsics_for_size(int width, int height);

inline constexpr double kDepthCeiling = 6.0;
inline constexpr double kInverseDepthScale = 0.01;

/// W = clip(0.01·fx / W', 0, 6). Zero inverse depth maps to the ceiling.
DepthMap inverse_depth_to_metric(const DepthMap& inverse, const CameraIntrinsics& k);

/// Lifts every pixel with depth in (0, ceiling] to a world point
/// X = R⁻¹(K⁻¹·w·[u, v, 1]ᵀ − t). Point ids are v·width + u.
PointCloud backproject(const DepthMap& depth, const CameraIntrinsics& k,
                       const WorldTransform& xform,
                       const ColorImage* color = nullptr, int view_id = 0);

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;
  bool valid = false;  // false when the point is at or behind the camera plane
};

/// w·[u, v, 1]ᵀ = K(R·X + t) for every point.
std::vector<Projection> project(const PointCloud& pc, const CameraIntrinsics& k,
                                const WorldTransform& xform);
Projection project_point(const Eigen::Vector3d& world, const CameraIntrinsics& k,
                         const WorldTransform& xform);

}  // namespace simc3d
