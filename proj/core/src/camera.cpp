// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/camera.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace simc3d {

std::string_view to_string(DepthKind kind) {
  return kind == DepthKind::kMetric ? "metric" : "inverse";
}

DepthKind parse_depth_kind(std::string_view text) {
  if (text == "metric") return DepthKind::kMetric;
  if (text == "inverse") return DepthKind::kInverse;
  throw std::invalid_argument("unknown depth kind: " + std::string(text));
}

ColorImage resize_bilinear(const ColorImage& image, int width, int height) {
  if (width <= 0 || height <= 0 || image.width <= 0 || image.height <= 0)
    throw std::invalid_argument("resize_bilinear: empty size");
  ColorImage out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int v = 0; v < height; ++v) {
    const double y = std::clamp((v + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = y - y0;
    for (int u = 0; u < width; ++u) {
      const double x = std::clamp((u + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = x - x0;
      const std::size_t o = out.index(u, v);
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - fx) * image.rgb[image.index(x0, y0) + c] +
                           fx * image.rgb[image.index(x1, y0) + c];
        const double bottom = (1 - fx) * image.rgb[image.index(x0, y1) + c] +
                              fx * image.rgb[image.index(x1, y1) + c];
        out.rgb[o + c] = static_cast<float>((1 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::inverse_matrix() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw std::invalid_argument("principal point outside the image");
}

WorldTransform WorldTransform::axis_exchange() {
  WorldTransform t;
  // Camera y (down) ↔ z (forward). Rows of camera-from-world.
  t.rotation << 1.0, 0.0, 0.0,
                0.0, 0.0, -1.0,
                0.0, 1.0, 0.0;
  return t;
}

WorldTransform WorldTransform::compose(const WorldTransform& other) const {
  WorldTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

WorldTransform WorldTransform::inverse() const {
  WorldTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

bool WorldTransform::is_orthonormal(double tol) const {
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

CameraIntrinsics intrinsics_for_size(int width, int height) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("intrinsics_for_size: width and height must be positive");
  const double sw = static_cast<double>(width) / 1296.0;
  const double sh = static_cast<double>(height) / 968.0;
  CameraIntrinsics k;
  k.fx = 574.0 * sw;
  k.fy = 575.0 * sh;
  k.cx = 324.0 * sw;
  k.cy = 241.0 * sh;
  k.width = width;
  k.height = height;
  return k;
}

DepthMap inverse_depth_to_metric(const DepthMap& inverse, const CameraIntrinsics& k) {
  if (inverse.kind != DepthKind::kInverse)
    throw std::invalid_argument("inverse_depth_to_metric: input is not an inverse depth map");
  DepthMap out(inverse.width, inverse.height, DepthKind::kMetric);
  const double scale = k.fx * kInverseDepthScale;
  for (std::size_t i = 0; i < inverse.values.size(); ++i) {
    const double w = inverse.values[i];
    out.values[i] = w == 0.0 ? kDepthCeiling : std::clamp(scale / w, 0.0, kDepthCeiling);
  }
  return out;
}

PointCloud backproject(const DepthMap& depth, const CameraIntrinsics& k,
                       const WorldTransform& xform, const ColorImage* color, int view_id) {
  if (depth.kind != DepthKind::kMetric)
    throw std::invalid_argument("backproject: depth map must be metric");
  if (static_cast<std::size_t>(depth.width) * static_cast<std::size_t>(depth.height) !=
      depth.values.size())
    throw std::invalid_argument("backproject: depth value count does not match its size");
  if (color && (color->width != depth.width || color->height != depth.height))
    throw std::invalid_argument("backproject: color and depth dimensions differ");

  const Eigen::Matrix3d k_inv = k.inverse_matrix();
  const Eigen::Matrix3d r_inv = xform.rotation.transpose();
  PointCloud pc;
  pc.reserve(depth.values.size());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double w = depth.at(u, v);
      if (!(w > 0.0 && w <= kDepthCeiling)) continue;
      const Eigen::Vector3d cam = k_inv * (w * Eigen::Vector3d(u, v, 1.0));
      pc.positions.push_back(r_inv * (cam - xform.translation));
      if (color) {
        const auto c = color->pixel(u, v);
        pc.colors.emplace_back(c[0], c[1], c[2]);
      }
      pc.src_uv.emplace_back(u, v);
      pc.src_view.push_back(view_id);
      pc.point_id.push_back(static_cast<std::int64_t>(v) * depth.width + u);
    }
  }
  return pc;
}

Projection project_point(const Eigen::Vector3d& world, const CameraIntrinsics& k,
                         const WorldTransform& xform) {
  const Eigen::Vector3d cam = xform.rotation * world + xform.translation;
  Projection p;
  p.w = cam.z();
  if (!(p.w > 0.0)) return p;
  p.u = k.fx * cam.x() / p.w + k.cx;
  p.v = k.fy * cam.y() / p.w + k.cy;
  p.valid = true;
  return p;
}

std::vector<Projection> project(const PointCloud& pc, const CameraIntrinsics& k,
                                const WorldTransform& xform) {
  std::vector<Projection> out;
  out.reserve(pc.size());
  for (const auto& p : pc.positions) out.push_back(project_point(p, k, xform));
  return out;
}

}  // namespace simc3d
