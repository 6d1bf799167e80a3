// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <cstdio>
#include <stdexcept>
#include <system_error>

#include "simc3d/rng.hpp"

namespace simc3d {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Hit {
  double t = kInf;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  Albedo albedo{};
};

struct CameraBasis {
  Eigen::Vector3d right;
  Eigen::Vector3d down;
  Eigen::Vector3d forward;
};

CameraBasis basis_for(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  // Snap axis-aligned headings so forward distances stay exact.
  auto snap = [](double x) {
    const double r = std::round(x);
    return std::abs(x - r) < 1e-12 ? r : x;
  };
  const double cs = snap(c);
  const double ss = snap(s);
  return {Eigen::Vector3d(ss, -cs, 0.0), Eigen::Vector3d(0.0, 0.0, -1.0),
          Eigen::Vector3d(cs, ss, 0.0)};
}

/// Exit point of a ray starting inside the room.
Hit room_exit(const SceneSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  Hit hit;
  for (int axis = 0; axis < 3; ++axis) {
    const double d = dir[axis];
    if (d == 0.0) continue;
    const bool positive = d > 0.0;
    const double plane = positive ? spec.extents[axis] : 0.0;
    const double t = (plane - origin[axis]) / d;
    if (t < hit.t) {
      hit.t = t;
      hit.normal = Eigen::Vector3d::Zero();
      hit.normal[axis] = positive ? -1.0 : 1.0;
      // wall order: -x, +x, -y, +y, floor, ceiling
      hit.albedo = spec.wall_albedo[static_cast<std::size_t>(2 * axis + (positive ? 1 : 0))];
    }
  }
  return hit;
}

/// Entry point of a ray into a box (slab test), or t = inf.
Hit box_entry(const SceneBox& box, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  const Eigen::Vector3d lo = box.min_corner();
  const Eigen::Vector3d hi = box.max_corner();
  double t_near = -kInf;
  double t_far = kInf;
  int near_axis = -1;
  bool near_from_below = false;
  for (int axis = 0; axis < 3; ++axis) {
    const double d = dir[axis];
    if (d == 0.0) {
      if (origin[axis] < lo[axis] || origin[axis] > hi[axis]) return {};
      continue;
    }
    double t0 = (lo[axis] - origin[axis]) / d;
    double t1 = (hi[axis] - origin[axis]) / d;
    const bool from_below = t0 <= t1;
    if (!from_below) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      near_axis = axis;
      near_from_below = from_below;
    }
    t_far = std::min(t_far, t1);
  }
  Hit hit;
  if (near_axis < 0 || t_near > t_far || t_near <= 0.0) return hit;
  hit.t = t_near;
  hit.normal[near_axis] = near_from_below ? -1.0 : 1.0;
  hit.albedo = box.albedo;
  return hit;
}

bool inside_box(const SceneBox& box, const Eigen::Vector3d& p) {
  return (p.array() >= box.min_corner().array()).all() &&
         (p.array() <= box.max_corner().array()).all();
}

Albedo random_albedo(Rng& rng, double lo, double hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

}  // namespace

void SceneSpec::validate() const {
  if (!(extents.array() > 0.0).all()) throw std::invalid_argument("room extents must be positive");
  for (const SceneBox& b : boxes) {
    if (!(b.size.array() > 0.0).all()) throw std::invalid_argument("box size must be positive");
    if ((b.min_corner().array() < 0.0).any() || (b.max_corner().array() > extents.array()).any())
      throw std::invalid_argument("box extends outside the room");
  }
}

Frame generate_frame(const SceneSpec& spec, const CameraIntrinsics& k, const CameraPose& pose) {
  spec.validate();
  k.validate();
  if (!((pose.position.array() > 0.0).all() && (pose.position.array() < spec.extents.array()).all()))
    throw std::invalid_argument("generate_frame: camera is not inside the room");
  for (const SceneBox& b : spec.boxes)
    if (inside_box(b, pose.position))
      throw std::invalid_argument("generate_frame: camera is inside a box");

  const CameraBasis basis = basis_for(pose.yaw);
  const Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.5, 0.8).normalized();
  Frame frame{DepthMap(k.width, k.height, DepthKind::kMetric), ColorImage(k.width, k.height)};
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const double x = (u - k.cx) / k.fx;
      const double y = (v - k.cy) / k.fy;
      // Camera-frame z of this direction is 1, so the ray parameter is the depth.
      const Eigen::Vector3d dir = x * basis.right + y * basis.down + basis.forward;
      Hit best = room_exit(spec, pose.position, dir);
      for (const SceneBox& b : spec.boxes) {
        const Hit h = box_entry(b, pose.position, dir);
        if (h.t < best.t) best = h;
      }
      frame.depth.at(u, v) = best.t;
      const float shade = static_cast<float>(0.55 + 0.45 * std::abs(best.normal.dot(light)));
      frame.color.set_pixel(u, v, {best.albedo[0] * shade, best.albedo[1] * shade,
                                   best.albedo[2] * shade});
    }
  }
  return frame;
}

SceneSpec sample_scene(Rng& rng) {
  SceneSpec spec;
  spec.seed = rng.next_u64();
  spec.extents = Eigen::Vector3d(rng.uniform(2.0, 6.0), rng.uniform(2.0, 6.0),
                                 rng.uniform(2.0, 6.0));
  for (auto& a : spec.wall_albedo) a = random_albedo(rng, 0.3, 0.9);
  const int count = 1 + static_cast<int>(rng.uniform_index(6));
  for (int i = 0; i < count; ++i) {
    SceneBox b;
    b.size = Eigen::Vector3d(rng.uniform(0.3, std::min(1.5, 0.4 * spec.extents.x())),
                             rng.uniform(0.3, std::min(1.5, 0.4 * spec.extents.y())),
                             rng.uniform(0.3, std::min(2.0, 0.6 * spec.extents.z())));
    b.center.x() = rng.uniform(0.5 * b.size.x(), spec.extents.x() - 0.5 * b.size.x());
    b.center.y() = rng.uniform(0.5 * b.size.y(), spec.extents.y() - 0.5 * b.size.y());
    b.center.z() = 0.5 * b.size.z();
    b.albedo = random_albedo(rng, 0.05, 1.0);
    spec.boxes.push_back(b);
  }
  return spec;
}

CameraPose sample_camera_pose(const SceneSpec& spec, Rng& rng) {
  // heading 0: +x, 1: +y, 2: -x, 3: -y
  const int heading = static_cast<int>(rng.uniform_index(4));
  const int fwd_axis = heading % 2;
  const bool fwd_positive = heading < 2;
  CameraPose pose;
  pose.yaw = heading * 0.5 * std::numbers::pi;
  const int lateral = 1 - fwd_axis;
  const double ez = spec.extents.z();
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::Vector3d p;
    const double back = rng.uniform(0.1, 0.25) * spec.extents[fwd_axis];
    p[fwd_axis] = fwd_positive ? back : spec.extents[fwd_axis] - back;
    p[lateral] = rng.uniform(0.3, 0.7) * spec.extents[lateral];
    p.z() = attempt < 150 ? rng.uniform(0.35, 0.6) * ez : rng.uniform(0.7, 0.85) * ez;
    bool blocked = false;
    for (const SceneBox& b : spec.boxes) {
      SceneBox grown = b;
      grown.size += Eigen::Vector3d::Constant(0.1);
      if (inside_box(grown, p)) blocked = true;
    }
    if (!blocked) {
      pose.position = p;
      return pose;
    }
  }
  pose.position = Eigen::Vector3d(0.5 * spec.extents.x(), 0.5 * spec.extents.y(), 0.9 * ez);
  return pose;
}

Frame synthesize_frame(std::uint64_t seed, std::size_t index, int width, int height) {
  Rng rng = Rng::derive(seed, 7, index);
  const SceneSpec spec = sample_scene(rng);
  const CameraPose pose = sample_camera_pose(spec, rng);
  return generate_frame(spec, intrinsics_for_size(width, height), pose);
}

Manifest write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count,
                                 std::uint64_t seed, int width, int height) {
  if (count < 1) throw std::invalid_argument("synth: scene count must be at least 1");
  if (width < 2 || height < 2) throw std::invalid_argument("synth: image must be at least 2x2");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw std::runtime_error("synth: cannot create directory " + dir.string());

  Manifest manifest;
  manifest.base_dir = dir;
  for (std::size_t i = 0; i < count; ++i) {
    const Frame frame = synthesize_frame(seed, i, width, height);
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%04zu", i);
    ManifestEntry e;
    e.depth_path = std::string(stem) + "_depth.pfm";
    e.color_path = std::string(stem) + "_color.ppm";
    e.width = width;
    e.height = height;
    e.depth_kind = DepthKind::kMetric;
    write_depth_pfm(frame.depth, dir / e.depth_path);
    write_color_ppm(frame.color, dir / *e.color_path);
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(manifest, dir / "manifest.txt");
  return manifest;
}

}  // namespace simc3d
