// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "simc3d/rng.hpp"
#include "simc3d/synth.hpp"
#include "test_util.hpp"

using namespace simc3d;
using simc3d::testing::TempDir;

namespace {

// Independent oracle: intersect the ray with every face rectangle of the room
// and of each box, keeping the nearest positive hit.
double brute_force_depth(const SceneSpec& spec, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  double best = std::numeric_limits<double>::infinity();
  auto faces = [&](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    for (int axis = 0; axis < 3; ++axis) {
      if (d[axis] == 0.0) continue;
      for (double plane : {lo[axis], hi[axis]}) {
        const double t = (plane - o[axis]) / d[axis];
        if (!(t > 1e-12)) continue;
        const Eigen::Vector3d p = o + t * d;
        bool inside = true;
        for (int other = 0; other < 3; ++other)
          if (other != axis && (p[other] < lo[other] - 1e-9 || p[other] > hi[other] + 1e-9))
            inside = false;
        if (inside) best = std::min(best, t);
      }
    }
  };
  faces(Eigen::Vector3d::Zero(), spec.extents);
  for (const SceneBox& b : spec.boxes) faces(b.min_corner(), b.max_corner());
  return best;
}

Eigen::Vector3d ray(const CameraIntrinsics& k, double yaw, int u, int v) {
  const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  return forward + (u - k.cx) / k.fx * right + (v - k.cy) / k.fy * down;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("empty room: wall 3 m ahead has depth 3") {
  SceneSpec spec;
  spec.extents = {3.5, 4.0, 3.0};
  CameraPose pose;
  pose.position = {0.5, 2.0, 1.5};
  pose.yaw = 0.0;
  const CameraIntrinsics k = intrinsics_for_size(64, 48);
  const Frame f = generate_frame(spec, k, pose);
  CHECK(f.depth.at(32, 24) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.depth.at(31, 23) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("box in front of the wall is shallower and matches the oracle") {
  SceneSpec spec;
  spec.extents = {4.0, 4.0, 3.0};
  SceneBox box;
  box.center = {2.5, 2.0, 0.5};
  box.size = {0.6, 1.0, 1.0};
  spec.boxes.push_back(box);
  CameraPose pose;
  pose.position = {0.5, 2.0, 1.2};
  pose.yaw = 0.0;
  const CameraIntrinsics k = intrinsics_for_size(48, 36);
  const Frame with_box = generate_frame(spec, k, pose);
  SceneSpec empty = spec;
  empty.boxes.clear();
  const Frame without = generate_frame(empty, k, pose);

  int covered = 0;
  double worst = 0.0;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const double oracle = brute_force_depth(spec, pose.position, ray(k, pose.yaw, u, v));
      worst = std::max(worst, std::abs(oracle - with_box.depth.at(u, v)));
      if (with_box.depth.at(u, v) != without.depth.at(u, v)) {
        ++covered;
        CHECK(with_box.depth.at(u, v) < without.depth.at(u, v));
      }
    }
  CHECK(covered > 0);
  CHECK(worst < 1e-9);
}

TEST_CASE("rendering is deterministic") {
  Rng a(5), b(5);
  const SceneSpec sa = sample_scene(a);
  const SceneSpec sb = sample_scene(b);
  CHECK(sa.extents == sb.extents);
  REQUIRE(sa.boxes.size() == sb.boxes.size());
  const CameraPose pa = sample_camera_pose(sa, a);
  const CameraPose pb = sample_camera_pose(sb, b);
  const CameraIntrinsics k = intrinsics_for_size(40, 30);
  const Frame fa = generate_frame(sa, k, pa);
  const Frame fb = generate_frame(sb, k, pb);
  CHECK(fa.depth.values == fb.depth.values);
  CHECK(fa.color.rgb == fb.color.rgb);
}

TEST_CASE("sampled scenes respect bounds and render within (0, 6]") {
  const CameraIntrinsics k = intrinsics_for_size(24, 18);
  double max_depth = 0.0;
  double min_depth = 1e9;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Rng rng(s);
    const SceneSpec spec = sample_scene(rng);
    REQUIRE(spec.boxes.size() >= 1);
    REQUIRE(spec.boxes.size() <= 6);
    REQUIRE((spec.extents.array() >= 2.0).all());
    REQUIRE((spec.extents.array() <= 6.0).all());
    spec.validate();
    const Frame f = generate_frame(spec, k, sample_camera_pose(spec, rng));
    for (double w : f.depth.values) {
      max_depth = std::max(max_depth, w);
      min_depth = std::min(min_depth, w);
    }
  }
  CHECK(max_depth <= 6.0);
  CHECK(min_depth > 0.0);
}

TEST_CASE("degenerate poses are rejected") {
  SceneSpec spec;
  const CameraIntrinsics k = intrinsics_for_size(8, 6);
  CameraPose outside;
  outside.position = {-1.0, 1.0, 1.0};
  CHECK_THROWS_AS(generate_frame(spec, k, outside), std::invalid_argument);
  SceneBox box;
  box.center = {2.0, 2.0, 0.5};
  spec.boxes.push_back(box);
  CameraPose in_box;
  in_box.position = {2.0, 2.0, 0.5};
  CHECK_THROWS_AS(generate_frame(spec, k, in_box), std::invalid_argument);
}

TEST_CASE("dataset writer") {
  TempDir a("synth_a"), b("synth_b");
  const Manifest m = write_synthetic_dataset(a.path(), 4, 9, 32, 24);
  CHECK(m.entries.size() == 4);
  std::size_t rasters = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path()))
    if (e.path().extension() == ".pfm" || e.path().extension() == ".ppm") ++rasters;
  CHECK(rasters == 8);
  CHECK(read_manifest(a / "manifest.txt").entries.size() == 4);

  write_synthetic_dataset(b.path(), 4, 9, 32, 24);
  for (const auto& e : m.entries) {
    CHECK(slurp(a / e.depth_path) == slurp(b / e.depth_path));
    CHECK(slurp(a / *e.color_path) == slurp(b / *e.color_path));
  }
  CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
  CHECK_THROWS_AS(write_synthetic_dataset(a.path(), 0, 9, 32, 24), std::invalid_argument);
}
