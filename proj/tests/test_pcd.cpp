// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "simc3d/pcd.hpp"
#include "simc3d/rng.hpp"
#include "test_util.hpp"

using namespace simc3d;
using simc3d::testing::random_cloud;

namespace {

PointCloud line_cloud(const std::vector<double>& xs) {
  PointCloud pc;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    pc.positions.emplace_back(xs[i], 0.0, 0.0);
    pc.src_uv.emplace_back(static_cast<double>(i), 0.0);
    pc.src_view.push_back(0);
    pc.point_id.push_back(static_cast<std::int64_t>(i));
  }
  return pc;
}

// O(N²) oracle with the same ordering contract.
std::vector<std::uint32_t> brute_knn(const PointCloud& pc, std::size_t k) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    std::vector<std::uint32_t> idx(pc.size());
    for (std::size_t j = 0; j < pc.size(); ++j) idx[j] = static_cast<std::uint32_t>(j);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double da = (pc.positions[a] - pc.positions[i]).squaredNorm();
      const double db = (pc.positions[b] - pc.positions[i]).squaredNorm();
      return da != db ? da < db : pc.point_id[a] < pc.point_id[b];
    });
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

}  // namespace

TEST_CASE("grid_sample keeps the first id per voxel") {
  PointCloud pc = line_cloud({0.011, 0.012});
  pc.point_id = {7, 3};
  const PointCloud out = grid_sample(pc, 0.02);
  REQUIRE(out.size() == 1);
  CHECK(out.point_id[0] == 3);
  CHECK(out.positions[0].x() == 0.012);
}

TEST_CASE("grid_sample retains lattice points and is idempotent") {
  PointCloud lattice;
  std::int64_t id = 0;
  for (int x = 0; x < 5; ++x)
    for (int y = 0; y < 5; ++y)
      for (int z = 0; z < 4; ++z) {
        lattice.positions.emplace_back(0.05 * x + 0.001, 0.05 * y + 0.001, 0.05 * z + 0.001);
        lattice.src_uv.emplace_back(0, 0);
        lattice.src_view.push_back(0);
        lattice.point_id.push_back(id++);
      }
  CHECK(grid_sample(lattice, 0.02).size() == lattice.size());

  for (std::uint64_t s = 0; s < 100; ++s) {
    const PointCloud pc = random_cloud(300, s, 0.3);
    const PointCloud once = grid_sample(pc, 0.02);
    const PointCloud twice = grid_sample(once, 0.02);
    REQUIRE(once.size() <= pc.size());
    REQUIRE(twice.point_id == once.point_id);
    REQUIRE(twice.positions == once.positions);
    once.validate();
  }
}

TEST_CASE("view_mixup") {
  const PointCloud a = random_cloud(50, 1);
  PointCloud b = random_cloud(30, 2);
  Rng rng(4);
  const PointCloud forced = view_mixup(a, b, 1.0, rng);
  CHECK(forced.size() == 80);
  forced.validate();
  std::set<std::int64_t> ids(forced.point_id.begin(), forced.point_id.end());
  CHECK(ids.size() == 80);
  CHECK(forced.src_view[0] != forced.src_view[79]);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(forced.positions[50 + i] == b.positions[i]);
    CHECK(forced.src_uv[50 + i] == b.src_uv[i]);
  }

  const PointCloud kept = view_mixup(a, b, 0.0, rng);
  CHECK(kept.positions == a.positions);
  CHECK(kept.point_id == a.point_id);

  int mixed = 0;
  const PointCloud tiny_a = random_cloud(2, 5), tiny_b = random_cloud(1, 6);
  for (int t = 0; t < 10000; ++t)
    if (view_mixup(tiny_a, tiny_b, 0.5, rng).size() == 3) ++mixed;
  CHECK(std::abs(mixed / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("knn small cases") {
  const PointCloud pc = line_cloud({0.0, 1.0, 3.0});
  const NeighborTable self = knn_indices(pc, 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(self.at(i, 0) == i);
  const NeighborTable two = knn_indices(pc, 2);
  CHECK(two.at(1, 0) == 1);
  CHECK(two.at(1, 1) == 0);
  CHECK_THROWS_AS(knn_indices(pc, 4), std::invalid_argument);
  CHECK_THROWS_AS(knn_indices(pc, 0), std::invalid_argument);

  // Equidistant neighbors resolve by smaller point_id.
  PointCloud tie = line_cloud({-1.0, 0.0, 1.0});
  tie.point_id = {9, 5, 2};
  CHECK(knn_indices(tie, 2).at(1, 1) == 2);
}

TEST_CASE("knn matches brute force") {
  SUBCASE("uniform volume") {
    const PointCloud pc = random_cloud(500, 17);
    CHECK(knn_indices(pc, 16).indices == brute_knn(pc, 16));
  }
  SUBCASE("surface-like cloud with duplicates and ties") {
    PointCloud pc = random_cloud(600, 21, 3.0);
    for (std::size_t i = 0; i < pc.size(); ++i) {
      pc.positions[i].z() = 0.0;
      pc.positions[i].x() = std::round(pc.positions[i].x() * 10.0) / 10.0;
    }
    pc.positions[5] = pc.positions[6];
    CHECK(knn_indices(pc, 9).indices == brute_knn(pc, 9));
  }
  SUBCASE("k equal to N") {
    const PointCloud pc = random_cloud(300, 3);
    CHECK(knn_indices(pc, 300).indices == brute_knn(pc, 300));
  }
}

TEST_CASE("knn distances are non-decreasing") {
  const PointCloud pc = random_cloud(400, 8);
  const NeighborTable t = knn_indices(pc, 12);
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (std::size_t j = 1; j < t.k; ++j)
      CHECK((pc.positions[t.at(i, j)] - pc.positions[i]).norm() >=
            (pc.positions[t.at(i, j - 1)] - pc.positions[i]).norm());
}
