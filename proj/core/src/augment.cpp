// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include <Eigen/Geometry>

#include "simc3d/rng.hpp"

namespace simc3d {
namespace {

void check_range(const Range& r, const char* name) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
    throw std::invalid_argument(std::string("augmentation range '") + name + "' is not ordered");
}

void check_ratio(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0))
    throw std::invalid_argument(std::string("augmentation ratio '") + name + "' is not in [0, 1]");
}

/// `count` distinct indices from [0, n), returned in increasing order.
std::vector<std::size_t> choose_sorted(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

AxisBox bounds_of(const std::vector<Eigen::Vector3d>& pts, const std::vector<std::size_t>& rows) {
  AxisBox b{Eigen::Vector3d::Constant(INFINITY), Eigen::Vector3d::Constant(-INFINITY)};
  for (std::size_t r : rows) {
    b.lo = b.lo.cwiseMin(pts[r]);
    b.hi = b.hi.cwiseMax(pts[r]);
  }
  return b;
}

}  // namespace

AugmentationConfig AugmentationConfig::identity(std::size_t sample_count) {
  AugmentationConfig cfg;
  cfg.scale = {1.0, 1.0};
  cfg.yaw = {0.0, 0.0};
  cfg.tilt = {0.0, 0.0};
  cfg.translation = {0.0, 0.0};
  cfg.crop_keep = {1.0, 1.0};
  cfg.drop_ratio = 0.0;
  cfg.sample_count = sample_count;
  cfg.color_jitter = 0.0;
  cfg.mask_ratio = 0.0;
  return cfg;
}

void AugmentationConfig::validate() const {
  check_range(scale, "scale");
  check_range(yaw, "yaw");
  check_range(tilt, "tilt");
  check_range(translation, "translation");
  check_range(crop_keep, "crop_keep");
  if (!(scale.lo > 0.0)) throw std::invalid_argument("augmentation scale must be positive");
  if (!(crop_keep.lo > 0.0 && crop_keep.hi <= 1.0))
    throw std::invalid_argument("crop keep-ratio must lie in (0, 1]");
  check_ratio(drop_ratio, "drop_ratio");
  check_ratio(mask_ratio, "mask_ratio");
  if (sample_count == 0) throw std::invalid_argument("sample_count must be positive");
  if (!(color_jitter >= 0.0)) throw std::invalid_argument("color_jitter must be non-negative");
  if (mask_block_voxels < 1) throw std::invalid_argument("mask_block_voxels must be >= 1");
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");
}

std::vector<Eigen::Vector3d> color_jitter(const std::vector<Eigen::Vector3d>& colors,
                                          double amplitude, Rng& rng) {
  if (!(amplitude >= 0.0)) throw std::invalid_argument("color_jitter: amplitude must be >= 0");
  std::vector<Eigen::Vector3d> out = colors;
  if (amplitude == 0.0) return out;
  for (auto& c : out)
    for (int ch = 0; ch < 3; ++ch)
      c[ch] = std::clamp(c[ch] + rng.uniform(-amplitude, amplitude), 0.0, 1.0);
  return out;
}

AugmentedView apply_augmentations(const PointCloud& pc, const AugmentationConfig& cfg, Rng& rng) {
  if (pc.empty()) throw std::invalid_argument("apply_augmentations: empty point cloud");
  cfg.validate();

  AugmentedView view;
  Similarity& xf = view.transform;
  xf.scale = rng.uniform(cfg.scale.lo, cfg.scale.hi);
  const double yaw = rng.uniform(cfg.yaw.lo, cfg.yaw.hi);
  const double tilt_x = rng.uniform(cfg.tilt.lo, cfg.tilt.hi);
  const double tilt_y = rng.uniform(cfg.tilt.lo, cfg.tilt.hi);
  xf.rotation = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                 Eigen::AngleAxisd(tilt_y, Eigen::Vector3d::UnitY()) *
                 Eigen::AngleAxisd(tilt_x, Eigen::Vector3d::UnitX()))
                    .toRotationMatrix();
  for (int a = 0; a < 3; ++a) xf.translation[a] = rng.uniform(cfg.translation.lo, cfg.translation.hi);

  std::vector<Eigen::Vector3d> moved(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) moved[i] = xf.apply(pc.positions[i]);

  // Crop on the horizontal axes.
  std::vector<std::size_t> all(pc.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const AxisBox full = bounds_of(moved, all);
  double keep = rng.uniform(cfg.crop_keep.lo, cfg.crop_keep.hi);
  std::vector<std::size_t> rows;
  for (int attempt = 0; attempt <= 3 && rows.empty(); ++attempt) {
    AxisBox box = full;
    if (keep < 1.0) {
      for (int a = 0; a < 2; ++a) {
        const double extent = full.hi[a] - full.lo[a];
        const double len = keep * extent;
        box.lo[a] = full.lo[a] + rng.uniform(0.0, extent - len);
        box.hi[a] = box.lo[a] + len;
      }
    }
    for (std::size_t i = 0; i < moved.size(); ++i)
      if (box.contains(moved[i])) rows.push_back(i);
    view.crop_box = box;
    keep = 0.5 * (keep + 1.0);
  }
  if (rows.empty()) {
    rows = all;
    view.crop_box = full;
  }

  if (cfg.drop_ratio > 0.0) {
    const auto dropped = static_cast<std::size_t>(std::floor(cfg.drop_ratio * rows.size()));
    const std::size_t remain = std::max<std::size_t>(1, rows.size() - dropped);
    std::vector<std::size_t> pick = choose_sorted(rows.size(), remain, rng);
    for (auto& p : pick) p = rows[p];
    rows = std::move(pick);
  }

  if (rows.size() > cfg.sample_count) {
    std::vector<std::size_t> pick = choose_sorted(rows.size(), cfg.sample_count, rng);
    for (auto& p : pick) p = rows[p];
    rows = std::move(pick);
  } else if (rows.size() < cfg.sample_count) {
    const std::size_t base = rows.size();
    while (rows.size() < cfg.sample_count)
      rows.push_back(rows[static_cast<std::size_t>(rng.uniform_index(base))]);
  }

  const std::size_t m = rows.size();
  view.source_rows = rows;
  view.kept.resize(m);
  PointCloud& out = view.cloud;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t r = rows[i];
    view.kept[i] = pc.point_id[r];
    out.positions.push_back(moved[r]);
    out.src_uv.push_back(pc.src_uv[r]);
    out.src_view.push_back(pc.src_view[r]);
    out.point_id.push_back(static_cast<std::int64_t>(i));
  }
  view.color_masked.assign(m, 0);

  if (pc.has_colors()) {
    view.original_colors.reserve(m);
    for (std::size_t r : rows) view.original_colors.push_back(pc.colors[r]);
    out.colors = color_jitter(view.original_colors, cfg.color_jitter, rng);

    if (cfg.mask_ratio > 0.0) {
      const double block = cfg.mask_block_voxels * cfg.voxel_size;
      using Key = std::tuple<long, long, long>;
      std::map<Key, std::vector<std::size_t>> blocks;
      for (std::size_t i = 0; i < m; ++i) {
        const Eigen::Vector3d& p = out.positions[i];
        blocks[Key{static_cast<long>(std::floor(p.x() / block)),
                   static_cast<long>(std::floor(p.y() / block)),
                   static_cast<long>(std::floor(p.z() / block))}]
            .push_back(i);
      }
      for (const auto& [key, members] : blocks) {
        if (!rng.bernoulli(cfg.mask_ratio)) continue;
        for (std::size_t i : members) {
          out.colors[i].setZero();
          view.color_masked[i] = 1;
        }
      }
    }
  }
  return view;
}

PairedViews paired_views(const PointCloud& pc, const AugmentationConfig& cfg, Rng& rng) {
  PairedViews pv;
  pv.view = apply_augmentations(pc, cfg, rng);
  pv.match_uv.reserve(pv.view.size());
  for (std::size_t r : pv.view.source_rows) pv.match_uv.push_back(pc.src_uv[r]);
  return pv;
}

}  // namespace simc3d
