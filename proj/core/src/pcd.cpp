// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/pcd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <string>
#include <tuple>
#include <unordered_set>

#include "simc3d/rng.hpp"

namespace simc3d {

void PointCloud::reserve(std::size_t n) {
  positions.reserve(n);
  src_uv.reserve(n);
  src_view.reserve(n);
  point_id.reserve(n);
}

void PointCloud::push_from(const PointCloud& other, std::size_t i) {
  positions.push_back(other.positions[i]);
  if (other.has_colors()) colors.push_back(other.colors[i]);
  src_uv.push_back(other.src_uv[i]);
  src_view.push_back(other.src_view[i]);
  point_id.push_back(other.point_id[i]);
}

PointCloud PointCloud::select(const std::vector<std::size_t>& rows) const {
  PointCloud out;
  out.reserve(rows.size());
  if (has_colors()) out.colors.reserve(rows.size());
  for (std::size_t r : rows) out.push_from(*this, r);
  return out;
}

void PointCloud::validate() const {
  const std::size_t n = positions.size();
  if (src_uv.size() != n || src_view.size() != n || point_id.size() != n ||
      (!colors.empty() && colors.size() != n))
    throw std::invalid_argument("point cloud arrays have different lengths");
  for (const auto& p : positions)
    if (!p.allFinite()) throw std::invalid_argument("point cloud has a non-finite position");
  std::unordered_set<std::int64_t> ids(point_id.begin(), point_id.end());
  if (ids.size() != n) throw std::invalid_argument("point cloud has duplicate point ids");
}

PointCloud grid_sample(const PointCloud& pc, double cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("grid_sample: cell must be positive");
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  struct Entry {
    Key key;
    std::int64_t id;
    std::size_t row;
  };
  std::vector<Entry> entries;
  entries.reserve(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Eigen::Vector3d& p = pc.positions[i];
    entries.push_back({Key{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                           static_cast<std::int64_t>(std::floor(p.y() / cell)),
                           static_cast<std::int64_t>(std::floor(p.z() / cell))},
                       pc.point_id[i], i});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.key, a.id) < std::tie(b.key, b.id);
  });
  std::vector<std::pair<std::int64_t, std::size_t>> survivors;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (i == 0 || entries[i].key != entries[i - 1].key)
      survivors.emplace_back(entries[i].id, entries[i].row);
  std::sort(survivors.begin(), survivors.end());
  std::vector<std::size_t> rows;
  rows.reserve(survivors.size());
  for (const auto& s : survivors) rows.push_back(s.second);
  return pc.select(rows);
}

PointCloud view_mixup(const PointCloud& a, const PointCloud& b, double probability, Rng& rng) {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw std::invalid_argument("view_mixup: probability must be in [0, 1]");
  if (!rng.bernoulli(probability)) return a;
  if (a.has_colors() != b.has_colors() && !a.empty() && !b.empty())
    throw std::invalid_argument("view_mixup: clouds disagree on colors");

  std::int32_t view_offset = 0;
  std::int64_t id_offset = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    view_offset = std::max(view_offset, a.src_view[i] + 1);
    id_offset = std::max(id_offset, a.point_id[i] + 1);
  }
  std::int32_t b_min_view = 0;
  std::int64_t b_min_id = 0;
  if (!b.empty()) {
    b_min_view = *std::min_element(b.src_view.begin(), b.src_view.end());
    b_min_id = *std::min_element(b.point_id.begin(), b.point_id.end());
  }

  PointCloud out = a;
  out.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    out.push_from(b, i);
    out.src_view.back() = b.src_view[i] - b_min_view + view_offset;
    out.point_id.back() = b.point_id[i] - b_min_id + id_offset;
  }
  return out;
}

namespace {

using Candidate = std::pair<double, std::uint32_t>;

// Uniform hash grid over the cloud's bounding box.
class CellIndex {
 public:
  CellIndex(const PointCloud& pc, double cell) : cell_(cell) {
    lo_ = pc.positions[0];
    for (const auto& p : pc.positions) lo_ = lo_.cwiseMin(p);
    order_.resize(pc.size());
    std::vector<std::uint64_t> keys(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) {
      keys[i] = pack(coords(pc.positions[i]));
      order_[i] = static_cast<std::uint32_t>(i);
    }
    std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
      return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
    });
    for (std::size_t i = 0; i < order_.size();) {
      std::size_t j = i;
      while (j < order_.size() && keys[order_[j]] == keys[order_[i]]) ++j;
      ranges_.emplace(keys[order_[i]], std::make_pair(i, j));
      i = j;
    }
  }

  Eigen::Array3i coords(const Eigen::Vector3d& p) const {
    return ((p - lo_) / cell_).array().floor().cast<int>();
  }

  // Appends points of every cell at Chebyshev ring `r` around `c`.
  void gather_ring(const Eigen::Array3i& c, int r, std::vector<std::uint32_t>& out) const {
    for (int dx = -r; dx <= r; ++dx)
      for (int dy = -r; dy <= r; ++dy)
        for (int dz = -r; dz <= r; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
          const Eigen::Array3i q = c + Eigen::Array3i(dx, dy, dz);
          if ((q < 0).any() || (q >= kSpan).any()) continue;
          auto it = ranges_.find(pack(q));
          if (it == ranges_.end()) continue;
          for (std::size_t t = it->second.first; t < it->second.second; ++t) out.push_back(order_[t]);
        }
  }

  double cell() const { return cell_; }

 private:
  static constexpr int kSpan = 1 << 20;
  static std::uint64_t pack(const Eigen::Array3i& c) {
    return (static_cast<std::uint64_t>(c.x()) << 42) | (static_cast<std::uint64_t>(c.y()) << 21) |
           static_cast<std::uint64_t>(c.z());
  }

  double cell_;
  Eigen::Vector3d lo_;
  std::vector<std::uint32_t> order_;
  std::unordered_map<std::uint64_t, std::pair<std::size_t, std::size_t>> ranges_;
};

}  // namespace

NeighborTable knn_indices(const PointCloud& pc, std::size_t k) {
  const std::size_t n = pc.size();
  if (k == 0 || k > n)
    throw std::invalid_argument("knn_indices: k must be in [1, N], got k=" + std::to_string(k) +
                                " N=" + std::to_string(n));
  NeighborTable table;
  table.rows = n;
  table.k = k;
  table.indices.resize(n * k);

  auto less = [&](const Candidate& x, const Candidate& y) {
    if (x.first != y.first) return x.first < y.first;
    return pc.point_id[x.second] < pc.point_id[y.second];
  };
  auto emit = [&](std::size_t i, std::vector<Candidate>& cand) {
    std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end(),
                     less);
    std::sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), less);
    for (std::size_t j = 0; j < k; ++j) table.indices[i * k + j] = cand[j].second;
  };

  Eigen::Vector3d lo = pc.positions[0], hi = pc.positions[0];
  for (const auto& p : pc.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d ext = (hi - lo).cwiseMax(1e-9);
  // Points usually lie on surfaces, so size cells from the bounding-box area.
  const double area = ext.x() * ext.y() + ext.y() * ext.z() + ext.x() * ext.z();
  const double cell = std::sqrt(area * static_cast<double>(k) / static_cast<double>(n));
  const bool grid = n > 256 && std::isfinite(cell) && cell > 0 &&
                    (ext / cell).maxCoeff() < static_cast<double>(1 << 19);

  std::vector<Candidate> cand;
  if (!grid) {
    cand.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        cand[j] = {(pc.positions[j] - pc.positions[i]).squaredNorm(), static_cast<std::uint32_t>(j)};
      emit(i, cand);
    }
    return table;
  }

  const CellIndex index(pc, cell);
  std::vector<std::uint32_t> found;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& p = pc.positions[i];
    const Eigen::Array3i c = index.coords(p);
    cand.clear();
    for (int r = 0;; ++r) {
      found.clear();
      index.gather_ring(c, r, found);
      for (std::uint32_t j : found) cand.push_back({(pc.positions[j] - p).squaredNorm(), j});
      if (cand.size() == n) break;
      if (cand.size() >= k) {
        // Unvisited cells are at least r·cell away; strict bound keeps id tie-breaks exact.
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         cand.end(), less);
        const double bound = static_cast<double>(r) * index.cell();
        if (cand[k - 1].first < bound * bound) break;
      }
    }
    emit(i, cand);
  }
  return table;
}

}  // namespace simc3d
