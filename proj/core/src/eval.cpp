// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "simc3d/rng.hpp"

namespace simc3d {
namespace {

AugmentationConfig effective_augment(const TrainConfig& cfg) {
  AugmentationConfig aug = cfg.augment;
  aug.sample_count = static_cast<std::size_t>(cfg.points_per_view);
  aug.voxel_size = cfg.grid_cell;
  return aug;
}

struct EvalModel {
  TrainConfig cfg;
  ModelConfig model;
  ParameterSet<double> params;
};

EvalModel eval_model(const Checkpoint& ckpt) {
  EvalModel m;
  m.cfg = checkpoint_config(ckpt);
  m.model = m.cfg.resolved_model();
  m.params = ckpt.params.cast<double>();
  return m;
}

Matrix<double> online_features(const EvalModel& m, const PointCloud& cloud, bool head) {
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(m.model.encoder.k),
                                              cloud.size());
  Graph<double> g(m.params);
  auto x = g.constant(encoder_input<double>(cloud, knn_indices(cloud, k), m.model.encoder));
  auto f = encode_points(g, x, m.model.encoder);
  if (!head) return g.value(f);
  return g.value(project_head(g, f, HeadKind::kOnline, m.model));
}

}  // namespace

TrainConfig checkpoint_config(const Checkpoint& ckpt) { return config_from_map(ckpt.metadata); }

SimilarityRow similarity_probe(const Checkpoint& ckpt, const std::vector<LoadedScene>& scenes,
                               std::uint64_t seed,
                               const std::optional<AugmentationConfig>& augment) {
  const EvalModel m = eval_model(ckpt);
  const AugmentationConfig aug = augment ? *augment : effective_augment(m.cfg);
  SimilarityRow row;
  row.step = ckpt.step;
  std::size_t used = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    Rng rng = Rng::derive(seed, 3, s);
    const AugmentedView a = apply_augmentations(scenes[s].cloud, aug, rng);
    const AugmentedView b = apply_augmentations(scenes[s].cloud, aug, rng);
    const Matrix<double> qa = online_features(m, a.cloud, true);
    const Matrix<double> qb = online_features(m, b.cloud, true);

    // Per-source-row sums make duplicated (upsampled) rows count once per pair.
    std::map<std::size_t, std::pair<Eigen::VectorXd, double>> ga, gb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto& e = ga[a.source_rows[i]];
      if (e.first.size() == 0) e.first = Eigen::VectorXd::Zero(qa.cols());
      e.first += qa.row(static_cast<Eigen::Index>(i)).transpose();
      e.second += 1.0;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto& e = gb[b.source_rows[i]];
      if (e.first.size() == 0) e.first = Eigen::VectorXd::Zero(qb.cols());
      e.first += qb.row(static_cast<Eigen::Index>(i)).transpose();
      e.second += 1.0;
    }
    double same = 0.0, same_count = 0.0;
    for (const auto& [src, ea] : ga) {
      auto it = gb.find(src);
      if (it == gb.end()) continue;
      same += ea.first.dot(it->second.first);
      same_count += ea.second * it->second.second;
    }
    const double total = qa.colwise().sum().dot(qb.colwise().sum());
    const double all = static_cast<double>(a.size()) * static_cast<double>(b.size());
    if (same_count == 0.0 || all == same_count) continue;
    row.pos_sim += same / same_count;
    row.neg_sim += (total - same) / (all - same_count);
    ++used;
  }
  if (used) {
    row.pos_sim /= static_cast<double>(used);
    row.neg_sim /= static_cast<double>(used);
  }
  return row;
}

std::vector<SimilarityRow> similarity_curves(const std::vector<Checkpoint>& series,
                                             const std::vector<LoadedScene>& scenes,
                                             std::uint64_t seed) {
  if (series.empty()) throw std::invalid_argument("similarity_curves: need at least one checkpoint");
  std::vector<SimilarityRow> rows;
  for (const Checkpoint& c : series) rows.push_back(similarity_probe(c, scenes, seed));
  return rows;
}

RetrievalResult position_retrieval_probe(const Checkpoint& ckpt,
                                         const std::vector<LoadedScene>& scenes,
                                         std::uint64_t seed, bool oracle) {
  const EvalModel m = eval_model(ckpt);
  const TargetProvider provider(m.cfg.model.target, m.cfg.model.grid, m.cfg.model.d_model,
                                m.cfg.conv_seed);
  const int cells = m.model.grid * m.model.grid;
  const bool posclass = m.model.objective == Objective::kPositionClassification;
  std::size_t hits = 0, total = 0;
  std::vector<std::size_t> pred_count(static_cast<std::size_t>(cells), 0);
  std::vector<std::size_t> label_count(static_cast<std::size_t>(cells), 0);
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    Rng rng = Rng::derive(seed, 4, s);
    const BatchItem item = build_item(scenes, s, std::nullopt, m.cfg, provider, rng);
    const Eigen::Index n = static_cast<Eigen::Index>(item.view.size());

    // Raw provider cell vectors (identity for the classifier objective).
    Matrix<double> cell_raw;
    if (posclass) {
      cell_raw = Matrix<double>::Identity(cells, cells);
    } else if (m.model.target == TargetVariant::kLearnable) {
      cell_raw = m.params.at("target/embedding");
    } else {
      const TargetGrid& grid = provider.grid_for(scenes[s]);
      cell_raw.resize(cells, grid.dim);
      for (int c = 0; c < cells; ++c)
        for (int j = 0; j < grid.dim; ++j)
          cell_raw(c, j) = grid.values[static_cast<std::size_t>(c) * grid.dim + j];
    }
    const Matrix<double> keys =
        (posclass || oracle) ? cell_raw
                             : project_head<double>(cell_raw, m.params, HeadKind::kTarget, m.model);

    Matrix<double> scores;
    if (oracle) {
      // Queries are the sampled targets themselves, matched against raw cells:
      // an upper bound that exercises uv normalization, stencils and labels.
      Matrix<double> q = Matrix<double>::Zero(n, keys.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        const LoadedScene& src = scenes[item.view_scene[static_cast<std::size_t>(
            item.view.cloud.src_view[static_cast<std::size_t>(i)])]];
        const BilinearStencil st = bilinear_stencil(
            pixel_to_grid(item.match_uv[static_cast<std::size_t>(i)], src.width, src.height,
                          m.model.grid, m.model.grid),
            m.model.grid, m.model.grid);
        for (int t = 0; t < 4; ++t) q.row(i) += st.weight[t] * keys.row(st.cell[t]);
      }
      scores = q * keys.transpose();
    } else if (posclass) {
      const Matrix<double> q = online_features(m, item.view.cloud, true);
      scores = (q * m.params.at("head/classifier/weight")).rowwise() +
               m.params.at("head/classifier/bias").row(0);
    } else {
      scores = online_features(m, item.view.cloud, true) * keys.transpose();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      scores.row(i).maxCoeff(&best);
      const int label = item.cell_labels[static_cast<std::size_t>(i)];
      if (static_cast<int>(best) == label) ++hits;
      ++pred_count[static_cast<std::size_t>(best)];
      ++label_count[static_cast<std::size_t>(label)];
      ++total;
    }
  }
  RetrievalResult r;
  r.points = total;
  if (total) {
    const double t = static_cast<double>(total);
    r.accuracy = static_cast<double>(hits) / t;
    for (std::size_t c = 0; c < pred_count.size(); ++c)
      r.chance += static_cast<double>(pred_count[c]) * static_cast<double>(label_count[c]) / (t * t);
  }
  return r;
}

Matrix<double> extract_features(const Checkpoint& ckpt, const LoadedScene& scene,
                                std::uint64_t seed) {
  const EvalModel m = eval_model(ckpt);
  Rng rng = Rng::derive(seed, 5);
  const AugmentedView view = apply_augmentations(scene.cloud, effective_augment(m.cfg), rng);
  return online_features(m, view.cloud, false);
}

namespace {

struct Principal {
  Eigen::VectorXd mean;
  Matrix<double> centered;
  Eigen::VectorXd eigenvalues;  // descending
  Matrix<double> directions;    // rows, descending
};

Principal principal(const Matrix<double>& x) {
  Principal p;
  p.mean = x.colwise().mean().transpose();
  p.centered = x.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov =
      (p.centered.transpose() * p.centered) / std::max<double>(1.0, static_cast<double>(x.rows() - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::Index d = x.cols();
  p.eigenvalues.resize(d);
  p.directions.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    p.eigenvalues[i] = std::max(0.0, es.eigenvalues()[d - 1 - i]);
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    p.directions.row(i) = v.transpose();
  }
  return p;
}

}  // namespace

PcaResult pca_feature_export(const Matrix<double>& features) {
  if (features.rows() < 3) throw std::invalid_argument("pca_feature_export: need at least 3 rows");
  const Principal p = principal(features);
  const Eigen::Index d = features.cols();
  PcaResult r;
  r.mean = p.mean;
  r.components = Matrix<double>::Zero(3, d);
  const double total = p.eigenvalues.sum();
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(3, d); ++i) {
    r.components.row(i) = p.directions.row(i);
    r.explained[static_cast<std::size_t>(i)] = total > 0 ? p.eigenvalues[i] / total : 0.0;
  }
  const Matrix<double> proj = p.centered * r.components.transpose();
  r.table.rows = static_cast<std::size_t>(features.rows());
  r.table.cols = 3;
  r.table.labels = {"pc1", "pc2", "pc3"};
  r.table.values.resize(r.table.rows * 3);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double lo = proj.col(c).minCoeff();
    const double range = proj.col(c).maxCoeff() - lo;
    for (Eigen::Index i = 0; i < proj.rows(); ++i)
      r.table.values[static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(c)] =
          static_cast<float>(range > 0 ? std::clamp((proj(i, c) - lo) / range, 0.0, 1.0) : 0.0);
  }
  return r;
}

double pca_reconstruction_error(const Matrix<double>& features, int r) {
  const Principal p = principal(features);
  const Eigen::Index keep = std::clamp<Eigen::Index>(r, 0, features.cols());
  const Matrix<double> v = p.directions.topRows(keep);
  const Matrix<double> recon = p.centered * v.transpose() * v;
  return (p.centered - recon).squaredNorm();
}

KMeansResult kmeans(const Matrix<double>& x, int k, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: k must be in [1, N]");
  Rng rng(seed);
  std::vector<Eigen::Index> chosen{static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)))};
  Eigen::VectorXd nearest = (x.rowwise() - x.row(chosen[0])).rowwise().squaredNorm();
  while (static_cast<int>(chosen.size()) < k) {
    Eigen::Index far = 0;
    nearest.maxCoeff(&far);
    chosen.push_back(far);
    nearest = nearest.cwiseMin((x.rowwise() - x.row(far)).rowwise().squaredNorm());
  }
  KMeansResult r;
  r.centers.resize(k, x.cols());
  for (int c = 0; c < k; ++c) r.centers.row(c) = x.row(chosen[static_cast<std::size_t>(c)]);
  r.labels.assign(static_cast<std::size_t>(n), -1);

  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      const double d = (r.centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      inertia += d;
      if (r.labels[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        r.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    r.inertia_history.push_back(inertia);
    r.inertia = inertia;
    if (!changed && iter > 0) break;
    Matrix<double> sums = Matrix<double>::Zero(k, x.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.labels[static_cast<std::size_t>(i)]) += x.row(i);
      counts[static_cast<std::size_t>(r.labels[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) r.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
  }
  return r;
}

std::vector<int> kmeans_labels(const Matrix<double>& features, int k, std::uint64_t seed) {
  return kmeans(features, k, seed).labels;
}

}  // namespace simc3d
