// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "simc3d/augment.hpp"
#include "simc3d/loss.hpp"
#include "simc3d/model.hpp"
#include "simc3d/pcd.hpp"
#include "simc3d/rng.hpp"
#include "simc3d/train.hpp"

using namespace simc3d;

namespace {

PointCloud uniform_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    pc.positions.emplace_back(rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 2));
    pc.src_uv.emplace_back(0, 0);
    pc.src_view.push_back(0);
    pc.point_id.push_back(static_cast<std::int64_t>(i));
  }
  return pc;
}

Matrix<float> unit_rows(Eigen::Index n, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix<float> m(n, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  m.rowwise().normalize();
  return m;
}

void BM_Knn(benchmark::State& state) {
  const PointCloud pc = uniform_cloud(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(knn_indices(pc, 16));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Knn)->Arg(512)->Arg(2048)->Arg(8192);

void BM_InfoNce(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Matrix<float> q = unit_rows(n, 64, 2), k = unit_rows(n, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(info_nce<float>(q, k, 0.07f));
}
BENCHMARK(BM_InfoNce)->Arg(512)->Arg(2048);

void BM_EncoderForward(benchmark::State& state) {
  ModelConfig cfg;
  Rng rng(4);
  const ParameterSet<float> params = init_parameters(cfg, rng);
  AugmentedView view;
  view.cloud = uniform_cloud(static_cast<std::size_t>(state.range(0)), 5);
  const NeighborTable nb = knn_indices(view.cloud, static_cast<std::size_t>(cfg.encoder.k));
  for (auto _ : state) benchmark::DoNotOptimize(encode_points(view, nb, params, cfg.encoder));
}
BENCHMARK(BM_EncoderForward)->Arg(2048);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.batch_scenes = 2;
  cfg.steps = 1000000;
  Trainer trainer(cfg, synthetic_scenes(4, 6, 160, 120, cfg));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
