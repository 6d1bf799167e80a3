// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "gradcheck.hpp"
#include "simc3d/augment.hpp"
#include "simc3d/camera.hpp"
#include "simc3d/checkpoint.hpp"
#include "simc3d/eval.hpp"
#include "simc3d/loss.hpp"
#include "simc3d/rng.hpp"
#include "simc3d/targets.hpp"
#include "simc3d/train.hpp"
#include "test_util.hpp"

using namespace simc3d;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome geometry_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  std::size_t pixels = 0;
  for (int cam = 0; cam < 20; ++cam) {
    CameraIntrinsics k;
    k.width = 40 + static_cast<int>(rng.uniform_index(60));
    k.height = 30 + static_cast<int>(rng.uniform_index(40));
    k.fx = rng.uniform(20, 200);
    k.fy = rng.uniform(20, 200);
    k.cx = rng.uniform(0, k.width);
    k.cy = rng.uniform(0, k.height);
    WorldTransform xf;
    xf.rotation = Eigen::Quaterniond(rng.normal(), rng.normal(), rng.normal(), rng.normal())
                      .normalized()
                      .toRotationMatrix();
    xf.translation = Eigen::Vector3d(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    DepthMap depth(k.width, k.height, DepthKind::kMetric);
    for (double& w : depth.values) w = rng.uniform(0.05, 6.0);
    const PointCloud pc = backproject(depth, k, xf);
    const std::vector<Projection> pr = project(pc, k, xf);
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const auto u = static_cast<int>(pc.src_uv[i].x()), v = static_cast<int>(pc.src_uv[i].y());
      if (!pr[i].valid) return {false, "invalid projection"};
      worst = std::max({worst, std::abs(pr[i].u - u), std::abs(pr[i].v - v),
                        std::abs(pr[i].w - depth.at(u, v))});
    }
    pixels += pc.size();
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && pixels >= 10000 && secs < 5.0,
          std::to_string(pixels) + " pixels, max error " + fmt("%.3g", worst) + ", " +
              fmt("%.2f", secs) + " s"};
}

Outcome intrinsics_formula() {
  const CameraIntrinsics k = intrinsics_for_size(1296, 968);
  const bool ok = k.fx == 574.0 && k.fy == 575.0 && k.cx == 324.0 && k.cy == 241.0;
  return {ok, "fx=" + fmt("%g", k.fx) + " fy=" + fmt("%g", k.fy) + " cx=" + fmt("%g", k.cx) +
                  " cy=" + fmt("%g", k.cy)};
}

Outcome depth_conversion() {
  const CameraIntrinsics k = intrinsics_for_size(1296, 968);
  DepthMap inv(1000, 1, DepthKind::kInverse);
  Rng rng(2);
  for (std::size_t i = 0; i < inv.values.size(); ++i) {
    switch (i % 4) {
      case 0: inv.values[i] = rng.uniform(0.0, 20.0); break;
      case 1: inv.values[i] = rng.uniform(0.0, 0.5); break;     // upper clip region
      case 2: inv.values[i] = std::pow(10.0, rng.uniform(3, 12)); break;  // near zero
      default: inv.values[i] = std::exp(rng.uniform(-3, 3)); break;
    }
  }
  inv.values[0] = 0.0;
  const DepthMap m = inverse_depth_to_metric(inv, k);
  double worst = 0.0;
  int hit_top = 0, near_zero = 0;
  for (std::size_t i = 0; i < inv.values.size(); ++i) {
    const double wp = inv.values[i];
    const double expect = wp == 0.0 ? 6.0 : std::min(6.0, std::max(0.0, 0.01 * 574.0 / wp));
    const double err = std::abs(m.values[i] - expect) / std::max(1.0, expect);
    worst = std::max(worst, err);
    if (m.values[i] == 6.0) ++hit_top;
    if (m.values[i] < 1e-6) ++near_zero;
    if (m.values[i] < 0.0 || m.values[i] > 6.0) return {false, "value outside [0, 6]"};
  }
  return {worst <= 4 * 2.220446049250313e-16 && hit_top > 0 && near_zero > 0,
          "max relative error " + fmt("%.3g", worst) + ", " + std::to_string(hit_top) +
              " at the 6 m ceiling, " + std::to_string(near_zero) + " near 0"};
}

Outcome pe_correctness() {
  const PositionalEncodingMap m = build_pe_map(7, 7, 64);
  std::set<std::vector<double>> distinct;
  double worst_norm = 0.0;
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      const auto v = m.cell_vector(x, y);
      distinct.insert(std::vector<double>(v.data(), v.data() + v.size()));
      worst_norm = std::max(worst_norm, std::abs(v.squaredNorm() - 32.0));
    }
  const Eigen::VectorXd h = positional_encoding_2d(1, 0, 4);
  const Eigen::Vector4d expect(std::sin(1.0), std::cos(1.0), 0.0, 1.0);
  const double hand = (h - expect).cwiseAbs().maxCoeff();
  return {distinct.size() == 49 && worst_norm <= 1e-9 && hand <= 1e-12,
          std::to_string(distinct.size()) + " distinct, norm error " + fmt("%.3g", worst_norm) +
              ", hand case error " + fmt("%.3g", hand)};
}

Outcome bilinear_sampling() {
  const PositionalEncodingMap m = build_pe_map(7, 7, 64);
  const int W = 121, H = 91;  // 20 px and 15 px per grid step
  double lattice = 0.0, mid = 0.0;
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      lattice = std::max(lattice, (sample_target(m, {20.0 * x, 15.0 * y}, W, H) -
                                   m.cell_vector(x, y)).cwiseAbs().maxCoeff());
      if (x < 6)
        mid = std::max(mid, (sample_target(m, {20.0 * x + 10.0, 15.0 * y}, W, H) -
                             0.5 * (m.cell_vector(x, y) + m.cell_vector(x + 1, y)))
                                .cwiseAbs()
                                .maxCoeff());
      if (y < 6)
        mid = std::max(mid, (sample_target(m, {20.0 * x, 15.0 * y + 7.5}, W, H) -
                             0.5 * (m.cell_vector(x, y) + m.cell_vector(x, y + 1)))
                                .cwiseAbs()
                                .maxCoeff());
    }
  return {lattice == 0.0 && mid <= 1e-9,
          "lattice error " + fmt("%.3g", lattice) + ", midpoint error " + fmt("%.3g", mid)};
}

Outcome conv_locality() {
  const ConvLocalityTarget t = ConvLocalityTarget::random(64, 1234);
  ColorImage img(230, 230);
  Rng rng(3);
  for (float& c : img.rgb) c = static_cast<float>(rng.uniform());
  const TargetGrid g = conv_locality_forward(img, t);
  double worst = 0.0;
  for (int oy = 0; oy < g.grid_y; ++oy)
    for (int ox = 0; ox < g.grid_x; ++ox)
      for (int o = 0; o < g.dim; ++o) {
        double acc = t.bias[o];
        for (int dy = 0; dy < 38; ++dy)
          for (int dx = 0; dx < 38; ++dx) {
            const auto px = img.pixel(ox * 32 + dx, oy * 32 + dy);
            for (int c = 0; c < 3; ++c) acc += t.weights(o, (dy * 38 + dx) * 3 + c) * px[c];
          }
        worst = std::max(worst, std::abs(acc - g.cell(ox, oy)[o]));
      }
  return {g.grid_x == 7 && g.grid_y == 7 && worst <= 1e-6,
          std::to_string(g.grid_x) + "x" + std::to_string(g.grid_y) + " output, oracle error " +
              fmt("%.3g", worst)};
}

Outcome loss_oracles() {
  Matrix<double> q(2, 2);
  q << 1, 0, 0, 1;
  const double two = info_nce<double>(q, q, 1.0).loss;
  const double e2 = std::abs(two + std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)));
  Matrix<double> same(2048, 4);
  same.rowwise() = Eigen::RowVector4d(0.5, 0.5, 0.5, 0.5);
  const double eN = std::abs(info_nce<double>(same, same, 0.07).loss - std::log(2048.0));
  const std::vector<int> labels{0, 5, 13, 48, 24};
  const double eC = std::abs(
      position_classification_loss<double>(Matrix<double>::Zero(5, 49), labels).loss -
      std::log(49.0));
  return {e2 <= 1e-9 && eN <= 1e-9 && eC <= 1e-9,
          "N=2 error " + fmt("%.3g", e2) + ", log N error " + fmt("%.3g", eN) +
              ", ln 49 error " + fmt("%.3g", eC)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string names;
  for (const auto& c : testing::gradient_cases()) {
    worst = std::max(worst, testing::gradient_check(c.model, c.loss, 24, 100, 200, 1e-6));
    names += std::string(names.empty() ? "" : ",") + c.name;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0, "variants [" + names + "], 200 coordinates each, max "
                                            "relative error " +
                                            fmt("%.3g", worst) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome correspondence_audit() {
  const PointCloud pc = testing::random_cloud(400, 4);
  Rng rng(5);
  double worst = 0.0;
  bool uv_ok = true;
  for (int t = 0; t < 1000; ++t) {
    AugmentationConfig cfg;
    const double s0 = rng.uniform(0.5, 1.5);
    cfg.scale = {s0, s0 * rng.uniform(1.0, 1.5)};
    cfg.yaw = {0.0, rng.uniform(0.0, 6.283185307179586)};
    const double tilt = rng.uniform(0.0, 0.3);
    cfg.tilt = {-tilt, tilt};
    const double tr = rng.uniform(0.0, 2.0);
    cfg.translation = {-tr, tr};
    cfg.crop_keep = {rng.uniform(0.3, 1.0), 1.0};
    cfg.drop_ratio = rng.uniform(0.0, 0.5);
    cfg.sample_count = 32 + rng.uniform_index(600);
    cfg.color_jitter = rng.uniform(0.0, 0.1);
    cfg.mask_ratio = rng.uniform(0.0, 0.5);
    const PairedViews pv = paired_views(pc, cfg, rng);
    for (std::size_t i = 0; i < pv.view.size(); ++i) {
      const std::size_t r = pv.view.source_rows[i];
      uv_ok = uv_ok && pc.point_id[r] == pv.view.kept[i] && pv.view.cloud.src_uv[i] == pc.src_uv[r] &&
              pv.match_uv[i] == pc.src_uv[r];
      worst = std::max(worst, (pv.view.cloud.positions[i] -
                               pv.view.transform.apply(pc.positions[r])).norm());
    }
  }
  return {uv_ok && worst <= 1e-6, std::string("src_uv ") + (uv_ok ? "exact" : "MISMATCH") +
                                      ", max position error " + fmt("%.3g", worst) + " m"};
}

TrainConfig smoke_config() {
  TrainConfig cfg;  // batch 8, 2048 points, lr 0.2, seed 0
  cfg.steps = 500;
  return cfg;
}

double mean_tail(const MetricsLog& log, double MetricsRecord::*field, std::size_t n) {
  double s = 0.0;
  const std::size_t k = std::min(n, log.records.size());
  for (std::size_t i = log.records.size() - k; i < log.records.size(); ++i) s += log.records[i].*field;
  return s / static_cast<double>(k);
}

struct SmokeRun {
  MetricsLog log;
  Checkpoint ckpt;
  double seconds = 0.0;
};

SmokeRun smoke_run(const TrainConfig& cfg, const std::vector<LoadedScene>& scenes) {
  const auto t0 = Clock::now();
  Trainer t(cfg, scenes);
  SmokeRun r;
  r.log = t.run();
  r.ckpt = t.checkpoint();
  r.seconds = seconds_since(t0);
  return r;
}

Outcome training_smoke(const SmokeRun& run, const std::vector<LoadedScene>& probe) {
  const double initial = run.log.records.front().loss;
  const double final_loss = mean_tail(run.log, &MetricsRecord::loss, 10);
  const double pos = mean_tail(run.log, &MetricsRecord::pos_sim, 10);
  const double neg = mean_tail(run.log, &MetricsRecord::neg_sim, 10);
  const RetrievalResult rr = position_retrieval_probe(run.ckpt, probe, 0);
  const bool ok = final_loss < 0.7 * initial && pos - neg >= 0.2 && rr.accuracy >= 5.0 / 49.0 &&
                  run.seconds < 900.0;
  return {ok, "loss " + fmt("%.4f", initial) + " -> " + fmt("%.4f", final_loss) + " (ratio " +
                  fmt("%.3f", final_loss / initial) + "), pos " + fmt("%.3f", pos) + " neg " +
                  fmt("%.3f", neg) + ", retrieval " + fmt("%.4f", rr.accuracy) + " (5x chance " +
                  fmt("%.4f", 5.0 / 49.0) + "), training " + fmt("%.0f", run.seconds) + " s"};
}

Outcome determinism_and_resume() {
  TrainConfig cfg;
  cfg.batch_scenes = 2;
  cfg.points_per_view = 512;
  cfg.augment.sample_count = 512;
  cfg.steps = 20;
  const auto scenes = synthetic_scenes(4, 21, 96, 72, cfg);
  testing::TempDir dir("accept");
  auto run_to = [&](const std::string& name) {
    Trainer t(cfg, scenes);
    TrainerOptions opt;
    opt.out_dir = dir / name;
    return t.run(opt);
  };
  const MetricsLog full = run_to("a");
  run_to("b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(dir / "a" / "metrics.csv");
  const bool identical = !a.empty() && a == slurp(dir / "b" / "metrics.csv");

  Trainer first(cfg, scenes);
  TrainerOptions half;
  half.stop_at = 10;
  first.run(half);
  save_checkpoint(first.checkpoint(), dir / "mid.ckpt");
  Trainer second(cfg, scenes);
  second.resume(load_checkpoint(dir / "mid.ckpt"));
  const MetricsLog tail = second.run();
  bool resumed = tail.records.size() == 10;
  for (std::size_t i = 0; resumed && i < 10; ++i)
    resumed = tail.records[i].loss == full.records[10 + i].loss &&
              tail.records[i].pos_sim == full.records[10 + i].pos_sim;
  return {identical && resumed, std::string("metrics CSV ") + (identical ? "byte-identical" : "DIFFERS") +
                                    ", resume " + (resumed ? "matches step-for-step" : "DIVERGES")};
}

Outcome ablation_wiring(const SmokeRun& pe2d, const TrainConfig& cfg,
                        const std::vector<LoadedScene>& scenes,
                        const std::vector<LoadedScene>& probe) {
  TrainConfig c1 = cfg;
  c1.model.target = TargetVariant::kPe1d;
  const SmokeRun pe1d = smoke_run(c1, scenes);
  const double a2 = position_retrieval_probe(pe2d.ckpt, probe, 0).accuracy;
  const double a1 = position_retrieval_probe(pe1d.ckpt, probe, 0).accuracy;
  const bool finite = std::isfinite(pe1d.log.records.back().loss);
  return {finite && a2 > a1, "retrieval pe2d " + fmt("%.4f", a2) + " vs pe1d " + fmt("%.4f", a1) +
                                 ", pe1d final loss " +
                                 fmt("%.4f", mean_tail(pe1d.log, &MetricsRecord::loss, 10))};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const Outcome& o) {
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail
              << ")" << std::endl;
    if (!o.pass) ++failures;
  };
  auto guarded = [&](int n, const std::function<Outcome()>& f) {
    try {
      report(n, f());
    } catch (const std::exception& e) {
      report(n, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, geometry_round_trip);
  guarded(2, intrinsics_formula);
  guarded(3, depth_conversion);
  guarded(4, pe_correctness);
  guarded(5, bilinear_sampling);
  guarded(6, conv_locality);
  guarded(7, loss_oracles);
  guarded(8, gradient_suite);
  guarded(9, correspondence_audit);

  const TrainConfig cfg = smoke_config();
  std::vector<LoadedScene> scenes, probe;
  SmokeRun pe2d;
  bool trained = false;
  guarded(10, [&] {
    scenes = synthetic_scenes(64, 0, 160, 120, cfg);
    probe = synthetic_scenes(16, 1, 160, 120, cfg);
    pe2d = smoke_run(cfg, scenes);
    trained = true;
    return training_smoke(pe2d, probe);
  });
  guarded(11, determinism_and_resume);
  guarded(12, [&] {
    if (!trained) return Outcome{false, "pe2d smoke run unavailable"};
    return ablation_wiring(pe2d, cfg, scenes, probe);
  });

  std::cout << (failures == 0 ? "all criteria PASS" : std::to_string(failures) + " criteria FAIL")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
