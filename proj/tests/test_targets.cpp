// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "simc3d/rng.hpp"
#include "simc3d/targets.hpp"

using namespace simc3d;

namespace {

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// Straight transcription of the sinusoid definition, one scalar at a time.
double pe_scalar(double x, double y, int d, int dim) {
  const int half = d / 2;
  const double coord = dim < half ? x : y;
  const int local = dim < half ? dim : dim - half;
  const int i = local / 2;
  const double arg = coord / std::pow(10000.0, 4.0 * i / d);
  return local % 2 == 0 ? std::sin(arg) : std::cos(arg);
}

}  // namespace

TEST_CASE("positional encoding at the origin") {
  for (int d : {4, 8, 64, 128}) {
    const Eigen::VectorXd pe = positional_encoding_2d(0, 0, d);
    REQUIRE(pe.size() == d);
    for (int k = 0; k < d; ++k) CHECK(pe[k] == (k % 2 == 0 ? 0.0 : 1.0));
  }
}

TEST_CASE("positional encoding d=4 at (1, 0)") {
  const Eigen::VectorXd pe = positional_encoding_2d(1, 0, 4);
  CHECK(pe[0] == doctest::Approx(0.8414709848).epsilon(1e-10));
  CHECK(pe[1] == doctest::Approx(0.5403023059).epsilon(1e-10));
  CHECK(pe[2] == 0.0);
  CHECK(pe[3] == 1.0);
}

TEST_CASE("positional encoding matches the scalar formula and has norm d/2") {
  for (int d : {8, 64}) {
    for (int x = 0; x < 7; ++x)
      for (int y = 0; y < 7; ++y) {
        const Eigen::VectorXd pe = positional_encoding_2d(x, y, d);
        for (int k = 0; k < d; ++k) CHECK(pe[k] == doctest::Approx(pe_scalar(x, y, d, k)));
        CHECK(std::abs(pe.squaredNorm() - d / 2.0) < 1e-9);
      }
  }
}

TEST_CASE("positional encoding rejects bad dimensions") {
  for (int d : {0, -4, 2, 3, 6, 10})
    CHECK_THROWS_AS(positional_encoding_2d(1, 1, d), std::invalid_argument);
  CHECK_THROWS_AS(positional_encoding_1d_variant(1, 1, 6), std::invalid_argument);
}

TEST_CASE("7x7 PE map: distinct, constant, and distance-ordered") {
  const PositionalEncodingMap m = build_pe_map(7, 7, 64);
  REQUIRE(m.cells() == 49);
  std::set<std::vector<double>> seen;
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      const auto v = m.cell_vector(x, y);
      seen.insert(std::vector<double>(v.data(), v.data() + v.size()));
      CHECK(std::abs(v.squaredNorm() - 32.0) < 1e-9);
      CHECK((v - positional_encoding_2d(x, y, 64)).norm() == 0.0);
    }
  CHECK(seen.size() == 49);
  CHECK(build_pe_map(7, 7, 64).values == m.values);
  CHECK(cosine(m.cell_vector(0, 0), m.cell_vector(6, 6)) <
        cosine(m.cell_vector(0, 0), m.cell_vector(0, 1)));
}

TEST_CASE("1D variant ignores x") {
  const Eigen::VectorXd a = positional_encoding_1d_variant(0, 3, 64);
  const Eigen::VectorXd b = positional_encoding_1d_variant(5, 3, 64);
  CHECK(a == b);
  CHECK(std::abs(a.squaredNorm() - 32.0) < 1e-9);
  CHECK((positional_encoding_2d(5, 3, 64) - b).norm() > 1e-3);
  const PositionalEncodingMap m = build_pe1d_map(7, 7, 64);
  for (int y = 0; y < 7; ++y)
    for (int x = 1; x < 7; ++x) CHECK(m.cell_vector(x, y) == m.cell_vector(0, y));
}

TEST_CASE("target variant names round-trip") {
  for (TargetVariant v : {TargetVariant::kPe2d, TargetVariant::kPe1d, TargetVariant::kLearnable,
                          TargetVariant::kConvColor, TargetVariant::kConvDepth})
    CHECK(parse_target_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_target_variant("nope"), std::invalid_argument);
}

TEST_CASE("bilinear sampling: lattice, midpoint, corner, linearity") {
  const PositionalEncodingMap m = build_pe_map(7, 7, 16);
  const int W = 61, H = 31;  // grid step is 10 px horizontally, 5 px vertically
  for (int gy = 0; gy < 7; ++gy)
    for (int gx = 0; gx < 7; ++gx) {
      const Eigen::VectorXd s = sample_target(m, {10.0 * gx, 5.0 * gy}, W, H);
      CHECK((s - m.cell_vector(gx, gy)).norm() == 0.0);
    }
  const Eigen::VectorXd mid = sample_target(m, {25.0, 10.0}, W, H);
  CHECK((mid - 0.5 * (m.cell_vector(2, 2) + m.cell_vector(3, 2))).norm() < 1e-12);

  CHECK((sample_target(m, {0, 0}, W, H) - m.cell_vector(0, 0)).norm() == 0.0);
  CHECK((sample_target(m, {W - 1.0, H - 1.0}, W, H) - m.cell_vector(6, 6)).norm() == 0.0);
  CHECK((sample_target(m, {-5.0, 1e6}, W, H) - m.cell_vector(0, 6)).norm() == 0.0);

  const Eigen::Vector2d u1{31.0, 17.0}, u2{38.0, 17.0};
  for (double a : {0.0, 0.25, 0.6, 1.0}) {
    const Eigen::VectorXd lhs = sample_target(m, a * u1 + (1 - a) * u2, W, H);
    const Eigen::VectorXd rhs =
        a * sample_target(m, u1, W, H) + (1 - a) * sample_target(m, u2, W, H);
    CHECK((lhs - rhs).norm() < 1e-12);
  }

  const BilinearStencil st = bilinear_stencil({2.25, 4.5}, 7, 7);
  double sum = 0;
  for (double w : st.weight) sum += w;
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("nearest cell rounds the grid coordinate") {
  CHECK(nearest_cell({0, 0}, 61, 31, 7, 7) == 0);
  CHECK(nearest_cell({60, 30}, 61, 31, 7, 7) == 48);
  CHECK(nearest_cell({14.0, 0}, 61, 31, 7, 7) == 1);
  CHECK(nearest_cell({16.0, 0}, 61, 31, 7, 7) == 2);
  CHECK(nearest_cell({0, 8.0}, 61, 31, 7, 7) == 14);
}

TEST_CASE("conv locality target: shape, oracle, linearity, determinism") {
  static_assert(ConvLocalityTarget::output_size(230) == 7);
  const ConvLocalityTarget t = ConvLocalityTarget::random(8, 42);
  ColorImage img(230, 230);
  Rng rng(5);
  for (float& c : img.rgb) c = static_cast<float>(rng.uniform());
  const TargetGrid g = conv_locality_forward(img, t);
  REQUIRE(g.grid_x == 7);
  REQUIRE(g.grid_y == 7);
  REQUIRE(g.dim == 8);

  double worst = 0.0;
  for (int oy = 0; oy < 7; ++oy)
    for (int ox = 0; ox < 7; ++ox)
      for (int o = 0; o < 8; ++o) {
        double acc = t.bias[o];
        for (int dy = 0; dy < 38; ++dy)
          for (int dx = 0; dx < 38; ++dx) {
            const auto px = img.pixel(ox * 32 + dx, oy * 32 + dy);
            for (int c = 0; c < 3; ++c) acc += t.weights(o, (dy * 38 + dx) * 3 + c) * px[c];
          }
        worst = std::max(worst, std::abs(acc - g.cell(ox, oy)[o]));
      }
  CHECK(worst <= 1e-6);

  ConvLocalityTarget zero = t;
  zero.bias.setZero();
  for (double v : conv_locality_forward(ColorImage(230, 230), zero).values) CHECK(v == 0.0);

  const ConvLocalityTarget again = ConvLocalityTarget::random(8, 42);
  CHECK(again.weights == t.weights);
  CHECK(again.bias == t.bias);
  CHECK(conv_locality_forward(img, again).values == g.values);
  CHECK(ConvLocalityTarget::random(8, 43).weights != t.weights);

  CHECK_THROWS_AS(conv_locality_forward(ColorImage(229, 230), t), std::invalid_argument);
}

TEST_CASE("depth heatmap endpoints and degenerate input") {
  DepthMap d(3, 1, DepthKind::kMetric);
  d.values = {1.0, 2.0, 3.0};
  const ColorImage h = depth_to_heatmap(d);
  CHECK(h.pixel(0, 0) == std::array<float, 3>{0, 0, 1});
  CHECK(h.pixel(1, 0) == std::array<float, 3>{0, 1, 0});
  CHECK(h.pixel(2, 0) == std::array<float, 3>{1, 0, 0});

  const ColorImage c = depth_to_heatmap(DepthMap(4, 4, DepthKind::kMetric, 2.5));
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 4; ++u) CHECK(c.pixel(u, v) == heat_colormap(0.5));
}
