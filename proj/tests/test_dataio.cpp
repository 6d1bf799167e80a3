// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "simc3d/dataio.hpp"
#include "simc3d/rng.hpp"
#include "test_util.hpp"

using namespace simc3d;
using simc3d::testing::TempDir;

namespace {

void write_raw(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string read_raw(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string float_bytes(float f, bool big_endian) {
  unsigned char b[4];
  std::memcpy(b, &f, 4);  // host is little-endian on every supported target
  std::string s(reinterpret_cast<char*>(b), 4);
  if (big_endian) std::swap(s[0], s[3]), std::swap(s[1], s[2]);
  return s;
}

}  // namespace

TEST_CASE("PFM round trip is bit exact") {
  TempDir dir("pfm");
  Rng rng(3);
  DepthMap d(4, 3, DepthKind::kMetric);
  for (double& v : d.values) v = static_cast<float>(rng.uniform(0.0, 6.0));
  write_depth_pfm(d, dir / "d.pfm");
  const DepthMap r = read_depth_pfm(dir / "d.pfm", DepthKind::kInverse);
  CHECK(r.width == 4);
  CHECK(r.height == 3);
  CHECK(r.kind == DepthKind::kInverse);
  CHECK(r.values == d.values);
}

TEST_CASE("PFM byte layout: header, little-endian, bottom row first") {
  TempDir dir("pfm_layout");
  DepthMap d(2, 2, DepthKind::kMetric);
  d.at(0, 0) = 1.0;
  d.at(1, 0) = 2.0;
  d.at(0, 1) = 3.0;
  d.at(1, 1) = 4.0;
  write_depth_pfm(d, dir / "d.pfm");
  const std::string expected = "Pf\n2 2\n-1.0\n" + float_bytes(3, false) + float_bytes(4, false) +
                               float_bytes(1, false) + float_bytes(2, false);
  CHECK(read_raw(dir / "d.pfm") == expected);
}

TEST_CASE("PFM big-endian payload is honored") {
  TempDir dir("pfm_be");
  write_raw(dir / "be.pfm", "Pf\n2 1\n1.0\n" + float_bytes(0.5f, true) + float_bytes(2.5f, true));
  const DepthMap r = read_depth_pfm(dir / "be.pfm");
  CHECK(r.at(0, 0) == 0.5);
  CHECK(r.at(1, 0) == 2.5);
}

TEST_CASE("PFM rejects color files and truncated payloads") {
  TempDir dir("pfm_bad");
  write_raw(dir / "color.pfm", "PF\n1 1\n-1.0\n" + std::string(12, '\0'));
  CHECK_THROWS_AS(read_depth_pfm(dir / "color.pfm"), FormatError);

  write_raw(dir / "short.pfm", "Pf\n4 3\n-1.0\n" + std::string(20, '\0'));
  try {
    read_depth_pfm(dir / "short.pfm");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 48") != std::string::npos);
    CHECK(msg.find("got 20") != std::string::npos);
    CHECK(e.offset() > 0);
  }

  write_raw(dir / "junk.pfm", "Pf\nfour 3\n-1.0\n");
  CHECK_THROWS_AS(read_depth_pfm(dir / "junk.pfm"), FormatError);
  write_raw(dir / "empty.pfm", "");
  CHECK_THROWS_AS(read_depth_pfm(dir / "empty.pfm"), FormatError);
}

TEST_CASE("PPM normalization and round trip") {
  TempDir dir("ppm");
  std::string raw = "P6\n3 2\n255\n";
  for (int i = 0; i < 6; ++i) raw += std::string("\xff\x00\x00", 3);
  write_raw(dir / "red.ppm", raw);
  const ColorImage red = read_color_ppm(dir / "red.ppm");
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 3; ++u) CHECK(red.pixel(u, v) == std::array<float, 3>{1.0f, 0.0f, 0.0f});

  Rng rng(11);
  ColorImage img(5, 4);
  for (float& c : img.rgb) c = static_cast<float>(rng.uniform_index(256)) / 255.0f;
  write_color_ppm(img, dir / "rand.ppm");
  CHECK(read_color_ppm(dir / "rand.ppm").rgb == img.rgb);
}

TEST_CASE("PPM rejects ASCII and non-8-bit files") {
  TempDir dir("ppm_bad");
  write_raw(dir / "ascii.ppm", "P3\n1 1\n255\n255 0 0\n");
  try {
    read_color_ppm(dir / "ascii.ppm");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("P3") != std::string::npos);
  }
  write_raw(dir / "wide.ppm", "P6\n1 1\n65535\n" + std::string(6, '\0'));
  CHECK_THROWS_AS(read_color_ppm(dir / "wide.ppm"), FormatError);
  write_raw(dir / "short.ppm", "P6\n2 2\n255\n" + std::string(5, '\0'));
  CHECK_THROWS_AS(read_color_ppm(dir / "short.ppm"), FormatError);
}

TEST_CASE("feature CSV") {
  TempDir dir("csv");
  FeatureTable t;
  t.rows = 2;
  t.cols = 3;
  t.labels = {"a", "b", "c"};
  t.values = {1.0f, -2.5f, 3.14159274f, 1e-7f, 123456.789f, 0.333333343f};
  write_feature_csv(t, dir / "t.csv");
  const std::string text = read_raw(dir / "t.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.rfind("a,b,c\n", 0) == 0);
  const FeatureTable r = read_feature_csv(dir / "t.csv");
  REQUIRE(r.rows == 2);
  REQUIRE(r.cols == 3);
  CHECK(r.labels == t.labels);
  for (std::size_t i = 0; i < t.values.size(); ++i)
    CHECK(std::abs(r.values[i] - t.values[i]) <= 1e-6 * std::abs(t.values[i]));

  FeatureTable empty;
  empty.cols = 2;
  empty.labels = {"x", "y"};
  write_feature_csv(empty, dir / "e.csv");
  CHECK(read_raw(dir / "e.csv") == "x,y\n");
  CHECK(read_feature_csv(dir / "e.csv").rows == 0);
}

TEST_CASE("manifest round trip and validation") {
  TempDir dir("manifest");
  Manifest m;
  ManifestEntry a;
  a.depth_path = "a_depth.pfm";
  a.color_path = "a_color.ppm";
  a.width = 16;
  a.height = 12;
  ManifestEntry b;
  b.depth_path = "sub/b.pfm";
  b.width = 8;
  b.height = 6;
  b.depth_kind = DepthKind::kInverse;
  m.entries = {a, b};
  write_manifest(m, dir / "manifest.txt");
  const Manifest r = read_manifest(dir / "manifest.txt");
  REQUIRE(r.entries.size() == 2);
  CHECK(r.entries[0].color_path == a.color_path);
  CHECK_FALSE(r.entries[1].color_path.has_value());
  CHECK(r.entries[1].depth_kind == DepthKind::kInverse);
  CHECK(r.entries[1].width == 8);
  CHECK(r.resolve("sub/b.pfm") == dir / "sub/b.pfm");

  write_raw(dir / "dup.txt",
            "depth_path=x.pfm\nwidth=2\nheight=2\n\ndepth_path=x.pfm\nwidth=2\nheight=2\n");
  CHECK_THROWS_AS(read_manifest(dir / "dup.txt"), FormatError);
}

TEST_CASE("key=value records report line numbers") {
  const auto recs = parse_key_value_records("# comment\na=1\nb = two\n\n\nc=3\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].fields.at("b") == "two");
  CHECK(recs[1].first_line == 6);
  try {
    parse_key_value_records("a=1\nbroken line\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 2);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}
