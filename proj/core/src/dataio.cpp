// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace simc3d {
namespace {

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Cursor over a raster header: whitespace-separated tokens, '#' comments.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, std::string format)
      : bytes_(bytes), format_(std::move(format)) {}

  std::string token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      ++pos_;
    if (start == pos_) fail("unexpected end of header");
    return bytes_.substr(start, pos_ - start);
  }

  long integer(const char* what) {
    const std::size_t at = pos_;
    const std::string t = token();
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (*end != '\0' || v <= 0)
      throw FormatError(format_ + ": invalid " + what + " '" + t + "' at byte " +
                            std::to_string(at),
                        at);
    return v;
  }

  double real(const char* what) {
    const std::size_t at = pos_;
    const std::string t = token();
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (*end != '\0' || !std::isfinite(v) || v == 0.0)
      throw FormatError(format_ + ": invalid " + what + " '" + t + "' at byte " +
                            std::to_string(at),
                        at);
    return v;
  }

  /// Consumes the single whitespace byte that ends the header.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      fail("missing header terminator");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(format_ + ": " + msg + " at byte " + std::to_string(pos_), pos_);
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::string format_;
  std::size_t pos_ = 0;
};

void check_payload(const std::string& format, std::size_t offset, std::size_t expected,
                   std::size_t actual) {
  if (actual < expected)
    throw FormatError(format + ": truncated payload at byte " + std::to_string(offset) +
                          ": expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(actual),
                      offset + actual);
}

std::uint32_t byteswap32(std::uint32_t x) {
  return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) | (x << 24);
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

DepthMap read_depth_pfm(const std::filesystem::path& path, DepthKind kind) {
  const std::string bytes = read_bytes(path);
  HeaderReader hdr(bytes, "PFM");
  const std::string magic = hdr.token();
  if (magic == "PF") throw FormatError("PFM: color 'PF' files are not supported (need 'Pf')", 0);
  if (magic != "Pf") throw FormatError("PFM: bad magic '" + magic + "'", 0);
  const long width = hdr.integer("width");
  const long height = hdr.integer("height");
  const double scale = hdr.real("scale");
  hdr.end_header();

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t offset = hdr.pos();
  check_payload("PFM", offset, count * 4, bytes.size() - offset);

  const bool little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;
  DepthMap map(static_cast<int>(width), static_cast<int>(height), kind);
  for (long row = 0; row < height; ++row) {
    const long v = height - 1 - row;  // stored bottom-to-top
    for (long u = 0; u < width; ++u) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + offset + 4 * (static_cast<std::size_t>(row) * width + u),
                  4);
      if (little != host_little) bits = byteswap32(bits);
      map.at(static_cast<int>(u), static_cast<int>(v)) =
          static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return map;
}

void write_depth_pfm(const DepthMap& map, const std::filesystem::path& path) {
  if (map.values.size() != static_cast<std::size_t>(map.width) * map.height)
    throw std::invalid_argument("write_depth_pfm: value count does not match size");
  std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) +
                    "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + 4 * map.values.size());
  for (int row = 0; row < map.height; ++row) {
    const int v = map.height - 1 - row;
    for (int u = 0; u < map.width; ++u) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(map.at(u, v)));
      if constexpr (std::endian::native != std::endian::little) bits = byteswap32(bits);
      std::memcpy(out.data() + header + 4 * (static_cast<std::size_t>(row) * map.width + u),
                  &bits, 4);
    }
  }
  write_bytes(path, out);
}

ColorImage read_color_ppm(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  HeaderReader hdr(bytes, "PPM");
  const std::string magic = hdr.token();
  if (magic == "P3") throw FormatError("PPM: ASCII P3 format is not supported (need binary P6)", 0);
  if (magic != "P6") throw FormatError("PPM: unsupported format '" + magic + "' (need P6)", 0);
  const long width = hdr.integer("width");
  const long height = hdr.integer("height");
  const std::size_t max_at = hdr.pos();
  const long maxval = hdr.integer("maxval");
  if (maxval != 255)
    throw FormatError("PPM: unsupported maxval " + std::to_string(maxval) + " (need 255)",
                      max_at);
  hdr.end_header();

  const std::size_t count =
      3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t offset = hdr.pos();
  check_payload("PPM", offset, count, bytes.size() - offset);
  ColorImage image(static_cast<int>(width), static_cast<int>(height));
  for (std::size_t i = 0; i < count; ++i)
    image.rgb[i] = static_cast<float>(static_cast<unsigned char>(bytes[offset + i])) / 255.0f;
  return image;
}

void write_color_ppm(const ColorImage& image, const std::filesystem::path& path) {
  const std::size_t count = 3 * static_cast<std::size_t>(image.width) * image.height;
  if (image.rgb.size() != count)
    throw std::invalid_argument("write_color_ppm: channel count does not match size");
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.reserve(out.size() + count);
  for (float c : image.rgb) {
    const float clamped = std::clamp(c, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0f))));
  }
  write_bytes(path, out);
}

std::filesystem::path Manifest::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::string read_text_file(const std::filesystem::path& path) { return read_bytes(path); }

std::vector<KeyValueRecord> parse_key_value_records(const std::string& text) {
  std::vector<KeyValueRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool open = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty()) {
      open = false;
      continue;
    }
    if (t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw FormatError("line " + std::to_string(lineno) + ": expected key=value, got '" + t + "'",
                        lineno);
    if (!open) {
      records.emplace_back();
      records.back().first_line = lineno;
      open = true;
    }
    const std::string key = trim(t.substr(0, eq));
    if (records.back().fields.count(key))
      throw FormatError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'",
                        lineno);
    records.back().fields[key] = trim(t.substr(eq + 1));
  }
  return records;
}

Manifest read_manifest(const std::filesystem::path& path) {
  Manifest m;
  m.base_dir = path.parent_path();
  std::set<std::string> seen;
  for (const KeyValueRecord& rec : parse_key_value_records(read_bytes(path))) {
    auto field = [&](const char* key) -> const std::string& {
      auto it = rec.fields.find(key);
      if (it == rec.fields.end())
        throw FormatError("manifest record at line " + std::to_string(rec.first_line) +
                              " is missing '" + key + "'",
                          rec.first_line);
      return it->second;
    };
    auto positive = [&](const char* key) {
      const std::string& s = field(key);
      char* end = nullptr;
      const long v = std::strtol(s.c_str(), &end, 10);
      if (*end != '\0' || v <= 0)
        throw FormatError("manifest record at line " + std::to_string(rec.first_line) +
                              ": invalid " + key + " '" + s + "'",
                          rec.first_line);
      return static_cast<int>(v);
    };
    ManifestEntry e;
    e.depth_path = field("depth_path");
    if (auto it = rec.fields.find("color_path"); it != rec.fields.end() && !it->second.empty())
      e.color_path = it->second;
    e.width = positive("width");
    e.height = positive("height");
    auto kind = rec.fields.find("depth_kind");
    try {
      e.depth_kind = kind == rec.fields.end() ? DepthKind::kMetric : parse_depth_kind(kind->second);
    } catch (const std::invalid_argument& ex) {
      throw FormatError("manifest record at line " + std::to_string(rec.first_line) + ": " +
                            ex.what(),
                        rec.first_line);
    }
    if (!seen.insert(e.depth_path).second ||
        (e.color_path && !seen.insert(*e.color_path).second))
      throw FormatError("manifest record at line " + std::to_string(rec.first_line) +
                            ": duplicate path",
                        rec.first_line);
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ostringstream out;
  bool first = true;
  for (const ManifestEntry& e : manifest.entries) {
    if (!first) out << "\n";
    first = false;
    out << "depth_path=" << e.depth_path << "\n";
    if (e.color_path) out << "color_path=" << *e.color_path << "\n";
    out << "width=" << e.width << "\n";
    out << "height=" << e.height << "\n";
    out << "depth_kind=" << to_string(e.depth_kind) << "\n";
  }
  write_bytes(path, out.str());
}

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path) {
  if (table.labels.size() != table.cols || table.values.size() != table.rows * table.cols)
    throw std::invalid_argument("write_feature_csv: table shape is inconsistent");
  std::string out;
  for (std::size_t c = 0; c < table.cols; ++c) {
    if (c) out += ',';
    out += table.labels[c];
  }
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < table.rows; ++r) {
    for (std::size_t c = 0; c < table.cols; ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(table.at(r, c)));
      out += buf;
    }
    out += '\n';
  }
  write_bytes(path, out);
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::istringstream in(read_bytes(path));
  FeatureTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("CSV: missing header", 1);
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  t.labels = split(line);
  t.cols = t.labels.size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.cols)
      throw FormatError("CSV: line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(t.cols),
                        lineno);
    for (const auto& c : cells) {
      char* end = nullptr;
      const float v = std::strtof(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0')
        throw FormatError("CSV: line " + std::to_string(lineno) + ": bad number '" + c + "'",
                          lineno);
      t.values.push_back(v);
    }
    ++t.rows;
  }
  return t;
}

}  // namespace simc3d
