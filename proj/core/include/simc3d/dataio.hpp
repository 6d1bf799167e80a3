// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "simc3d/image.hpp"

namespace simc3d {

/// Malformed or unsupported file content. `offset` is the byte position at
/// which parsing stopped (or the line number for text formats).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Grayscale PFM ("Pf"). Rows are stored bottom-to-top; a negative scale
/// marks little-endian payload. The depth kind is not part of the file and
/// is taken from the caller (normally the manifest).
DepthMap read_depth_pfm(const std::filesystem::path& path,
                        DepthKind kind = DepthKind::kMetric);
void write_depth_pfm(const DepthMap& map, const std::filesystem::path& path);

/// Binary P6 with maxval 255. Channels are normalized to [0, 1] on read and
/// rounded to the nearest 8-bit level on write.
ColorImage read_color_ppm(const std::filesystem::path& path);
void write_color_ppm(const ColorImage& image, const std::filesystem::path& path);

struct ManifestEntry {
  std::string depth_path;
  std::optional<std::string> color_path;
  int width = 0;
  int height = 0;
  DepthKind depth_kind = DepthKind::kMetric;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  /// Directory relative paths are resolved against.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
};

/// One key=value record. Records are separated by blank lines; `#` starts a
/// comment line.
struct KeyValueRecord {
  std::map<std::string, std::string> fields;
  std::size_t first_line = 0;
};

/// Throws FormatError (offset = 1-based line number) on a line without '='.
std::vector<KeyValueRecord> parse_key_value_records(const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Row-major float table with column labels.
struct FeatureTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  std::vector<std::string> labels;

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Header row of labels, then one line per row, 9 significant digits.
void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable read_feature_csv(const std::filesystem::path& path);

}  // namespace simc3d
