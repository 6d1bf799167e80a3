// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "simc3d/tensor.hpp"

namespace simc3d {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Parameters, optimizer velocity and free-form metadata.
///
/// Layout: "SIMC3DCK" magic, u32 version, u64 step, u32 metadata byte count
/// followed by key=value lines, u32 entry count, then per entry u32 name
/// length, name bytes, u32 rows, u32 cols, rows·cols little-endian float32.
/// Velocity entries are stored under "optim/velocity/<name>".
struct Checkpoint {
  std::int64_t step = 0;
  std::map<std::string, std::string> metadata;
  ParameterSet<float> params;
  ParameterSet<float> velocity;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws FormatError on a corrupted file or a version other than
/// kCheckpointVersion (both versions named in the message).
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace simc3d
