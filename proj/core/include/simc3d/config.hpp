// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "simc3d/augment.hpp"
#include "simc3d/loss.hpp"
#include "simc3d/model.hpp"
#include "simc3d/targets.hpp"

namespace simc3d {

/// Pretraining run settings. Optimizer defaults are the point-encoder
/// column of the published training table (SGD, lr 0.2, momentum 0.9,
/// weight decay 1e-4, no warmup, τ = 0.07, 20 epochs).
struct TrainConfig {
  std::uint64_t seed = 0;
  int epochs = 20;
  /// Total optimizer steps; 0 means epochs × steps-per-epoch.
  long steps = 0;
  int batch_scenes = 8;
  int points_per_view = 2048;
  double lr = 0.2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  long warmup_steps = 0;
  double mixup_probability = 0.5;
  double grid_cell = 0.02;
  int threads = 1;
  std::uint64_t conv_seed = 1234;
  bool use_color = false;

  ModelConfig model;
  LossConfig loss;
  AugmentationConfig augment;

  void validate() const;
  /// Model config with the input channel count implied by use_color.
  ModelConfig resolved_model() const;
};

struct ParsedConfig {
  TrainConfig config;
  std::vector<std::string> warnings;  // one per unknown key
};

/// key=value lines, '#' comments. Unknown keys are collected as warnings;
/// a malformed line or value throws FormatError carrying the line number.
ParsedConfig parse_train_config(const std::string& text);
/// Inverse of parse_train_config for every known key.
std::string serialize_train_config(const TrainConfig& cfg);

std::map<std::string, std::string> config_to_map(const TrainConfig& cfg);
TrainConfig config_from_map(const std::map<std::string, std::string>& kv);

}  // namespace simc3d
