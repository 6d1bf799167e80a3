// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/config.hpp"

#include <cctype>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "simc3d/dataio.hpp"

namespace simc3d {
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

long to_long(const std::string& s) {
  std::size_t used = 0;
  const long v = std::stol(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  if (s.empty() || s.front() == '-') throw std::invalid_argument("expected unsigned integer");
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + s + "'");
}

std::vector<int> to_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(to_long(item)));
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define SIMC3D_FIELD(key, expr, parse, format)                                    \
  {key, Field{[](TrainConfig& c, const std::string& v) { c.expr = parse(v); },    \
              [](const TrainConfig& c) { return format(c.expr); }}}

std::string fmt_long(long v) { return std::to_string(v); }
std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }
int to_int(const std::string& s) { return static_cast<int>(to_long(s)); }
std::string fmt_int(int v) { return std::to_string(v); }
std::string fmt_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}
std::string fmt_target(TargetVariant v) { return std::string(to_string(v)); }
std::string fmt_objective(Objective o) { return std::string(to_string(o)); }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SIMC3D_FIELD("seed", seed, to_u64, fmt_u64),
      SIMC3D_FIELD("epochs", epochs, to_int, fmt_int),
      SIMC3D_FIELD("steps", steps, to_long, fmt_long),
      SIMC3D_FIELD("batch_scenes", batch_scenes, to_int, fmt_int),
      SIMC3D_FIELD("points_per_view", points_per_view, to_int, fmt_int),
      SIMC3D_FIELD("lr", lr, to_double, fmt_double),
      SIMC3D_FIELD("momentum", momentum, to_double, fmt_double),
      SIMC3D_FIELD("weight_decay", weight_decay, to_double, fmt_double),
      SIMC3D_FIELD("warmup_steps", warmup_steps, to_long, fmt_long),
      SIMC3D_FIELD("mixup_probability", mixup_probability, to_double, fmt_double),
      SIMC3D_FIELD("grid_cell", grid_cell, to_double, fmt_double),
      SIMC3D_FIELD("threads", threads, to_int, fmt_int),
      SIMC3D_FIELD("conv_seed", conv_seed, to_u64, fmt_u64),
      SIMC3D_FIELD("use_color", use_color, to_bool, fmt_bool),
      SIMC3D_FIELD("tau", loss.tau, to_double, fmt_double),
      SIMC3D_FIELD("objective", loss.objective, parse_objective, fmt_objective),
      SIMC3D_FIELD("color_loss_weight", loss.color_loss_weight, to_double, fmt_double),
      SIMC3D_FIELD("target", model.target, parse_target_variant, fmt_target),
      SIMC3D_FIELD("grid", model.grid, to_int, fmt_int),
      SIMC3D_FIELD("d_model", model.d_model, to_int, fmt_int),
      SIMC3D_FIELD("shared_target_head", model.shared_target_head, to_bool, fmt_bool),
      SIMC3D_FIELD("knn_k", model.encoder.k, to_int, fmt_int),
      SIMC3D_FIELD("global_context", model.encoder.global_context, to_bool, fmt_bool),
      SIMC3D_FIELD("canonical_yaw", model.encoder.canonical_yaw, to_bool, fmt_bool),
      SIMC3D_FIELD("hidden", model.encoder.hidden, to_int_list, fmt_list),
      SIMC3D_FIELD("feature_dim", model.encoder.feature_dim, to_int, fmt_int),
      SIMC3D_FIELD("proj_dim", model.encoder.proj_dim, to_int, fmt_int),
      SIMC3D_FIELD("aug.scale_lo", augment.scale.lo, to_double, fmt_double),
      SIMC3D_FIELD("aug.scale_hi", augment.scale.hi, to_double, fmt_double),
      SIMC3D_FIELD("aug.yaw_lo", augment.yaw.lo, to_double, fmt_double),
      SIMC3D_FIELD("aug.yaw_hi", augment.yaw.hi, to_double, fmt_double),
      SIMC3D_FIELD("aug.tilt_lo", augment.tilt.lo, to_double, fmt_double),
      SIMC3D_FIELD("aug.tilt_hi", augment.tilt.hi, to_double, fmt_double),
      SIMC3D_FIELD("aug.translation_lo", augment.translation.lo, to_double, fmt_double),
      SIMC3D_FIELD("aug.translation_hi", augment.translation.hi, to_double, fmt_double),
      SIMC3D_FIELD("aug.crop_keep_lo", augment.crop_keep.lo, to_double, fmt_double),
      SIMC3D_FIELD("aug.crop_keep_hi", augment.crop_keep.hi, to_double, fmt_double),
      SIMC3D_FIELD("aug.drop_ratio", augment.drop_ratio, to_double, fmt_double),
      SIMC3D_FIELD("aug.color_jitter", augment.color_jitter, to_double, fmt_double),
      SIMC3D_FIELD("aug.mask_ratio", augment.mask_ratio, to_double, fmt_double),
      SIMC3D_FIELD("aug.mask_block_voxels", augment.mask_block_voxels, to_int, fmt_int),
  };
  return table;
}

#undef SIMC3D_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return &f;
  return nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (batch_scenes < 1) throw std::invalid_argument("batch_scenes must be >= 1");
  if (points_per_view < 2) throw std::invalid_argument("points_per_view must be >= 2");
  if (!(lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
  if (!(mixup_probability >= 0.0 && mixup_probability <= 1.0))
    throw std::invalid_argument("mixup_probability must be in [0, 1]");
  if (!(grid_cell > 0.0)) throw std::invalid_argument("grid_cell must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  loss.validate();
  resolved_model().validate();
  augment.validate();
}

ModelConfig TrainConfig::resolved_model() const {
  ModelConfig m = model;
  m.encoder.in_channels = use_color ? 6 : 3;
  m.objective = loss.objective;
  m.color_head = loss.color_loss_weight > 0.0;
  return m;
}

ParsedConfig parse_train_config(const std::string& text) {
  ParsedConfig out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw FormatError("config line " + std::to_string(lineno) + ": expected key=value", lineno);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const Field* f = find_field(key);
    if (!f) {
      out.warnings.push_back("config line " + std::to_string(lineno) + ": unknown key '" + key +
                             "' ignored");
      continue;
    }
    try {
      f->set(out.config, value);
    } catch (const std::exception& ex) {
      throw FormatError("config line " + std::to_string(lineno) + ": bad value for '" + key +
                            "': " + ex.what(),
                        lineno);
    }
  }
  out.config.augment.sample_count = static_cast<std::size_t>(out.config.points_per_view);
  out.config.augment.voxel_size = out.config.grid_cell;
  return out;
}

std::map<std::string, std::string> config_to_map(const TrainConfig& cfg) {
  std::map<std::string, std::string> kv;
  for (const auto& [k, f] : fields()) kv[k] = f.get(cfg);
  return kv;
}

TrainConfig config_from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  for (const auto& [k, v] : kv)
    if (const Field* f = find_field(k)) f->set(cfg, v);
  cfg.augment.sample_count = static_cast<std::size_t>(cfg.points_per_view);
  cfg.augment.voxel_size = cfg.grid_cell;
  return cfg;
}

std::string serialize_train_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + "=" + f.get(cfg) + "\n";
  return out;
}

}  // namespace simc3d
