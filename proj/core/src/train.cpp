// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include "simc3d/rng.hpp"
#include "simc3d/synth.hpp"

namespace simc3d {
namespace {

AugmentationConfig effective_augment(const TrainConfig& cfg) {
  AugmentationConfig aug = cfg.augment;
  aug.sample_count = static_cast<std::size_t>(cfg.points_per_view);
  aug.voxel_size = cfg.grid_cell;
  return aug;
}

bool is_conv(TargetVariant v) {
  return v == TargetVariant::kConvColor || v == TargetVariant::kConvDepth;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

TargetProvider::TargetProvider(TargetVariant variant, int grid, int d_model,
                               std::uint64_t conv_seed)
    : variant_(variant) {
  if (variant == TargetVariant::kPe1d) constant_ = build_pe1d_map(grid, grid, d_model);
  else constant_ = build_pe_map(grid, grid, d_model);
  if (is_conv(variant)) conv_ = ConvLocalityTarget::random(d_model, conv_seed);
}

const TargetGrid& TargetProvider::grid_for(const LoadedScene& scene) const {
  if (is_conv(variant_)) {
    if (!scene.conv_grid) throw std::logic_error("scene has no conv-locality grid");
    return *scene.conv_grid;
  }
  return constant_;
}

TargetGrid TargetProvider::conv_grid(const DepthMap& depth, const ColorImage* color) const {
  constexpr int n = ConvLocalityTarget::kInputSize;
  if (variant_ == TargetVariant::kConvColor) {
    if (!color) throw std::invalid_argument("conv_color targets need a color image");
    return conv_locality_forward(resize_bilinear(*color, n, n), conv_);
  }
  return conv_locality_forward(resize_bilinear(depth_to_heatmap(depth), n, n), conv_);
}

LoadedScene prepare_scene(const DepthMap& depth, const ColorImage* color, const TrainConfig& cfg,
                          int view_id) {
  LoadedScene scene;
  scene.width = depth.width;
  scene.height = depth.height;
  scene.intrinsics = intrinsics_for_size(depth.width, depth.height);
  const DepthMap metric = depth.kind == DepthKind::kInverse
                              ? inverse_depth_to_metric(depth, scene.intrinsics)
                              : depth;
  scene.cloud = grid_sample(backproject(metric, scene.intrinsics, WorldTransform::axis_exchange(),
                                        cfg.use_color ? color : nullptr, view_id),
                            cfg.grid_cell);
  if (is_conv(cfg.model.target)) {
    const TargetProvider provider(cfg.model.target, cfg.model.grid, cfg.model.d_model,
                                  cfg.conv_seed);
    scene.conv_grid = provider.conv_grid(metric, color);
  }
  return scene;
}

std::vector<LoadedScene> load_scenes(const Manifest& manifest, const TrainConfig& cfg,
                                     std::ostream* log) {
  std::vector<LoadedScene> scenes;
  const bool need_color = cfg.use_color || cfg.model.target == TargetVariant::kConvColor;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    try {
      const DepthMap depth = read_depth_pfm(manifest.resolve(e.depth_path), e.depth_kind);
      if (depth.width != e.width || depth.height != e.height)
        throw std::runtime_error("depth size does not match the manifest");
      std::optional<ColorImage> color;
      if (e.color_path) {
        color = read_color_ppm(manifest.resolve(*e.color_path));
        if (color->width != e.width || color->height != e.height)
          throw std::runtime_error("color size does not match the manifest");
      }
      if (need_color && !color) throw std::runtime_error("entry has no color image");
      LoadedScene scene = prepare_scene(depth, color ? &*color : nullptr, cfg);
      if (scene.cloud.size() < 2) throw std::runtime_error("fewer than 2 valid points");
      scenes.push_back(std::move(scene));
    } catch (const std::exception& ex) {
      if (log) *log << "warning: skipping manifest entry " << i << " (" << e.depth_path
                    << "): " << ex.what() << "\n";
    }
  }
  return scenes;
}

std::vector<LoadedScene> synthetic_scenes(std::size_t count, std::uint64_t seed, int width,
                                          int height, const TrainConfig& cfg) {
  std::vector<LoadedScene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Frame frame = synthesize_frame(seed, i, width, height);
    scenes.push_back(prepare_scene(frame.depth, &frame.color, cfg));
  }
  return scenes;
}

BatchItem build_item(const std::vector<LoadedScene>& scenes, std::size_t scene,
                     std::optional<std::size_t> partner, const TrainConfig& cfg,
                     const TargetProvider& provider, Rng& rng) {
  BatchItem item;
  item.view_scene.push_back(scene);
  const PointCloud* cloud = &scenes[scene].cloud;
  PointCloud mixed;
  if (partner) {
    mixed = view_mixup(*cloud, scenes[*partner].cloud, cfg.mixup_probability, rng);
    if (mixed.size() != cloud->size()) item.view_scene.push_back(*partner);
    cloud = &mixed;
  }

  PairedViews pv = paired_views(*cloud, effective_augment(cfg), rng);
  item.view = std::move(pv.view);
  item.match_uv = std::move(pv.match_uv);

  const std::size_t n = item.view.size();
  const int d = cfg.model.d_model;
  const int grid = cfg.model.grid;
  item.targets.resize(static_cast<Eigen::Index>(n), d);
  item.cell_labels.resize(n);
  std::vector<Eigen::Triplet<float>> weights;
  const bool learnable = cfg.model.target == TargetVariant::kLearnable;
  if (learnable) weights.reserve(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const LoadedScene& src =
        scenes[item.view_scene.at(static_cast<std::size_t>(item.view.cloud.src_view[i]))];
    const Eigen::Vector2d& uv = item.match_uv[i];
    const TargetGrid& g = provider.grid_for(src);
    item.targets.row(static_cast<Eigen::Index>(i)) =
        sample_target(g, uv, src.width, src.height).cast<float>().transpose();
    item.cell_labels[i] = nearest_cell(uv, src.width, src.height, grid, grid);
    if (learnable) {
      const BilinearStencil s =
          bilinear_stencil(pixel_to_grid(uv, src.width, src.height, grid, grid), grid, grid);
      for (int c = 0; c < 4; ++c)
        if (s.weight[c] != 0.0)
          weights.emplace_back(static_cast<int>(i), s.cell[c], static_cast<float>(s.weight[c]));
    }
  }
  if (learnable) {
    item.target_weights.resize(static_cast<Eigen::Index>(n), grid * grid);
    item.target_weights.setFromTriplets(weights.begin(), weights.end());
  }
  return item;
}

std::vector<std::size_t> batch_scene_indices(std::size_t num_scenes, const TrainConfig& cfg,
                                             long step) {
  if (num_scenes == 0) throw std::invalid_argument("empty batch: no scenes available");
  const auto b = static_cast<std::size_t>(cfg.batch_scenes);
  const std::size_t per_epoch = (num_scenes + b - 1) / b;
  const auto epoch = static_cast<std::uint64_t>(static_cast<std::size_t>(step) / per_epoch);
  const std::size_t j = static_cast<std::size_t>(step) % per_epoch;
  std::vector<std::size_t> perm(num_scenes);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng::derive(cfg.seed, 1, epoch);
  for (std::size_t i = num_scenes; i > 1; --i)
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_index(i))]);
  std::vector<std::size_t> out(b);
  for (std::size_t s = 0; s < b; ++s) out[s] = perm[(j * b + s) % num_scenes];
  return out;
}

std::vector<BatchItem> build_batch(const std::vector<LoadedScene>& scenes, const TrainConfig& cfg,
                                   const TargetProvider& provider, long step) {
  const std::vector<std::size_t> idx = batch_scene_indices(scenes.size(), cfg, step);
  std::vector<BatchItem> items(idx.size());
  parallel_for(idx.size(), cfg.threads, [&](std::size_t s) {
    Rng rng = Rng::derive(cfg.seed, 2, static_cast<std::uint64_t>(step), s);
    std::optional<std::size_t> partner;
    if (scenes.size() > 1) {
      const auto other = static_cast<std::size_t>(rng.uniform_index(scenes.size() - 1));
      partner = other >= idx[s] ? other + 1 : other;
    }
    items[s] = build_item(scenes, idx[s], partner, cfg, provider, rng);
  });
  return items;
}

SceneInputs<float> scene_inputs(const BatchItem& item, const TrainConfig& cfg) {
  const ModelConfig model = cfg.resolved_model();
  SceneInputs<float> in;
  const std::size_t n = item.view.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(model.encoder.k), n);
  in.encoder_input = encoder_input<float>(item.view.cloud, knn_indices(item.view.cloud, k),
                                          model.encoder);
  in.targets = item.targets;
  in.target_weights = item.target_weights;
  in.cell_labels = item.cell_labels;
  in.color_mask = item.view.color_masked;
  in.color_target = Matrix<float>::Zero(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < item.view.original_colors.size(); ++i)
    in.color_target.row(static_cast<Eigen::Index>(i)) =
        item.view.original_colors[i].cast<float>().transpose();
  if (item.view.original_colors.empty()) std::fill(in.color_mask.begin(), in.color_mask.end(), 0);
  return in;
}

std::string MetricsLog::to_csv() const {
  std::string out = "step,lr,loss,pos_sim,neg_sim\n";
  char buf[160];
  for (const MetricsRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g\n", r.step, r.lr, r.loss, r.pos_sim,
                  r.neg_sim);
    out += buf;
  }
  return out;
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << to_csv();
}

Trainer::Trainer(TrainConfig cfg, std::vector<LoadedScene> scenes)
    : cfg_(std::move(cfg)),
      model_(cfg_.resolved_model()),
      scenes_(std::move(scenes)),
      provider_(cfg_.model.target, cfg_.model.grid, cfg_.model.d_model, cfg_.conv_seed) {
  cfg_.validate();
  if (scenes_.empty()) throw std::invalid_argument("empty batch: no readable scenes");
  Rng init = Rng::derive(cfg_.seed, 0);
  params_ = init_parameters(model_, init);
  velocity_ = params_.zeros_like();
}

void Trainer::resume(const Checkpoint& ckpt) {
  if (!ckpt.params.same_layout(params_) || !ckpt.velocity.same_layout(params_))
    throw std::invalid_argument("checkpoint layout does not match this configuration");
  params_ = ckpt.params;
  velocity_ = ckpt.velocity;
  step_ = ckpt.step;
}

long Trainer::steps_per_epoch() const {
  const auto b = static_cast<long>(cfg_.batch_scenes);
  return (static_cast<long>(scenes_.size()) + b - 1) / b;
}

long Trainer::total_steps() const {
  return cfg_.steps > 0 ? cfg_.steps : static_cast<long>(cfg_.epochs) * steps_per_epoch();
}

MetricsRecord Trainer::step() {
  MetricsRecord rec;
  rec.step = step_;
  rec.lr = cosine_lr(cfg_.lr, step_, total_steps(), cfg_.warmup_steps);

  const std::vector<BatchItem> batch = build_batch(scenes_, cfg_, provider_, step_);
  const std::size_t b = batch.size();
  std::vector<GradientSet<float>> partial(b);
  std::vector<SceneOutputs<float>> outputs(b);
  const float scale = 1.0f / static_cast<float>(b);
  parallel_for(b, cfg_.threads, [&](std::size_t s) {
    partial[s] = params_.zeros_like();
    outputs[s] = scene_objective<float>(params_, model_, cfg_.loss, scene_inputs(batch[s], cfg_),
                                        &partial[s], scale);
  });

  GradientSet<float> grads = params_.zeros_like();
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t i = 0; i < grads.size(); ++i) grads.value(i) += partial[s].value(i);
    rec.loss += outputs[s].loss;
    rec.pos_sim += outputs[s].pos_sim;
    rec.neg_sim += outputs[s].neg_sim;
  }
  rec.loss /= static_cast<double>(b);
  rec.pos_sim /= static_cast<double>(b);
  rec.neg_sim /= static_cast<double>(b);

  if (!std::isfinite(rec.loss) || !grads.all_finite()) {
    char msg[200];
    std::snprintf(msg, sizeof msg,
                  "non-finite loss at step %ld (loss=%g); batch is reproducible from seed=%llu "
                  "step=%ld",
                  step_, rec.loss, static_cast<unsigned long long>(cfg_.seed), step_);
    throw NumericError(msg);
  }
  sgd_momentum_step(params_, grads, velocity_, rec.lr, cfg_.momentum, cfg_.weight_decay);
  if (!params_.all_finite())
    throw NumericError("parameters became non-finite at step " + std::to_string(step_));
  ++step_;
  return rec;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.step = step_;
  c.metadata = config_to_map(cfg_);
  c.params = params_;
  c.velocity = velocity_;
  return c;
}

MetricsLog Trainer::run(const TrainerOptions& options) {
  MetricsLog log;
  const long total = total_steps();
  const long stop = options.stop_at ? std::min(*options.stop_at, total) : total;
  const long per_epoch = steps_per_epoch();
  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);
  while (step_ < stop) {
    log.records.push_back(step());
    const MetricsRecord& r = log.records.back();
    const bool epoch_end = step_ % per_epoch == 0;
    if (options.log && (epoch_end || step_ == total)) {
      char line[200];
      std::snprintf(line, sizeof line,
                    "step %ld/%ld lr=%.5f loss=%.5f pos_sim=%.4f neg_sim=%.4f\n", r.step + 1,
                    total, r.lr, r.loss, r.pos_sim, r.neg_sim);
      *options.log << line << std::flush;
    }
    if (options.out_dir && epoch_end) {
      char name[64];
      std::snprintf(name, sizeof name, "epoch_%04ld.ckpt", step_ / per_epoch);
      save_checkpoint(checkpoint(), *options.out_dir / name);
    }
  }
  if (options.out_dir) {
    if (step_ == total) save_checkpoint(checkpoint(), *options.out_dir / "final.ckpt");
    log.write_csv(*options.out_dir / "metrics.csv");
  }
  return log;
}

TrainResult train(const TrainConfig& cfg, const Manifest& manifest,
                  const TrainerOptions& options) {
  cfg.validate();
  if (manifest.entries.empty()) throw std::invalid_argument("manifest has no entries");
  Trainer trainer(cfg, load_scenes(manifest, cfg, options.log));
  TrainResult result;
  result.metrics = trainer.run(options);
  result.final_checkpoint = trainer.checkpoint();
  return result;
}

}  // namespace simc3d
