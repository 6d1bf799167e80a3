// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "simc3d/augment.hpp"
#include "simc3d/rng.hpp"

namespace simc3d {
namespace {

constexpr double kNormEps = 1e-8;

std::string layer_name(const std::string& prefix, std::size_t i, const char* what) {
  return prefix + "/layer" + std::to_string(i) + "/" + what;
}

void add_linear(ParameterSet<float>& p, const std::string& prefix, std::size_t index, int in,
                int out, double gain, Rng& rng) {
  Matrix<float>& w = p.add(layer_name(prefix, index, "weight"), in, out);
  const double sd = std::sqrt(gain / in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(sd * rng.normal());
  p.add(layer_name(prefix, index, "bias"), 1, out);
}

template <typename T>
typename Graph<T>::Node linear(Graph<T>& g, typename Graph<T>::Node x, const std::string& prefix,
                               std::size_t index) {
  auto w = g.parameter(layer_name(prefix, index, "weight"));
  auto b = g.parameter(layer_name(prefix, index, "bias"));
  return g.add_bias(g.matmul(x, w), b);
}

const char* head_prefix(HeadKind which, const ModelConfig& cfg) {
  if (which == HeadKind::kOnline || cfg.shared_target_head) return "head/online";
  return "head/target";
}

/// Mean cosine between rows sharing a label (positive) and rows with
/// different labels (negative).
template <typename T>
void label_similarities(const Matrix<T>& q, const std::vector<int>& labels, T& pos, T& neg) {
  const Matrix<T> sim = q * q.transpose();
  double ps = 0.0, ns = 0.0;
  std::size_t pc = 0, nc = 0;
  for (Eigen::Index i = 0; i < sim.rows(); ++i)
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      if (i == j) continue;
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        ps += sim(i, j);
        ++pc;
      } else {
        ns += sim(i, j);
        ++nc;
      }
    }
  pos = pc ? static_cast<T>(ps / pc) : T(0);
  neg = nc ? static_cast<T>(ns / nc) : T(0);
}

}  // namespace

void EncoderConfig::validate() const {
  if (in_channels != 3 && in_channels != 6)
    throw std::invalid_argument("encoder in_channels must be 3 or 6");
  if (k < 1) throw std::invalid_argument("encoder neighborhood k must be >= 1");
  for (int h : hidden)
    if (h <= 0) throw std::invalid_argument("encoder hidden widths must be positive");
  if (feature_dim <= 0 || proj_dim <= 0)
    throw std::invalid_argument("encoder feature and projection dims must be positive");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (d_model <= 0 || d_model % 4 != 0)
    throw std::invalid_argument("d_model must be a positive multiple of 4");
  if (grid < 2) throw std::invalid_argument("grid must be >= 2");
  if ((target == TargetVariant::kConvColor || target == TargetVariant::kConvDepth) && grid != 7)
    throw std::invalid_argument("conv-locality targets produce a 7×7 grid; set grid = 7");
  if (shared_target_head && d_model != encoder.feature_dim)
    throw std::invalid_argument("a shared target head needs d_model == feature_dim");
}

ParameterSet<float> init_parameters(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ParameterSet<float> p;
  const EncoderConfig& e = cfg.encoder;
  int in = e.input_width();
  std::size_t layer = 0;
  auto add_layer = [&](int out, double gain) {
    add_linear(p, "encoder", layer, in, out, gain, rng);
    if (e.global_context && layer > 0) {
      Matrix<float>& w = p.add(layer_name("encoder", layer, "global_weight"), in, out);
      const double sd = std::sqrt(1.0 / in);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(sd * rng.normal());
    }
    ++layer;
    in = out;
  };
  for (int h : e.hidden) add_layer(h, 2.0);
  add_layer(e.feature_dim, 1.0);

  add_linear(p, "head/online", 0, e.feature_dim, e.feature_dim, 2.0, rng);
  add_linear(p, "head/online", 1, e.feature_dim, e.proj_dim, 1.0, rng);
  if (cfg.objective == Objective::kInfoNce && !cfg.shared_target_head) {
    add_linear(p, "head/target", 0, cfg.d_model, e.feature_dim, 2.0, rng);
    add_linear(p, "head/target", 1, e.feature_dim, e.proj_dim, 1.0, rng);
  }
  if (cfg.objective == Objective::kPositionClassification) {
    Matrix<float>& w = p.add("head/classifier/weight", e.proj_dim, cfg.grid * cfg.grid);
    const double sd = std::sqrt(1.0 / e.proj_dim);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(sd * rng.normal());
    p.add("head/classifier/bias", 1, cfg.grid * cfg.grid);
  }
  if (cfg.color_head) add_linear(p, "head/color", 0, e.feature_dim, 3, 1.0, rng);
  if (cfg.target == TargetVariant::kLearnable) {
    const TargetGrid pe = build_pe_map(cfg.grid, cfg.grid, cfg.d_model);
    Matrix<float>& emb = p.add("target/embedding", static_cast<Eigen::Index>(pe.cells()), cfg.d_model);
    for (Eigen::Index i = 0; i < emb.size(); ++i)
      emb.data()[i] = static_cast<float>(pe.values[static_cast<std::size_t>(i)]);
  }
  return p;
}

Eigen::Matrix3d canonical_yaw_frame(const PointCloud& cloud) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.positions) c += p;
  if (cloud.size()) c /= static_cast<double>(cloud.size());
  if (std::hypot(c.x(), c.y()) < 1e-12) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(-std::atan2(c.y(), c.x()), Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

template <typename T>
Matrix<T> encoder_input(const PointCloud& cloud, const NeighborTable& neighbors,
                        const EncoderConfig& cfg) {
  cfg.validate();
  const std::size_t n = cloud.size();
  if (neighbors.rows != n) throw std::invalid_argument("encoder_input: neighbor table rows != N");
  if (cfg.in_channels == 6 && !cloud.has_colors())
    throw std::invalid_argument("encoder_input: 6 input channels need colors");
  Eigen::Matrix3d frame = Eigen::Matrix3d::Identity();
  if (cfg.canonical_yaw) frame = canonical_yaw_frame(cloud);
  Matrix<T> x(static_cast<Eigen::Index>(n), cfg.input_width());
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < neighbors.k; ++j) centroid += cloud.positions[neighbors.at(i, j)];
    centroid /= static_cast<double>(neighbors.k);
    const Eigen::Vector3d p = frame * cloud.positions[i];
    const Eigen::Vector3d offset = frame * (cloud.positions[i] - centroid);
    const auto r = static_cast<Eigen::Index>(i);
    for (int a = 0; a < 3; ++a) {
      x(r, a) = static_cast<T>(offset[a]);
      x(r, 3 + a) = static_cast<T>(p[a]);
    }
    if (cfg.in_channels == 6)
      for (int a = 0; a < 3; ++a) x(r, 6 + a) = static_cast<T>(cloud.colors[i][a]);
  }
  return x;
}

template <typename T>
typename Graph<T>::Node encode_points(Graph<T>& g, typename Graph<T>::Node input,
                                      const EncoderConfig& cfg) {
  if (g.value(input).cols() != cfg.input_width())
    throw std::invalid_argument("encode_points: input width " +
                                std::to_string(g.value(input).cols()) + " != expected " +
                                std::to_string(cfg.input_width()));
  // Layers after the first also see the column-wise mean of their input.
  auto layer_out = [&](typename Graph<T>::Node x, std::size_t layer) {
    if (!cfg.global_context || layer == 0) return linear(g, x, "encoder", layer);
    auto shift = g.add(
        g.matmul(g.mean_rows(x), g.parameter(layer_name("encoder", layer, "global_weight"))),
        g.parameter(layer_name("encoder", layer, "bias")));
    return g.add_bias(g.matmul(x, g.parameter(layer_name("encoder", layer, "weight"))), shift);
  };
  auto h = input;
  std::size_t layer = 0;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) h = g.relu(layer_out(h, layer++));
  return layer_out(h, layer);
}

template <typename T>
typename Graph<T>::Node project_head(Graph<T>& g, typename Graph<T>::Node features,
                                     HeadKind which, const ModelConfig& cfg) {
  const std::string prefix = head_prefix(which, cfg);
  auto h = g.relu(linear(g, features, prefix, 0));
  return g.normalize_rows(linear(g, h, prefix, 1), static_cast<T>(kNormEps));
}

template <typename T>
Matrix<T> encode_points(const AugmentedView& view, const NeighborTable& neighbors,
                        const ParameterSet<T>& params, const EncoderConfig& cfg) {
  Graph<T> g(params);
  auto x = g.constant(encoder_input<T>(view.cloud, neighbors, cfg));
  return g.value(encode_points(g, x, cfg));
}

template <typename T>
Matrix<T> project_head(const Matrix<T>& features, const ParameterSet<T>& params, HeadKind which,
                       const ModelConfig& cfg) {
  Graph<T> g(params);
  return g.value(project_head(g, g.constant(features), which, cfg));
}

template <typename T>
SceneOutputs<T> scene_objective(const ParameterSet<T>& params, const ModelConfig& model,
                                const LossConfig& loss, const SceneInputs<T>& inputs,
                                GradientSet<T>* grads, T grad_scale) {
  Graph<T> g(params);
  auto features = encode_points(g, g.constant(inputs.encoder_input), model.encoder);
  auto q = project_head(g, features, HeadKind::kOnline, model);

  SceneOutputs<T> out;
  typename Graph<T>::Node main{};
  if (loss.objective == Objective::kInfoNce) {
    typename Graph<T>::Node raw{};
    if (model.target == TargetVariant::kLearnable) {
      raw = g.sparse_matmul(inputs.target_weights, g.parameter("target/embedding"));
    } else {
      raw = g.constant(inputs.targets);
    }
    auto k = project_head(g, raw, HeadKind::kTarget, model);
    main = g.info_nce(q, k, static_cast<T>(loss.tau), &out.pos_sim, &out.neg_sim);
  } else {
    auto logits = g.add_bias(g.matmul(q, g.parameter("head/classifier/weight")),
                             g.parameter("head/classifier/bias"));
    main = g.cross_entropy(logits, inputs.cell_labels);
    label_similarities(g.value(q), inputs.cell_labels, out.pos_sim, out.neg_sim);
  }
  out.main_loss = g.scalar(main);

  auto total = main;
  if (model.color_head && loss.color_loss_weight > 0.0) {
    auto pred = linear(g, features, "head/color", 0);
    auto color = g.masked_mse(pred, inputs.color_target, inputs.color_mask);
    out.color_loss = g.scalar(color);
    total = g.add(main, g.scale(color, static_cast<T>(loss.color_loss_weight)));
  }
  out.loss = g.scalar(total);
  if (grads) g.backward(total, *grads, grad_scale);
  return out;
}

template <typename T>
void sgd_momentum_step(ParameterSet<T>& params, const GradientSet<T>& grads,
                       ParameterSet<T>& velocity, double lr, double momentum,
                       double weight_decay) {
  if (!params.same_layout(grads) || !params.same_layout(velocity))
    throw std::invalid_argument("sgd_momentum_step: parameter/gradient/state shapes differ");
  const T m = static_cast<T>(momentum);
  const T wd = static_cast<T>(weight_decay);
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix<T>& v = velocity.value(i);
    Matrix<T>& p = params.value(i);
    v = m * v + grads.value(i) + wd * p;
    p -= step * v;
  }
}

double cosine_lr(double base_lr, long step, long total_steps, long warmup_steps) {
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base_lr;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

#define SIMC3D_INSTANTIATE(T)                                                                   \
  template Matrix<T> encoder_input<T>(const PointCloud&, const NeighborTable&,                  \
                                      const EncoderConfig&);                                    \
  template Graph<T>::Node encode_points<T>(Graph<T>&, Graph<T>::Node, const EncoderConfig&);    \
  template Graph<T>::Node project_head<T>(Graph<T>&, Graph<T>::Node, HeadKind,                  \
                                          const ModelConfig&);                                  \
  template Matrix<T> encode_points<T>(const AugmentedView&, const NeighborTable&,               \
                                      const ParameterSet<T>&, const EncoderConfig&);            \
  template Matrix<T> project_head<T>(const Matrix<T>&, const ParameterSet<T>&, HeadKind,        \
                                     const ModelConfig&);                                       \
  template SceneOutputs<T> scene_objective<T>(const ParameterSet<T>&, const ModelConfig&,       \
                                              const LossConfig&, const SceneInputs<T>&,         \
                                              GradientSet<T>*, T);                              \
  template void sgd_momentum_step<T>(ParameterSet<T>&, const GradientSet<T>&, ParameterSet<T>&, \
                                     double, double, double);

SIMC3D_INSTANTIATE(float)
SIMC3D_INSTANTIATE(double)

#undef SIMC3D_INSTANTIATE

}  // namespace simc3d
