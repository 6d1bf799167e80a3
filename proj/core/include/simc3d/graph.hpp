// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "simc3d/loss.hpp"
#include "simc3d/tensor.hpp"

namespace simc3d {

/// Reverse-mode tape over dense matrices.
///
/// Nodes are appended in evaluation order, so reverse index order is a valid
/// topological order for backward(). Parameters are read from the bound
/// ParameterSet; gradients are accumulated into a GradientSet with the same
/// layout. The tape owns copies of every intermediate value.
template <typename T>
class Graph {
 public:
  using Mat = Matrix<T>;
  using Sparse = Eigen::SparseMatrix<T, Eigen::RowMajor>;

  struct Node {
    int index = -1;
  };

  explicit Graph(const ParameterSet<T>& params) : params_(&params) {}

  Node constant(Mat value) { return push(std::move(value), false, {}, nullptr); }

  Node parameter(std::string_view name) {
    const std::ptrdiff_t slot = params_->find(name);
    if (slot < 0) throw std::out_of_range("unknown parameter: " + std::string(name));
    Node n = push(params_->value(static_cast<std::size_t>(slot)), true, {}, nullptr);
    nodes_[n.index].param_slot = slot;
    return n;
  }

  Node matmul(Node a, Node b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Mat out = av * bv;
    return push(std::move(out), any_grad(a, b), {a.index, b.index},
                [a, b](Graph& g, const Mat& go) {
                  if (g.requires_grad(a)) g.accumulate(a, go * g.value(b).transpose());
                  if (g.requires_grad(b)) g.accumulate(b, g.value(a).transpose() * go);
                });
  }

  /// a + 1·bias, bias is 1×C.
  Node add_bias(Node a, Node bias) {
    const Mat& av = value(a);
    const Mat& bv = value(bias);
    if (bv.rows() != 1 || bv.cols() != av.cols())
      throw std::invalid_argument("add_bias: bias must be 1×cols");
    Mat out = av.rowwise() + bv.row(0);
    return push(std::move(out), any_grad(a, bias), {a.index, bias.index},
                [a, bias](Graph& g, const Mat& go) {
                  if (g.requires_grad(a)) g.accumulate(a, go);
                  if (g.requires_grad(bias)) g.accumulate(bias, go.colwise().sum());
                });
  }

  Node add(Node a, Node b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
      throw std::invalid_argument("add: shape mismatch");
    Mat out = av + bv;
    return push(std::move(out), any_grad(a, b), {a.index, b.index},
                [a, b](Graph& g, const Mat& go) {
                  if (g.requires_grad(a)) g.accumulate(a, go);
                  if (g.requires_grad(b)) g.accumulate(b, go);
                });
  }

  /// Column-wise mean over rows (1×cols).
  Node mean_rows(Node a) {
    const Mat& av = value(a);
    if (av.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
    const Eigen::Index rows = av.rows();
    Mat out = av.colwise().mean();
    return push(std::move(out), requires_grad(a), {a.index}, [a, rows](Graph& g, const Mat& go) {
      g.accumulate(a, Mat(go.replicate(rows, 1) / static_cast<T>(rows)));
    });
  }

  Node scale(Node a, T s) {
    Mat out = value(a) * s;
    return push(std::move(out), requires_grad(a), {a.index},
                [a, s](Graph& g, const Mat& go) { g.accumulate(a, go * s); });
  }

  Node relu(Node a) {
    Mat out = value(a).cwiseMax(T(0));
    return push(std::move(out), requires_grad(a), {a.index}, [a](Graph& g, const Mat& go) {
      const Mat& x = g.value(a);
      g.accumulate(a, (x.array() > T(0)).select(go.array(), T(0)).matrix());
    });
  }

  /// Row-wise x / max(‖x‖, eps).
  Node normalize_rows(Node a, T eps) {
    const Mat& x = value(a);
    Eigen::Matrix<T, Eigen::Dynamic, 1> denom = x.rowwise().norm().cwiseMax(eps);
    Mat out = x.array().colwise() / denom.array();
    return push(std::move(out), requires_grad(a), {a.index},
                [a, eps](Graph& g, const Mat& go) {
                  const Mat& xv = g.value(a);
                  Mat gx(xv.rows(), xv.cols());
                  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
                    const T norm = xv.row(i).norm();
                    if (norm > eps) {
                      const auto y = xv.row(i) / norm;
                      gx.row(i) = (go.row(i) - y * go.row(i).dot(y)) / norm;
                    } else {
                      gx.row(i) = go.row(i) / eps;
                    }
                  }
                  g.accumulate(a, gx);
                });
  }

  /// s·b with a constant sparse left factor.
  Node sparse_matmul(Sparse s, Node b) {
    if (s.cols() != value(b).rows()) throw std::invalid_argument("sparse_matmul: shape");
    Mat out = s * value(b);
    return push(std::move(out), requires_grad(b), {b.index},
                [b, s = std::move(s)](Graph& g, const Mat& go) {
                  g.accumulate(b, Mat(s.transpose() * go));
                });
  }

  /// Σ a², a 1×1 node.
  Node sum_squares(Node a) {
    Mat out(1, 1);
    out(0, 0) = value(a).squaredNorm();
    return push(std::move(out), requires_grad(a), {a.index}, [a](Graph& g, const Mat& go) {
      g.accumulate(a, g.value(a) * (T(2) * go(0, 0)));
    });
  }

  Node info_nce(Node q, Node k, T tau, T* pos_sim = nullptr, T* neg_sim = nullptr) {
    InfoNceResult<T> r = simc3d::info_nce<T>(value(q), value(k), tau);
    if (pos_sim) *pos_sim = r.pos_sim;
    if (neg_sim) *neg_sim = r.neg_sim;
    Mat out(1, 1);
    out(0, 0) = r.loss;
    return push(std::move(out), any_grad(q, k), {q.index, k.index},
                [q, k, gq = std::move(r.grad_q), gk = std::move(r.grad_k)](Graph& g,
                                                                          const Mat& go) {
                  if (g.requires_grad(q)) g.accumulate(q, gq * go(0, 0));
                  if (g.requires_grad(k)) g.accumulate(k, gk * go(0, 0));
                });
  }

  Node cross_entropy(Node logits, const std::vector<int>& labels) {
    LossAndGrad<T> r = position_classification_loss<T>(value(logits), labels);
    return scalar_loss(logits, std::move(r));
  }

  Node masked_mse(Node pred, const Mat& target, const std::vector<std::uint8_t>& mask) {
    LossAndGrad<T> r = color_reconstruction_loss<T>(value(pred), target, mask);
    return scalar_loss(pred, std::move(r));
  }

  const Mat& value(Node n) const { return nodes_.at(static_cast<std::size_t>(n.index)).value; }
  T scalar(Node n) const { return value(n)(0, 0); }
  bool requires_grad(Node n) const { return nodes_[static_cast<std::size_t>(n.index)].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulates seed·∂out/∂θ into `grads` for every parameter node.
  /// Parameters the output does not depend on receive nothing (their
  /// gradient stays whatever `grads` already held, normally zero).
  void backward(Node out, GradientSet<T>& grads, T seed = T(1)) {
    if (!grads.same_layout(*params_)) throw std::invalid_argument("gradient layout mismatch");
    const Mat& ov = value(out);
    adjoint_.assign(nodes_.size(), Mat());
    adjoint_[static_cast<std::size_t>(out.index)] = Mat::Constant(ov.rows(), ov.cols(), seed);
    for (int i = out.index; i >= 0; --i) {
      Mat& gi = adjoint_[static_cast<std::size_t>(i)];
      if (gi.size() == 0) continue;
      const NodeData& nd = nodes_[static_cast<std::size_t>(i)];
      if (nd.param_slot >= 0) {
        grads.value(static_cast<std::size_t>(nd.param_slot)) += gi;
      } else if (nd.back) {
        nd.back(*this, gi);
      }
      gi = Mat();
    }
    adjoint_.clear();
  }

  /// Gradient with respect to a non-parameter node from the last backward()
  /// is not retained; use this to request it explicitly.
  Mat input_gradient(Node out, Node input) {
    GradientSet<T> scratch = params_->zeros_like();
    retain_ = input.index;
    backward(out, scratch);
    retain_ = -1;
    Mat g = std::move(retained_);
    retained_ = Mat();
    if (g.size() == 0) g = Mat::Zero(value(input).rows(), value(input).cols());
    return g;
  }

  /// A leaf that participates in gradients but is not a parameter; used for
  /// input-gradient checks.
  Node variable(Mat value) { return push(std::move(value), true, {}, nullptr); }

 private:
  struct NodeData {
    Mat value;
    bool grad = false;
    std::ptrdiff_t param_slot = -1;
    std::vector<int> inputs;
    std::function<void(Graph&, const Mat&)> back;
  };

  Node push(Mat value, bool grad, std::vector<int> inputs,
            std::function<void(Graph&, const Mat&)> back) {
    NodeData nd;
    nd.value = std::move(value);
    nd.grad = grad;
    nd.inputs = std::move(inputs);
    nd.back = std::move(back);
    nodes_.push_back(std::move(nd));
    return Node{static_cast<int>(nodes_.size()) - 1};
  }

  bool any_grad(Node a, Node b) const { return requires_grad(a) || requires_grad(b); }

  void accumulate(Node n, const Mat& g) {
    if (!requires_grad(n)) return;
    if (n.index == retain_) {
      if (retained_.size() == 0) retained_ = g;
      else retained_ += g;
    }
    Mat& slot = adjoint_[static_cast<std::size_t>(n.index)];
    if (slot.size() == 0) slot = g;
    else slot += g;
  }

  Node scalar_loss(Node input, LossAndGrad<T> r) {
    Mat out(1, 1);
    out(0, 0) = r.loss;
    return push(std::move(out), requires_grad(input), {input.index},
                [input, gr = std::move(r.grad)](Graph& g, const Mat& go) {
                  g.accumulate(input, gr * go(0, 0));
                });
  }

  const ParameterSet<T>* params_;
  std::vector<NodeData> nodes_;
  std::vector<Mat> adjoint_;
  int retain_ = -1;
  Mat retained_;
};

}  // namespace simc3d
