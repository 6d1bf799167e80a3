// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#include "simc3d/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace simc3d {
namespace {

/// Row-wise softmax in place; returns the per-row log-sum-exp.
template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, 1> softmax_rows(Matrix<T>& logits) {
  Eigen::Matrix<T, Eigen::Dynamic, 1> lse(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const T m = row.maxCoeff();
    row.array() = (row.array() - m).exp();
    const T s = row.sum();
    row /= s;
    lse[i] = m + std::log(s);
  }
  return lse;
}

}  // namespace

std::string_view to_string(Objective o) {
  return o == Objective::kInfoNce ? "infonce" : "posclass";
}

Objective parse_objective(std::string_view text) {
  if (text == "infonce") return Objective::kInfoNce;
  if (text == "posclass" || text == "position_classification")
    return Objective::kPositionClassification;
  throw std::invalid_argument("unknown objective '" + std::string(text) +
                              "' (valid: infonce, posclass)");
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(color_loss_weight >= 0.0)) throw std::invalid_argument("color loss weight must be >= 0");
}

template <typename T>
InfoNceResult<T> info_nce(const Matrix<T>& q, const Matrix<T>& k, T tau) {
  const Eigen::Index n = q.rows();
  if (n < 2) throw std::invalid_argument("info_nce: need at least 2 points for negatives");
  if (k.rows() != n || k.cols() != q.cols())
    throw std::invalid_argument("info_nce: q and k shapes differ");
  if (!(tau > T(0))) throw std::invalid_argument("info_nce: temperature must be positive");

  InfoNceResult<T> r;
  Matrix<T> sim = q * k.transpose();
  const T trace = sim.diagonal().sum();
  r.pos_sim = trace / T(n);
  r.neg_sim = (sim.sum() - trace) / (T(n) * T(n - 1));

  Matrix<T> prob = sim / tau;
  const T diag_logits = trace / tau;
  const auto lse = softmax_rows(prob);
  r.loss = (lse.sum() - diag_logits) / T(n);

  // d loss / d logits = (P − I) / N; logits = S / τ.
  prob.diagonal().array() -= T(1);
  prob *= T(1) / (T(n) * tau);
  r.grad_q = prob * k;
  r.grad_k = prob.transpose() * q;
  return r;
}

template <typename T>
LossAndGrad<T> position_classification_loss(const Matrix<T>& logits,
                                            const std::vector<int>& labels) {
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("position_classification_loss: label count mismatch");
  if (n == 0) throw std::invalid_argument("position_classification_loss: empty batch");
  for (int l : labels)
    if (l < 0 || l >= logits.cols())
      throw std::invalid_argument("position_classification_loss: label " + std::to_string(l) +
                                  " outside [0, " + std::to_string(logits.cols()) + ")");
  LossAndGrad<T> r;
  r.grad = logits;
  const auto lse = softmax_rows(r.grad);
  T total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += lse[i] - logits(i, labels[static_cast<std::size_t>(i)]);
    r.grad(i, labels[static_cast<std::size_t>(i)]) -= T(1);
  }
  r.loss = total / T(n);
  r.grad /= T(n);
  return r;
}

template <typename T>
LossAndGrad<T> color_reconstruction_loss(const Matrix<T>& pred, const Matrix<T>& target,
                                         const std::vector<std::uint8_t>& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      static_cast<std::size_t>(pred.rows()) != mask.size())
    throw std::invalid_argument("color_reconstruction_loss: shape mismatch");
  LossAndGrad<T> r;
  r.grad = Matrix<T>::Zero(pred.rows(), pred.cols());
  std::size_t count = 0;
  for (std::uint8_t m : mask) count += m ? 1 : 0;
  if (count == 0) return r;
  const T denom = T(count) * T(pred.cols());
  T total = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const auto diff = (pred.row(i) - target.row(i)).eval();
    total += diff.squaredNorm();
    r.grad.row(i) = diff * (T(2) / denom);
  }
  r.loss = total / denom;
  return r;
}

template InfoNceResult<float> info_nce<float>(const Matrix<float>&, const Matrix<float>&, float);
template InfoNceResult<double> info_nce<double>(const Matrix<double>&, const Matrix<double>&,
                                                double);
template LossAndGrad<float> position_classification_loss<float>(const Matrix<float>&,
                                                                const std::vector<int>&);
template LossAndGrad<double> position_classification_loss<double>(const Matrix<double>&,
                                                                  const std::vector<int>&);
template LossAndGrad<float> color_reconstruction_loss<float>(const Matrix<float>&,
                                                             const Matrix<float>&,
                                                             const std::vector<std::uint8_t>&);
template LossAndGrad<double> color_reconstruction_loss<double>(const Matrix<double>&,
                                                               const Matrix<double>&,
                                                               const std::vector<std::uint8_t>&);

}  // namespace simc3d
