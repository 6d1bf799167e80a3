// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "simc3d/tensor.hpp"

namespace simc3d {

enum class Objective { kInfoNce, kPositionClassification };

std::string_view to_string(Objective o);
/// Accepts "infonce" and "posclass" (or "position_classification").
Objective parse_objective(std::string_view text);

struct LossConfig {
  double tau = 0.07;
  Objective objective = Objective::kInfoNce;
  double color_loss_weight = 0.0;

  void validate() const;
};

/// Contrastive loss over one scene: row i of q is paired with row i of k and
/// every other row of k is a negative.
///
/// loss = mean_i −log( exp(⟨q_i,k_i⟩/τ) / Σ_t exp(⟨q_i,k_t⟩/τ) )
///
/// Rows are expected to be unit length so the dot product is the cosine.
/// `pos_sim` is the mean ⟨q_i,k_i⟩ and `neg_sim` the mean over i ≠ t.
template <typename T>
struct InfoNceResult {
  T loss = 0;
  Matrix<T> grad_q;
  Matrix<T> grad_k;
  T pos_sim = 0;
  T neg_sim = 0;
};

/// Throws std::invalid_argument when N < 2, shapes differ, or tau <= 0.
template <typename T>
InfoNceResult<T> info_nce(const Matrix<T>& q, const Matrix<T>& k, T tau);

template <typename T>
struct LossAndGrad {
  T loss = 0;
  Matrix<T> grad;
};

/// Mean softmax cross-entropy. Throws std::invalid_argument on a label
/// outside [0, classes).
template <typename T>
LossAndGrad<T> position_classification_loss(const Matrix<T>& logits,
                                            const std::vector<int>& labels);

/// Mean squared error over the rows flagged in `mask`, averaged over the
/// masked rows and the 3 channels. An empty mask yields zero loss and a zero
/// gradient.
template <typename T>
LossAndGrad<T> color_reconstruction_loss(const Matrix<T>& pred, const Matrix<T>& target,
                                         const std::vector<std::uint8_t>& mask);

}  // namespace simc3d
