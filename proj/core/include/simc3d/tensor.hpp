// Copyright Contributors to the simc3d project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace simc3d {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Ordered collection of named dense arrays. Insertion order is the
/// iteration order, which keeps serialization and reductions deterministic.
template <typename T>
class ParameterSet {
 public:
  Matrix<T>& add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (find(name) >= 0) throw std::invalid_argument("duplicate parameter: " + name);
    names_.push_back(std::move(name));
    values_.push_back(Matrix<T>::Zero(rows, cols));
    return values_.back();
  }

  Matrix<T>& add(std::string name, Matrix<T> value) {
    Matrix<T>& slot = add(std::move(name), value.rows(), value.cols());
    slot = std::move(value);
    return slot;
  }

  bool contains(std::string_view name) const { return find(name) >= 0; }

  Matrix<T>& at(std::string_view name) { return values_[checked(name)]; }
  const Matrix<T>& at(std::string_view name) const { return values_[checked(name)]; }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Matrix<T>& value(std::size_t i) { return values_[i]; }
  const Matrix<T>& value(std::size_t i) const { return values_[i]; }
  const std::vector<std::string>& names() const { return names_; }

  /// Index of `name`, or -1.
  std::ptrdiff_t find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (std::size_t i = 0; i < size(); ++i)
      out.add(names_[i], values_[i].rows(), values_[i].cols());
    return out;
  }

  void set_zero() {
    for (auto& v : values_) v.setZero();
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i)
      out.add(names_[i], Matrix<U>(values_[i].template cast<U>()));
    return out;
  }

  bool same_layout(const ParameterSet& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (names_[i] != other.names_[i] || values_[i].rows() != other.values_[i].rows() ||
          values_[i].cols() != other.values_[i].cols())
        return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& v : values_)
      if (!v.allFinite()) return false;
    return true;
  }

 private:
  std::size_t checked(std::string_view name) const {
    const std::ptrdiff_t i = find(name);
    if (i < 0) throw std::out_of_range("unknown parameter: " + std::string(name));
    return static_cast<std::size_t>(i);
  }

  std::vector<std::string> names_;
  std::vector<Matrix<T>> values_;
};

/// Gradients share the parameter layout.
template <typename T>
using GradientSet = ParameterSet<T>;

}  // namespace simc3d
