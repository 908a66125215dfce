// Dense row-major tensor with paired gradient storage.
#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "jolt/error.hpp"

namespace jolt {

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

/// Dense n-dimensional array of doubles, row-major, with an optional
/// gradient buffer of identical shape. Batches of samples are 2-D tensors
/// [batch x features]; convolution layers interpret the feature axis as a
/// flattened (channels, height, width) block.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty = no gradient attached

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> dims) {
    Tensor t;
    t.shape = std::move(dims);
    for (std::size_t d : t.shape) {
      if (d == 0) throw ContractError("Tensor: zero-sized dimension");
    }
    t.values.assign(shape_numel(t.shape), 0.0);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols) {
    return zeros({rows, cols});
  }

  static Tensor row(std::initializer_list<double> vals) {
    Tensor t = zeros({1, vals.size()});
    std::size_t j = 0;
    for (double v : vals) t.values[j++] = v;
    return t;
  }

  std::size_t numel() const { return values.size(); }

  std::size_t rows() const {
    if (shape.size() != 2) throw ContractError("Tensor: rows() needs a 2-D tensor");
    return shape[0];
  }

  std::size_t cols() const {
    if (shape.size() != 2) throw ContractError("Tensor: cols() needs a 2-D tensor");
    return shape[1];
  }

  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }

  void zero_grad() {
    grad.assign(values.size(), 0.0);
  }

  /// Throws NumericError naming `what` if any value is NaN or infinite.
  void check_finite(const std::string& what) const {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw NumericError("non-finite value in " + what + " at index " +
                           std::to_string(i));
      }
    }
  }

  void check_grad_finite(const std::string& what) const {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!std::isfinite(grad[i])) {
        throw NumericError("non-finite gradient in " + what + " at index " +
                           std::to_string(i));
      }
    }
  }
};

/// Index of the row maximum; ties resolve to the lowest class index.
inline std::size_t argmax_row(const Tensor& m, std::size_t row) {
  const std::size_t c = m.cols();
  std::size_t best = 0;
  double best_v = m.at(row, 0);
  for (std::size_t j = 1; j < c; ++j) {
    if (m.at(row, j) > best_v) {
      best_v = m.at(row, j);
      best = j;
    }
  }
  return best;
}

/// Builds an [n x c] one-hot matrix from class indices.
inline Tensor one_hot(const std::vector<std::uint32_t>& labels, std::size_t classes) {
  Tensor t = Tensor::matrix(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw ContractError("one_hot: label " + std::to_string(labels[i]) +
                          " out of range for " + std::to_string(classes) + " classes");
    }
    t.at(i, labels[i]) = 1.0;
  }
  return t;
}

/// Checks that every row of `m` sums to 1 within `tol` and entries are not
/// meaningfully negative. Throws ContractError naming `what`.
inline void check_row_stochastic(const Tensor& m, const std::string& what,
                                 double tol = 1e-4) {
  const std::size_t r = m.rows(), c = m.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = m.at(i, j);
      if (v < -tol || v > 1.0 + tol) {
        throw ContractError(what + ": entry (" + std::to_string(i) + "," +
                            std::to_string(j) + ") = " + std::to_string(v) +
                            " outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ContractError(what + ": row " + std::to_string(i) + " sums to " +
                          std::to_string(sum) + ", expected 1");
    }
  }
}

}  // namespace jolt
