// Labeled feature datasets with train/val/test splits, plus the synthetic
// Gaussian-blobs generator used for desk-scale experiments.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "jolt/error.hpp"
#include "jolt/rng.hpp"
#include "jolt/tensor.hpp"

namespace jolt {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

/// Feature matrix with ground-truth and noisy label index arrays. Samples
/// are stored ordered train, val, test; the split of a sample follows from
/// its position. Ground truth may be absent (pseudo-label feature files).
struct LabeledDataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  std::vector<double> features;             // n x dim, row-major
  std::vector<std::uint32_t> ground_truth;  // size n, or empty if unknown
  std::vector<std::uint32_t> noisy;         // size n, or empty if unassigned

  std::size_t size() const { return n_train + n_val + n_test; }
  bool has_ground_truth() const { return !ground_truth.empty(); }
  bool has_noisy() const { return !noisy.empty(); }

  Split split_of(std::size_t i) const {
    if (i < n_train) return Split::train;
    if (i < n_train + n_val) return Split::val;
    return Split::test;
  }

  std::vector<std::size_t> indices_of(Split s) const {
    std::size_t lo = 0, hi = 0;
    switch (s) {
      case Split::train: lo = 0; hi = n_train; break;
      case Split::val: lo = n_train; hi = n_train + n_val; break;
      case Split::test: lo = n_train + n_val; hi = size(); break;
    }
    std::vector<std::size_t> idx(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    return idx;
  }

  std::size_t count_of(Split s) const {
    switch (s) {
      case Split::train: return n_train;
      case Split::val: return n_val;
      default: return n_test;
    }
  }

  /// Gathers feature rows into a [k x dim] tensor.
  Tensor gather_features(const std::vector<std::size_t>& idx) const {
    Tensor t = Tensor::matrix(idx.size(), dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        t.values[r * dim + c] = features[idx[r] * dim + c];
      }
    }
    return t;
  }

  std::vector<std::uint32_t> labels_of(Split s, bool use_noisy) const {
    const auto& src = use_noisy ? noisy : ground_truth;
    if (src.empty()) {
      throw UsageError(use_noisy ? "dataset has no noisy labels"
                                 : "dataset has no ground-truth labels");
    }
    std::vector<std::uint32_t> out;
    for (std::size_t i : indices_of(s)) out.push_back(src[i]);
    return out;
  }

  void validate() const {
    const std::size_t n = size();
    if (features.size() != n * dim) {
      throw ContractError("dataset: feature buffer size mismatch");
    }
    for (const auto* arr : {&ground_truth, &noisy}) {
      if (!arr->empty() && arr->size() != n) {
        throw ContractError("dataset: label array size mismatch");
      }
      for (std::uint32_t v : *arr) {
        if (v >= classes) throw ContractError("dataset: label out of range");
      }
    }
    // val/test labels must never be corrupted
    if (has_ground_truth() && has_noisy()) {
      for (std::size_t i = n_train; i < n; ++i) {
        if (noisy[i] != ground_truth[i]) {
          throw ContractError("dataset: val/test sample " + std::to_string(i) +
                              " has a corrupted label");
        }
      }
    }
  }
};

struct BlobsConfig {
  std::size_t train_per_class = 300;  // 10% of these become validation
  std::size_t test_per_class = 100;
  std::size_t classes = 3;
  std::size_t dim = 2;
  double separation = 4.0;  // minimum distance between class means, in sigma
  std::uint64_t seed = 1;
};

/// Isotropic unit-variance Gaussian clusters. Class means sit on a circle in
/// the first two feature dimensions with radius sep / (2 sin(pi/c)), so every
/// pairwise distance is at least `separation`. Per class, 10% of the training
/// samples are reassigned to the validation split.
inline LabeledDataset make_blobs(const BlobsConfig& cfg) {
  if (cfg.classes < 2) throw ConfigError("make_blobs: need at least 2 classes");
  if (cfg.dim < 2) throw ConfigError("make_blobs: need at least 2 dimensions");
  if (cfg.train_per_class == 0) throw ConfigError("make_blobs: empty train split");

  const std::size_t c = cfg.classes;
  const double radius =
      cfg.separation <= 0.0 ? 0.0 : cfg.separation / (2.0 * std::sin(kPi / c));
  std::vector<std::vector<double>> means(c, std::vector<double>(cfg.dim, 0.0));
  for (std::size_t k = 0; k < c; ++k) {
    const double angle = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(c);
    means[k][0] = radius * std::cos(angle);
    means[k][1] = radius * std::sin(angle);
  }

  const std::size_t val_pc = cfg.train_per_class / 10;
  const std::size_t train_pc = cfg.train_per_class - val_pc;

  Rng rng(derive_seed(cfg.seed, "blobs"));
  struct Sample {
    std::vector<double> x;
    std::uint32_t label;
    Split split;
  };
  std::vector<Sample> samples;
  samples.reserve(c * (cfg.train_per_class + cfg.test_per_class));
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < cfg.train_per_class + cfg.test_per_class; ++i) {
      Sample s;
      s.x.resize(cfg.dim);
      for (std::size_t dgt = 0; dgt < cfg.dim; ++dgt) {
        s.x[dgt] = means[k][dgt] + rng.normal();
      }
      s.label = static_cast<std::uint32_t>(k);
      if (i < train_pc) {
        s.split = Split::train;
      } else if (i < train_pc + val_pc) {
        s.split = Split::val;
      } else {
        s.split = Split::test;
      }
      samples.push_back(std::move(s));
    }
  }

  LabeledDataset ds;
  ds.dim = cfg.dim;
  ds.classes = c;
  ds.n_train = c * train_pc;
  ds.n_val = c * val_pc;
  ds.n_test = c * cfg.test_per_class;
  ds.features.reserve(samples.size() * cfg.dim);
  for (Split sp : {Split::train, Split::val, Split::test}) {
    for (const Sample& s : samples) {
      if (s.split != sp) continue;
      ds.features.insert(ds.features.end(), s.x.begin(), s.x.end());
      ds.ground_truth.push_back(s.label);
    }
  }
  ds.noisy = ds.ground_truth;
  ds.validate();
  return ds;
}

}  // namespace jolt
