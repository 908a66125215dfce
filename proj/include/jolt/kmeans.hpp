// k-means++ seeding with Lloyd iterations, and pseudo-label generation over
// a dataset's training features.
#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "jolt/dataset.hpp"
#include "jolt/error.hpp"
#include "jolt/rng.hpp"

namespace jolt {

struct KMeansResult {
  std::vector<std::uint32_t> assignments;  // size n, cluster index per point
  std::vector<double> centroids;           // k x dim, row-major
  double inertia = 0.0;                    // sum of squared distances to centroid
  std::size_t iterations = 0;
};

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace detail

/// Classic k-means++: first centroid uniform, each next drawn with
/// probability proportional to the squared distance to the nearest chosen
/// centroid; then Lloyd iterations until the assignment reaches a fixpoint
/// or max_iters. Ties in assignment go to the lowest cluster index; an
/// emptied cluster is reseeded at the point farthest from its own centroid.
inline KMeansResult kmeanspp(const std::vector<double>& features, std::size_t n,
                             std::size_t dim, std::size_t k, std::uint64_t seed,
                             std::size_t max_iters) {
  if (k == 0 || k > n) {
    throw ConfigError("kmeanspp: k must lie in [1, n]");
  }
  if (max_iters == 0) throw ConfigError("kmeanspp: max_iters must be positive");
  if (features.size() != n * dim) throw ContractError("kmeanspp: bad feature buffer");

  Rng rng(derive_seed(seed, "kmeans"));
  const auto point = [&](std::size_t i) { return &features[i * dim]; };

  // ++ seeding
  std::vector<double> centroids(k * dim, 0.0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  {
    const std::size_t first = rng.uniform_int(n);
    for (std::size_t c = 0; c < dim; ++c) centroids[c] = point(first)[c];
  }
  for (std::size_t cl = 1; cl < k; ++cl) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = detail::sq_dist(point(i), &centroids[(cl - 1) * dim], dim);
      if (d < d2[i]) d2[i] = d;
      total += d2[i];
    }
    std::size_t chosen;
    if (total <= 0.0) {
      chosen = rng.uniform_int(n);  // all points coincide with centroids
    } else {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    }
    for (std::size_t c = 0; c < dim; ++c) {
      centroids[cl * dim + c] = point(chosen)[c];
    }
  }

  KMeansResult res;
  res.assignments.assign(n, 0);
  std::vector<std::uint32_t> prev(n, std::numeric_limits<std::uint32_t>::max());
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    res.iterations = iter + 1;
    res.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t best_c = 0;
      for (std::size_t cl = 0; cl < k; ++cl) {
        const double d = detail::sq_dist(point(i), &centroids[cl * dim], dim);
        if (d < best) {
          best = d;
          best_c = static_cast<std::uint32_t>(cl);
        }
      }
      res.assignments[i] = best_c;
      res.inertia += best;
    }
    if (res.assignments == prev) break;
    prev = res.assignments;

    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t cl = res.assignments[i];
      ++counts[cl];
      for (std::size_t c = 0; c < dim; ++c) sums[cl * dim + c] += point(i)[c];
    }
    for (std::size_t cl = 0; cl < k; ++cl) {
      if (counts[cl] == 0) {
        // reseed on the point farthest from its current centroid
        double far_d = -1.0;
        std::size_t far_i = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = detail::sq_dist(
              point(i), &centroids[res.assignments[i] * dim], dim);
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        for (std::size_t c = 0; c < dim; ++c) {
          centroids[cl * dim + c] = point(far_i)[c];
        }
        continue;
      }
      for (std::size_t c = 0; c < dim; ++c) {
        centroids[cl * dim + c] = sums[cl * dim + c] / static_cast<double>(counts[cl]);
      }
    }
  }
  res.centroids = std::move(centroids);
  return res;
}

struct PseudoLabelResult {
  LabeledDataset dataset;   // noisy train labels replaced by pseudo labels
  double inertia = 0.0;
  double accuracy_pct = 0.0;  // vs ground truth, when available
};

/// Clusters the training features and installs the cluster labels as the
/// train split's noisy labels. When ground truth is available, clusters are
/// mapped to classes by majority truth (ties to the lowest class index) and
/// the resulting label accuracy is reported; otherwise raw cluster ids are
/// used and k must equal the class count.
inline PseudoLabelResult kmeanspp_pseudo_labels(const LabeledDataset& input,
                                                std::size_t k, std::uint64_t seed,
                                                std::size_t max_iters) {
  if (k > input.n_train) {
    throw ConfigError("kmeanspp_pseudo_labels: k exceeds training-set size");
  }
  std::vector<double> train_features(input.features.begin(),
                                     input.features.begin() + input.n_train * input.dim);
  KMeansResult km =
      kmeanspp(train_features, input.n_train, input.dim, k, seed, max_iters);

  std::vector<std::uint32_t> cluster_class(k, 0);
  if (input.has_ground_truth()) {
    std::vector<std::vector<std::size_t>> votes(
        k, std::vector<std::size_t>(input.classes, 0));
    for (std::size_t i = 0; i < input.n_train; ++i) {
      ++votes[km.assignments[i]][input.ground_truth[i]];
    }
    for (std::size_t cl = 0; cl < k; ++cl) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < input.classes; ++c) {
        if (votes[cl][c] > votes[cl][best]) best = c;
      }
      cluster_class[cl] = static_cast<std::uint32_t>(best);
    }
  } else {
    if (k != input.classes) {
      throw ConfigError(
          "kmeanspp_pseudo_labels: without ground truth, k must equal the class count");
    }
    for (std::size_t cl = 0; cl < k; ++cl) {
      cluster_class[cl] = static_cast<std::uint32_t>(cl);
    }
  }

  PseudoLabelResult res;
  res.dataset = input;
  res.inertia = km.inertia;
  if (res.dataset.noisy.empty() && res.dataset.has_ground_truth()) {
    res.dataset.noisy = res.dataset.ground_truth;
  }
  if (res.dataset.noisy.empty()) {
    throw UsageError("kmeanspp_pseudo_labels: dataset has no label storage");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < input.n_train; ++i) {
    res.dataset.noisy[i] = cluster_class[km.assignments[i]];
    if (input.has_ground_truth() && res.dataset.noisy[i] == input.ground_truth[i]) {
      ++correct;
    }
  }
  if (input.has_ground_truth()) {
    res.accuracy_pct =
        100.0 * static_cast<double>(correct) / static_cast<double>(input.n_train);
  }
  res.dataset.validate();
  return res;
}

}  // namespace jolt
