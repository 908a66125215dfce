// Label corruption: symmetric and asymmetric injectors, and the matching
// noise transition matrices used by the forward-corrected baseline.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jolt/dataset.hpp"
#include "jolt/error.hpp"
#include "jolt/rng.hpp"

namespace jolt {

enum class NoiseKind { none, symmetric, asymmetric, pseudo };

using PairMap = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double rate = 0.0;
  PairMap pair_map;  // asymmetric only: source class -> target class
  std::uint64_t seed = 0;

  void validate(std::size_t classes) const {
    if (rate < 0.0 || rate > 1.0) {
      throw ConfigError("noise rate must lie in [0,1], got " + std::to_string(rate));
    }
    std::vector<bool> seen(classes, false);
    for (const auto& [src, dst] : pair_map) {
      if (src >= classes || dst >= classes) {
        throw ConfigError("noise pair " + std::to_string(src) + "->" +
                          std::to_string(dst) + " out of range for " +
                          std::to_string(classes) + " classes");
      }
      if (seen[src]) {
        throw ConfigError("duplicate source class " + std::to_string(src) +
                          " in pair map");
      }
      seen[src] = true;
    }
  }
};

/// c x c row-stochastic matrix with t[i][j] = P(noisy = j | true = i).
struct TransitionMatrix {
  std::size_t classes = 0;
  std::vector<double> t;  // row-major

  double at(std::size_t i, std::size_t j) const { return t[i * classes + j]; }
  double& at(std::size_t i, std::size_t j) { return t[i * classes + j]; }

  void validate(double tol = 1e-9) const {
    if (t.size() != classes * classes) {
      throw ContractError("transition matrix: wrong size");
    }
    for (std::size_t i = 0; i < classes; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        if (at(i, j) < -tol) throw ContractError("transition matrix: negative entry");
        sum += at(i, j);
      }
      if (std::abs(sum - 1.0) > tol) {
        throw ContractError("transition matrix: row " + std::to_string(i) +
                            " sums to " + std::to_string(sum));
      }
    }
  }

  static TransitionMatrix identity(std::size_t c) {
    TransitionMatrix m;
    m.classes = c;
    m.t.assign(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

struct InjectResult {
  LabeledDataset dataset;
  std::size_t corrupted_count = 0;  // samples whose noisy label differs from truth
};

/// Replaces each training label, independently with probability r, by a
/// class drawn uniformly over all c classes. The draw may land on the true
/// class, so the expected corrupted fraction is r*(c-1)/c. Pure function of
/// (dataset, r, seed); only the train split is touched.
inline InjectResult inject_symmetric(const LabeledDataset& input, double r,
                                     std::uint64_t seed) {
  if (r < 0.0 || r > 1.0) {
    throw ConfigError("inject_symmetric: rate must lie in [0,1]");
  }
  if (!input.has_ground_truth()) {
    throw UsageError("inject_symmetric: dataset has no ground-truth labels");
  }
  InjectResult res;
  res.dataset = input;
  LabeledDataset& ds = res.dataset;
  ds.noisy = ds.ground_truth;
  Rng rng(derive_seed(seed, "noise-symmetric"));
  for (std::size_t i = 0; i < ds.n_train; ++i) {
    if (rng.uniform() < r) {
      ds.noisy[i] =
          static_cast<std::uint32_t>(rng.uniform_int(ds.classes));
    }
    if (ds.noisy[i] != ds.ground_truth[i]) ++res.corrupted_count;
  }
  ds.validate();
  return res;
}

/// Flips training labels along the pair map: a sample whose true class is a
/// source moves to the mapped target with probability r. Classes absent from
/// the map are never altered.
inline InjectResult inject_asymmetric(const LabeledDataset& input, double r,
                                      const PairMap& pair_map, std::uint64_t seed) {
  if (r < 0.0 || r > 1.0) {
    throw ConfigError("inject_asymmetric: rate must lie in [0,1]");
  }
  if (!input.has_ground_truth()) {
    throw UsageError("inject_asymmetric: dataset has no ground-truth labels");
  }
  NoiseSpec check;
  check.kind = NoiseKind::asymmetric;
  check.rate = r;
  check.pair_map = pair_map;
  check.validate(input.classes);

  std::map<std::uint32_t, std::uint32_t> flips(pair_map.begin(), pair_map.end());
  InjectResult res;
  res.dataset = input;
  LabeledDataset& ds = res.dataset;
  ds.noisy = ds.ground_truth;
  Rng rng(derive_seed(seed, "noise-asymmetric"));
  for (std::size_t i = 0; i < ds.n_train; ++i) {
    const auto it = flips.find(ds.ground_truth[i]);
    if (it == flips.end()) continue;
    if (rng.uniform() < r) ds.noisy[i] = it->second;
    if (ds.noisy[i] != ds.ground_truth[i]) ++res.corrupted_count;
  }
  ds.validate();
  return res;
}

/// Closed-form transition matrix for a noise spec.
///   symmetric:  T = (1-r) I + (r/c) ones   (uniform replacement convention)
///   asymmetric: T_ii = 1-r, T_i,map(i) = r on sources; identity elsewhere
inline TransitionMatrix build_transition_matrix(const NoiseSpec& spec, std::size_t c) {
  spec.validate(c);
  TransitionMatrix m = TransitionMatrix::identity(c);
  if (spec.kind == NoiseKind::symmetric) {
    const double off = spec.rate / static_cast<double>(c);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        m.at(i, j) = (i == j ? 1.0 - spec.rate : 0.0) + off;
      }
    }
  } else if (spec.kind == NoiseKind::asymmetric) {
    for (const auto& [src, dst] : spec.pair_map) {
      if (src == dst) continue;
      m.at(src, src) = 1.0 - spec.rate;
      m.at(src, dst) = spec.rate;
    }
  } else if (spec.kind == NoiseKind::pseudo) {
    throw ConfigError("build_transition_matrix: pseudo noise has no closed form");
  }
  m.validate();
  return m;
}

/// Pair map preset "cifar10-asym": TRUCK->AUTOMOBILE, BIRD->AIRPLANE,
/// DEER->HORSE, CAT<->DOG, with the standard CIFAR-10 class indices.
inline PairMap cifar10_asym_pairs() {
  return {{9, 1}, {2, 0}, {4, 7}, {3, 5}, {5, 3}};
}

inline PairMap pair_map_preset(const std::string& name) {
  if (name == "cifar10-asym") return cifar10_asym_pairs();
  throw ConfigError("unknown pair-map preset '" + name + "'");
}

/// Expected fraction of labels actually changed under uniform replacement.
inline double effective_symmetric_rate(double r, std::size_t c) {
  return r * static_cast<double>(c - 1) / static_cast<double>(c);
}

}  // namespace jolt
