// Loss functions over softmax outputs: KL classification loss, prior and
// entropy regularizers, their weighted combination, and the cross-entropy /
// forward-corrected baselines.
//
// Every loss returns its scalar value and, when `dprobs` is given, writes
// dL/d(probs) into it. Logs and denominators clamp their argument to
// kLossEps from below; the analytic gradients follow the clamped formulas
// exactly, so finite differences agree everywhere. Because the clamp can
// lift a near-zero probability, KL-style values may carry negative float
// dust on the order of c * kLossEps; they are never meaningfully negative.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "jolt/error.hpp"
#include "jolt/noise.hpp"
#include "jolt/tensor.hpp"

namespace jolt {

inline constexpr double kLossEps = 1e-8;

/// Class prior distribution p.
struct Prior {
  std::vector<double> p;

  static Prior uniform(std::size_t classes) {
    Prior pr;
    pr.p.assign(classes, 1.0 / static_cast<double>(classes));
    return pr;
  }

  static Prior from_counts(const std::vector<std::size_t>& counts) {
    Prior pr;
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    if (total == 0) throw ContractError("Prior::from_counts: empty counts");
    for (std::size_t c : counts) {
      pr.p.push_back(static_cast<double>(c) / static_cast<double>(total));
    }
    return pr;
  }

  void validate() const {
    double sum = 0.0;
    for (double v : p) {
      if (v < 0.0) throw ContractError("prior: negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ContractError("prior: entries sum to " + std::to_string(sum));
    }
  }
};

/// The three components of the joint objective and their weighted total.
struct LossBreakdown {
  double l_c = 0.0;
  double l_p = 0.0;
  double l_e = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

namespace detail {

inline void check_one_hot(const Tensor& labels, const std::string& what) {
  const std::size_t n = labels.rows(), c = labels.cols();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double v = labels.at(i, j);
      if (std::abs(v - 1.0) <= 1e-9) {
        ++ones;
      } else if (std::abs(v) > 1e-9) {
        throw ContractError(what + ": row " + std::to_string(i) +
                            " is not one-hot");
      }
    }
    if (ones != 1) {
      throw ContractError(what + ": row " + std::to_string(i) + " is not one-hot");
    }
  }
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (!a.same_shape(b)) throw ContractError(what + ": shape mismatch");
}

inline Tensor* prep_grad(Tensor* dprobs, std::size_t n, std::size_t c) {
  if (!dprobs) return nullptr;
  *dprobs = Tensor::matrix(n, c);
  return dprobs;
}

}  // namespace detail

/// Mean KL divergence from the label rows to the prediction rows:
/// (1/b) sum_i sum_j y_ij log(y_ij / s_ij), with 0 log 0 = 0.
inline double kl_classification_loss(const Tensor& labels, const Tensor& probs,
                                     Tensor* dprobs = nullptr) {
  detail::check_same_shape(labels, probs, "kl_classification_loss");
  check_row_stochastic(labels, "kl_classification_loss: labels");
  check_row_stochastic(probs, "kl_classification_loss: probs");
  const std::size_t n = probs.rows(), c = probs.cols();
  const double inv_b = 1.0 / static_cast<double>(n);
  Tensor* g = detail::prep_grad(dprobs, n, c);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double y = labels.at(i, j);
      const double s = probs.at(i, j);
      const double s_clamped = s > kLossEps ? s : kLossEps;
      if (y > 0.0) acc += y * (std::log(y) - std::log(s_clamped));
      if (g && s > kLossEps) g->at(i, j) = -inv_b * y / s_clamped;
    }
  }
  return acc * inv_b;
}

/// KL divergence from the batch-mean prediction to the class prior:
/// sum_j p_j log(p_j / mean_i s_ij). The gradient flows through every row of
/// the batch via the mean, not through a detached copy.
inline double prior_loss(const Tensor& probs, const Prior& prior,
                         Tensor* dprobs = nullptr) {
  if (probs.shape.size() != 2 || probs.rows() == 0) {
    throw ContractError("prior_loss: empty batch");
  }
  check_row_stochastic(probs, "prior_loss: probs");
  prior.validate();
  const std::size_t n = probs.rows(), c = probs.cols();
  if (prior.p.size() != c) throw ContractError("prior_loss: prior size mismatch");
  const double inv_b = 1.0 / static_cast<double>(n);
  std::vector<double> mean(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) mean[j] += probs.at(i, j);
  }
  for (double& m : mean) m *= inv_b;
  Tensor* g = detail::prep_grad(dprobs, n, c);
  double acc = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    const double p = prior.p[j];
    const double m = mean[j] > kLossEps ? mean[j] : kLossEps;
    if (p > 0.0) acc += p * (std::log(p) - std::log(m));
    if (g && mean[j] > kLossEps) {
      const double gj = -inv_b * p / m;
      for (std::size_t i = 0; i < n; ++i) g->at(i, j) = gj;
    }
  }
  return acc;
}

/// Mean prediction entropy: -(1/b) sum_i sum_j s_ij log s_ij. Zero exactly
/// on one-hot rows, log c at uniform rows.
inline double entropy_loss(const Tensor& probs, Tensor* dprobs = nullptr) {
  check_row_stochastic(probs, "entropy_loss: probs");
  const std::size_t n = probs.rows(), c = probs.cols();
  const double inv_b = 1.0 / static_cast<double>(n);
  Tensor* g = detail::prep_grad(dprobs, n, c);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double s = probs.at(i, j);
      const double s_clamped = s > kLossEps ? s : kLossEps;
      const double log_s = std::log(s_clamped);
      if (s > 0.0) acc += s * log_s;
      if (g) g->at(i, j) = -inv_b * (log_s + (s > kLossEps ? 1.0 : 0.0));
    }
  }
  return -acc * inv_b;
}

/// Joint objective: l_c + alpha * l_p + beta * l_e.
inline LossBreakdown total_loss(const Tensor& labels, const Tensor& probs,
                                const Prior& prior, double alpha, double beta,
                                Tensor* dprobs = nullptr) {
  if (alpha < 0.0 || beta < 0.0) {
    throw ConfigError("total_loss: alpha and beta must be non-negative");
  }
  LossBreakdown out;
  out.alpha = alpha;
  out.beta = beta;
  Tensor g_c, g_p, g_e;
  out.l_c = kl_classification_loss(labels, probs, dprobs ? &g_c : nullptr);
  out.l_p = prior_loss(probs, prior, dprobs ? &g_p : nullptr);
  out.l_e = entropy_loss(probs, dprobs ? &g_e : nullptr);
  out.total = out.l_c + alpha * out.l_p + beta * out.l_e;
  if (dprobs) {
    *dprobs = Tensor::matrix(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < dprobs->numel(); ++i) {
      dprobs->values[i] =
          g_c.values[i] + alpha * g_p.values[i] + beta * g_e.values[i];
    }
  }
  return out;
}

/// Standard cross entropy over one-hot labels. Identical to
/// kl_classification_loss on the same inputs (one-hot entropy is zero).
inline double cross_entropy_loss(const Tensor& onehot_labels, const Tensor& probs,
                                 Tensor* dprobs = nullptr) {
  detail::check_same_shape(onehot_labels, probs, "cross_entropy_loss");
  detail::check_one_hot(onehot_labels, "cross_entropy_loss");
  check_row_stochastic(probs, "cross_entropy_loss: probs");
  const std::size_t n = probs.rows(), c = probs.cols();
  const double inv_b = 1.0 / static_cast<double>(n);
  Tensor* g = detail::prep_grad(dprobs, n, c);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double y = onehot_labels.at(i, j);
      if (y <= 0.0) continue;
      const double s = probs.at(i, j);
      const double s_clamped = s > kLossEps ? s : kLossEps;
      acc += y * std::log(s_clamped);
      if (g && s > kLossEps) g->at(i, j) = -inv_b * y / s_clamped;
    }
  }
  return -acc * inv_b;
}

/// Cross entropy routed through a noise transition matrix:
/// -(1/b) sum_i log(y_i^T T s_i). With T = identity this reduces exactly to
/// cross_entropy_loss.
inline double forward_corrected_loss(const Tensor& onehot_labels, const Tensor& probs,
                                     const TransitionMatrix& T,
                                     Tensor* dprobs = nullptr) {
  detail::check_same_shape(onehot_labels, probs, "forward_corrected_loss");
  detail::check_one_hot(onehot_labels, "forward_corrected_loss");
  check_row_stochastic(probs, "forward_corrected_loss: probs");
  if (T.classes != probs.cols()) {
    throw ContractError("forward_corrected_loss: transition matrix size mismatch");
  }
  T.validate();
  const std::size_t n = probs.rows(), c = probs.cols();
  const double inv_b = 1.0 / static_cast<double>(n);
  Tensor* g = detail::prep_grad(dprobs, n, c);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = argmax_row(onehot_labels, i);
    double q = 0.0;
    for (std::size_t j = 0; j < c; ++j) q += T.at(label, j) * probs.at(i, j);
    const double q_clamped = q > kLossEps ? q : kLossEps;
    acc += std::log(q_clamped);
    if (g && q > kLossEps) {
      for (std::size_t j = 0; j < c; ++j) {
        g->at(i, j) = -inv_b * T.at(label, j) / q_clamped;
      }
    }
  }
  return -acc * inv_b;
}

}  // namespace jolt
