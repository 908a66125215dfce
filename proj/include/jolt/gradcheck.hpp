// Finite-difference gradient checker: compares the analytic parameter
// gradients of an arbitrary loss over the network output against central
// differences, component by component.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jolt/error.hpp"
#include "jolt/network.hpp"
#include "jolt/rng.hpp"
#include "jolt/tensor.hpp"

namespace jolt {

/// Scalar loss over the network's softmax output, with dL/d(probs).
struct LossEval {
  double value = 0.0;
  Tensor grad;
};
using LossFn = std::function<LossEval(const Tensor& probs)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t components_checked = 0;
};

/// Central-difference check of every parameter component (or a seeded sample
/// of up to `sample_cap` per parameter when set). Returns the maximum
/// relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// Throws NumericError naming the parameter if the loss turns non-finite.
inline GradCheckReport gradient_check(const NetworkSpec& spec, ParamSet& params,
                                      const LossFn& loss_fn, const Tensor& batch,
                                      double eps, std::size_t sample_cap = 0,
                                      std::uint64_t seed = 0x1dea) {
  if (eps < 1e-6 || eps > 1e-3) {
    throw UsageError("gradient_check: eps must lie in [1e-6, 1e-3]");
  }
  // analytic pass
  Trace trace;
  Tensor probs = forward(spec, params, batch, &trace);
  LossEval base = loss_fn(probs);
  if (!std::isfinite(base.value)) {
    throw NumericError("gradient_check: loss non-finite at base point");
  }
  params.zero_grads();
  backward(spec, params, trace, base.grad);

  auto loss_at = [&](const std::string& name, std::size_t idx, double value) {
    Tensor& p = params.params.at(name);
    const double saved = p.values[idx];
    p.values[idx] = value;
    const double out = loss_fn(forward(spec, params, batch)).value;
    p.values[idx] = saved;
    if (!std::isfinite(out)) {
      throw NumericError("gradient_check: loss non-finite while perturbing " + name +
                         "[" + std::to_string(idx) + "]");
    }
    return out;
  };

  GradCheckReport report;
  Rng rng(seed);
  for (auto& [name, p] : params.params) {
    std::vector<std::size_t> indices;
    if (sample_cap == 0 || p.numel() <= sample_cap) {
      indices.resize(p.numel());
      for (std::size_t i = 0; i < p.numel(); ++i) indices[i] = i;
    } else {
      for (std::size_t i = 0; i < sample_cap; ++i) {
        indices.push_back(rng.uniform_int(p.numel()));
      }
    }
    for (std::size_t idx : indices) {
      const double theta = p.values[idx];
      const double plus = loss_at(name, idx, theta + eps);
      const double minus = loss_at(name, idx, theta - eps);
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = p.grad[idx];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.components_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = idx;
      }
    }
  }
  return report;
}

}  // namespace jolt
