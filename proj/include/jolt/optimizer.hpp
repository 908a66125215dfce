// SGD with classical momentum and weight decay, plus the piecewise-constant
// learning-rate schedule.
#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "jolt/error.hpp"
#include "jolt/network.hpp"

namespace jolt {

/// Piecewise-constant learning rate: the value of the last (epoch, lr) point
/// at or before the current epoch applies.
struct LrSchedule {
  std::vector<std::pair<std::size_t, double>> points;  // sorted by epoch

  static LrSchedule constant(double lr) { return {{{0, lr}}}; }

  /// Parses "0:0.2,40:0.02,80:0.002"; a bare number means a constant rate.
  static LrSchedule parse(const std::string& text) {
    LrSchedule s;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      try {
        if (colon == std::string::npos) {
          s.points.emplace_back(0, std::stod(item));
        } else {
          s.points.emplace_back(std::stoul(item.substr(0, colon)),
                                std::stod(item.substr(colon + 1)));
        }
      } catch (const std::exception&) {
        throw ConfigError("bad learning-rate schedule entry '" + item + "'");
      }
    }
    s.validate();
    return s;
  }

  std::string to_string() const {
    std::string out;
    for (const auto& [e, lr] : points) {
      if (!out.empty()) out += ",";
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%zu:%.10g", e, lr);
      out += buf;
    }
    return out;
  }

  void validate() const {
    if (points.empty()) throw ConfigError("learning-rate schedule is empty");
    if (points.front().first != 0) {
      throw ConfigError("learning-rate schedule must start at epoch 0");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].second <= 0.0) {
        throw ConfigError("learning rate must be positive at every schedule point");
      }
      if (i > 0 && points[i].first <= points[i - 1].first) {
        throw ConfigError("learning-rate schedule epochs must increase");
      }
    }
  }

  double at(std::size_t epoch) const {
    double lr = points.front().second;
    for (const auto& [e, v] : points) {
      if (e <= epoch) lr = v;
    }
    return lr;
  }
};

struct OptimizerConfig {
  LrSchedule lr = LrSchedule::constant(0.1);
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch_size = 128;

  void validate() const {
    lr.validate();
    if (momentum < 0.0 || momentum >= 1.0) {
      throw ConfigError("momentum must lie in [0, 1)");
    }
    if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
  }
};

/// One SGD step over all parameters:
///   v <- momentum * v + grad + weight_decay * theta
///   theta <- theta - lr(epoch) * v
/// Aborts with a diagnostic naming the parameter if any gradient is
/// non-finite or missing.
inline void sgd_step(ParamSet& params, const OptimizerConfig& opt, std::size_t epoch) {
  opt.validate();
  const double lr = opt.lr.at(epoch);
  for (auto& [name, p] : params.params) {
    if (!p.has_grad()) {
      throw UsageError("sgd_step: parameter " + name + " has no gradient");
    }
    Tensor& v = params.momentum.at(name);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double g = p.grad[i];
      if (!std::isfinite(g)) {
        throw NumericError("sgd_step: non-finite gradient in " + name + "[" +
                           std::to_string(i) + "]");
      }
      v.values[i] = opt.momentum * v.values[i] + g + opt.weight_decay * p.values[i];
      p.values[i] -= lr * v.values[i];
    }
  }
}

}  // namespace jolt
