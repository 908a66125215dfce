// The evolving training-label matrix: hard and soft reassignment rules,
// top-k hard updates, per-epoch probability averaging, the t1/t2 update
// schedule, and the recovery report binned by label confidence.
#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "jolt/error.hpp"
#include "jolt/tensor.hpp"

namespace jolt {

enum class LabelMode { hard, soft };

inline const char* label_mode_name(LabelMode m) {
  return m == LabelMode::hard ? "hard" : "soft";
}

inline LabelMode parse_label_mode(const std::string& s) {
  if (s == "hard") return LabelMode::hard;
  if (s == "soft") return LabelMode::soft;
  throw ConfigError("unknown label mode '" + s + "'");
}

/// Row-stochastic matrix of current training labels plus the frozen noisy
/// originals and (optionally) the hidden ground truth used for metrics.
/// Labels start as the noisy one-hot rows in both modes.
class LabelStore {
 public:
  LabelStore(Tensor onehot_noisy, std::optional<Tensor> ground_truth, LabelMode mode)
      : mode_(mode),
        current_(onehot_noisy),
        original_noisy_(std::move(onehot_noisy)),
        ground_truth_(std::move(ground_truth)) {
    check_row_stochastic(original_noisy_, "LabelStore: noisy labels", 1e-6);
    if (ground_truth_ && !ground_truth_->same_shape(original_noisy_)) {
      throw ContractError("LabelStore: ground truth shape mismatch");
    }
    validate_current();
  }

  LabelMode mode() const { return mode_; }
  std::size_t size() const { return current_.rows(); }
  std::size_t classes() const { return current_.cols(); }
  const Tensor& current() const { return current_; }
  const Tensor& original_noisy() const { return original_noisy_; }
  const std::optional<Tensor>& ground_truth() const { return ground_truth_; }
  bool has_ground_truth() const { return ground_truth_.has_value(); }

  /// Hard reassignment: with topk == 0 ("all") every row becomes one-hot at
  /// the argmax of its prediction; otherwise only the topk candidates whose
  /// predicted class differs from the current label are rewritten, ranked by
  /// ascending confidence in the current label (ties by sample index).
  /// Returns the number of rows whose class actually changed.
  std::size_t hard_update(const Tensor& probs, std::size_t topk = 0) {
    if (mode_ != LabelMode::hard) {
      throw UsageError("hard_update on a soft-mode label store");
    }
    check_update_input(probs);
    const std::size_t n = size();
    std::size_t changed = 0;
    if (topk == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        changed += assign_hard(i, argmax_row(probs, i));
      }
    } else {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < n; ++i) {
        if (argmax_row(probs, i) != argmax_row(current_, i)) candidates.push_back(i);
      }
      // lowest confidence in the current label first
      std::stable_sort(candidates.begin(), candidates.end(),
                       [&](std::size_t a, std::size_t b) {
                         return probs.at(a, argmax_row(current_, a)) <
                                probs.at(b, argmax_row(current_, b));
                       });
      if (candidates.size() > topk) candidates.resize(topk);
      for (std::size_t i : candidates) {
        changed += assign_hard(i, argmax_row(probs, i));
      }
    }
    validate_current();
    return changed;
  }

  /// Soft reassignment: current <- probs, verbatim. Returns the number of
  /// rows that moved (L-inf difference above 1e-12).
  std::size_t soft_update(const Tensor& probs) {
    if (mode_ != LabelMode::soft) {
      throw UsageError("soft_update on a hard-mode label store");
    }
    check_update_input(probs);
    const std::size_t n = size(), c = classes();
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double diff = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        diff = std::max(diff, std::abs(current_.at(i, j) - probs.at(i, j)));
      }
      if (diff > 1e-12) ++changed;
    }
    current_.values = probs.values;
    validate_current();
    return changed;
  }

  /// Fraction (in percent) of current labels whose argmax matches the truth.
  double recovery_accuracy_pct() const {
    if (!ground_truth_) {
      throw UsageError("recovery accuracy requires ground truth");
    }
    const std::size_t n = size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (argmax_row(current_, i) == argmax_row(*ground_truth_, i)) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
  }

  /// Class histogram of the current labels' argmax, as fractions.
  std::vector<double> class_histogram() const {
    std::vector<double> hist(classes(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) hist[argmax_row(current_, i)] += 1.0;
    for (double& h : hist) h /= static_cast<double>(size());
    return hist;
  }

  /// Restores a previously serialized current matrix (resume path).
  void restore_current(const Tensor& saved) {
    if (!saved.same_shape(current_)) {
      throw ContractError("LabelStore::restore_current: shape mismatch");
    }
    current_.values = saved.values;
    validate_current();
  }

 private:
  std::size_t assign_hard(std::size_t i, std::size_t cls) {
    const bool changed = argmax_row(current_, i) != cls;
    for (std::size_t j = 0; j < classes(); ++j) current_.at(i, j) = 0.0;
    current_.at(i, cls) = 1.0;
    return changed ? 1 : 0;
  }

  void check_update_input(const Tensor& probs) const {
    if (!probs.same_shape(current_)) {
      throw ContractError("label update: probability matrix shape mismatch");
    }
    check_row_stochastic(probs, "label update: probs", 1e-6);
  }

  void validate_current() const {
    check_row_stochastic(current_, "LabelStore: current labels", 1e-6);
    if (mode_ == LabelMode::hard) {
      for (std::size_t i = 0; i < current_.rows(); ++i) {
        for (std::size_t j = 0; j < current_.cols(); ++j) {
          const double v = current_.at(i, j);
          if (v != 0.0 && v != 1.0) {
            throw ContractError("LabelStore: hard-mode row " + std::to_string(i) +
                                " is not one-hot");
          }
        }
      }
    }
  }

  LabelMode mode_;
  Tensor current_;
  const Tensor original_noisy_;
  const std::optional<Tensor> ground_truth_;
};

/// Ring buffer of the last `window` per-epoch softmax snapshots over the
/// full training set; window 0 means "all past epochs". Averaging with fewer
/// than `window` recorded epochs uses whatever is available.
class ProbBuffer {
 public:
  explicit ProbBuffer(std::size_t window) : window_(window) {}

  void record(const Tensor& epoch_probs) {
    if (!history_.empty() && !epoch_probs.same_shape(history_.front())) {
      throw ContractError("ProbBuffer: snapshot shape mismatch");
    }
    check_row_stochastic(epoch_probs, "ProbBuffer: snapshot", 1e-6);
    history_.push_back(epoch_probs);
    if (window_ > 0 && history_.size() > window_) history_.pop_front();
    ++epoch_count_;
  }

  Tensor averaged() const {
    if (history_.empty()) throw UsageError("ProbBuffer: no epochs recorded");
    Tensor out = Tensor::zeros(history_.front().shape);
    for (const Tensor& h : history_) {
      for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] += h.values[i];
    }
    const double inv = 1.0 / static_cast<double>(history_.size());
    for (double& v : out.values) v *= inv;
    return out;
  }

  std::size_t window() const { return window_; }
  std::size_t stored() const { return history_.size(); }
  std::size_t epoch_count() const { return epoch_count_; }
  bool empty() const { return history_.empty(); }
  const std::deque<Tensor>& history() const { return history_; }

  /// Resume path: reload recorded snapshots and the epoch counter.
  void restore(std::deque<Tensor> history, std::size_t epoch_count) {
    history_ = std::move(history);
    epoch_count_ = epoch_count;
    if (window_ > 0 && history_.size() > window_) {
      throw ContractError("ProbBuffer::restore: more snapshots than the window");
    }
  }

 private:
  std::size_t window_;
  std::deque<Tensor> history_;
  std::size_t epoch_count_ = 0;
};

/// Label updates run at epochs t1 <= e < t2. topk 0 means "all" (hard mode).
struct UpdateSchedule {
  std::size_t t1 = 0;
  std::size_t t2 = std::numeric_limits<std::size_t>::max();
  std::size_t topk = 0;

  void validate() const {
    if (t1 > t2) throw ConfigError("update schedule: t1 must not exceed t2");
  }

  bool active(std::size_t epoch) const { return epoch >= t1 && epoch < t2; }
};

struct UpdateResult {
  bool did_update = false;
  std::size_t changed = 0;
};

/// Applies the mode's update rule with the buffer average iff the epoch lies
/// in [t1, t2); otherwise leaves the store untouched.
inline UpdateResult maybe_update(LabelStore& store, const ProbBuffer& buffer,
                                 const UpdateSchedule& schedule, std::size_t epoch) {
  schedule.validate();
  if (!schedule.active(epoch)) return {};
  const Tensor avg = buffer.averaged();
  UpdateResult res;
  res.did_update = true;
  res.changed = store.mode() == LabelMode::hard ? store.hard_update(avg, schedule.topk)
                                                : store.soft_update(avg);
  return res;
}

/// One row of the confidence-binned recovery report.
struct BinRow {
  double lo = 0.0, hi = 1.0;  // max-probability range (lo, hi]
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy_pct() const {
    return count == 0 ? 0.0
                      : 100.0 * static_cast<double>(correct) / static_cast<double>(count);
  }
};

/// Partitions samples by the maximum probability of their current soft label
/// into {(0.99,1], (0.95,0.99], (0.9,0.95], (0,0.9]} and reports argmax-vs-
/// truth accuracy per bin, plus an overall row. Bin counts sum to n.
inline std::vector<BinRow> bin_recovery_report(const LabelStore& store) {
  if (store.mode() != LabelMode::soft) {
    throw UsageError("bin_recovery_report: requires a soft-mode store");
  }
  if (!store.has_ground_truth()) {
    throw UsageError("bin_recovery_report: requires ground truth");
  }
  std::vector<BinRow> bins = {
      {0.99, 1.0, 0, 0}, {0.95, 0.99, 0, 0}, {0.9, 0.95, 0, 0}, {0.0, 0.9, 0, 0}};
  BinRow overall{0.0, 1.0, 0, 0};
  const Tensor& cur = store.current();
  const Tensor& truth = *store.ground_truth();
  for (std::size_t i = 0; i < cur.rows(); ++i) {
    const std::size_t pred = argmax_row(cur, i);
    const double top = cur.at(i, pred);
    const bool ok = pred == argmax_row(truth, i);
    for (BinRow& b : bins) {
      if (top > b.lo && top <= b.hi + 1e-12) {
        ++b.count;
        if (ok) ++b.correct;
        break;
      }
    }
    ++overall.count;
    if (ok) ++overall.correct;
  }
  bins.push_back(overall);
  return bins;
}

}  // namespace jolt
