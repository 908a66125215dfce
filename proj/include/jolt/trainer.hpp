// Training loops: the alternating parameter/label optimization (step 1),
// plain retraining on recovered labels (step 2), evaluation, and the
// learning-rate/noise-rate memorization probe.
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "jolt/dataset.hpp"
#include "jolt/error.hpp"
#include "jolt/labels.hpp"
#include "jolt/losses.hpp"
#include "jolt/network.hpp"
#include "jolt/noise.hpp"
#include "jolt/optimizer.hpp"
#include "jolt/rng.hpp"

namespace jolt {

struct JointRunConfig {
  double alpha = 1.2;
  double beta = 0.8;
  UpdateSchedule schedule;
  std::size_t averaging_window = 10;  // 0 = all past epochs
  LabelMode mode = LabelMode::soft;
  std::size_t num_epochs = 200;
  std::uint64_t seed = 1;

  void validate() const {
    if (alpha < 0.0 || beta < 0.0) {
      throw ConfigError("joint run: alpha and beta must be non-negative");
    }
    schedule.validate();
  }
};

struct MetricsRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  std::optional<double> val_acc;
  std::optional<double> test_acc;
  std::optional<double> recovery_acc;
  std::size_t labels_changed = 0;
};

/// Argmax accuracy (percent) of the network on a dataset split.
inline double evaluate(const NetworkSpec& spec, const ParamSet& params,
                       const LabeledDataset& ds, Split split) {
  const std::vector<std::size_t> idx = ds.indices_of(split);
  if (idx.empty()) throw UsageError("evaluate: empty split");
  if (!ds.has_ground_truth()) throw UsageError("evaluate: no ground truth");
  std::size_t correct = 0;
  const std::size_t chunk = 512;
  for (std::size_t off = 0; off < idx.size(); off += chunk) {
    const std::size_t len = std::min(chunk, idx.size() - off);
    std::vector<std::size_t> part(idx.begin() + off, idx.begin() + off + len);
    const Tensor probs = forward(spec, params, ds.gather_features(part));
    for (std::size_t r = 0; r < len; ++r) {
      if (argmax_row(probs, r) == ds.ground_truth[part[r]]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(idx.size());
}

namespace detail {

/// Softmax outputs over the training split, computed in chunks. Chunking
/// does not affect the per-sample values.
inline Tensor train_snapshot(const NetworkSpec& spec, const ParamSet& params,
                             const LabeledDataset& ds) {
  Tensor out = Tensor::matrix(ds.n_train, ds.classes);
  const std::size_t chunk = 512;
  for (std::size_t off = 0; off < ds.n_train; off += chunk) {
    const std::size_t len = std::min(chunk, ds.n_train - off);
    std::vector<std::size_t> part(len);
    for (std::size_t i = 0; i < len; ++i) part[i] = off + i;
    const Tensor probs = forward(spec, params, ds.gather_features(part));
    for (std::size_t r = 0; r < len; ++r) {
      for (std::size_t j = 0; j < ds.classes; ++j) {
        out.at(off + r, j) = probs.at(r, j);
      }
    }
  }
  return out;
}

inline Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::matrix(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < m.cols(); ++j) out.at(r, j) = m.at(rows[r], j);
  }
  return out;
}

}  // namespace detail

/// Step 1: alternating optimization. Each epoch runs seeded-shuffle
/// minibatch SGD on the joint objective over the current labels, records a
/// full-train-set softmax snapshot into the averaging buffer, then applies
/// the label update when the epoch lies in the update window. Stepwise API
/// so callers can checkpoint between epochs.
class JointRun {
 public:
  JointRun(const LabeledDataset& ds, NetworkSpec spec, JointRunConfig cfg,
           OptimizerConfig opt, Prior prior)
      : ds_(ds),
        spec_(std::move(spec)),
        cfg_(cfg),
        opt_(opt),
        prior_(std::move(prior)),
        store_(make_store(ds, cfg.mode)),
        buffer_(cfg.averaging_window),
        params_(init_params(spec_, derive_seed(cfg.seed, "init-step1"))) {
    cfg_.validate();
    opt_.validate();
    prior_.validate();
    if (prior_.p.size() != ds.classes) {
      throw ConfigError("joint run: prior size differs from class count");
    }
    if (spec_.class_count != ds.classes) {
      throw ConfigError("joint run: network classes differ from dataset classes");
    }
  }

  bool done() const { return epoch_ >= cfg_.num_epochs; }
  std::size_t epoch() const { return epoch_; }
  const LabelStore& store() const { return store_; }
  const ProbBuffer& buffer() const { return buffer_; }
  const ParamSet& params() const { return params_; }
  const std::vector<MetricsRecord>& metrics() const { return metrics_; }
  const JointRunConfig& config() const { return cfg_; }

  MetricsRecord run_epoch() {
    if (done()) throw UsageError("JointRun: all epochs already executed");
    const std::size_t e = epoch_;

    std::vector<std::size_t> perm(ds_.n_train);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng shuffle_rng(derive_seed(cfg_.seed, "shuffle-step1", e));
    shuffle_rng.shuffle(perm);

    LossBreakdown epoch_loss;
    epoch_loss.alpha = cfg_.alpha;
    epoch_loss.beta = cfg_.beta;
    for (std::size_t off = 0; off < perm.size(); off += opt_.batch_size) {
      const std::size_t len = std::min(opt_.batch_size, perm.size() - off);
      std::vector<std::size_t> batch_idx(perm.begin() + off, perm.begin() + off + len);
      const Tensor features = ds_.gather_features(batch_idx);
      const Tensor labels = detail::gather_rows(store_.current(), batch_idx);

      Trace trace;
      const Tensor probs = forward(spec_, params_, features, &trace);
      Tensor dprobs;
      const LossBreakdown lb =
          total_loss(labels, probs, prior_, cfg_.alpha, cfg_.beta, &dprobs);
      if (!std::isfinite(lb.total)) {
        throw NumericError("joint run: training loss diverged at epoch " +
                           std::to_string(e));
      }
      params_.zero_grads();
      backward(spec_, params_, trace, dprobs);
      sgd_step(params_, opt_, e);

      const double w = static_cast<double>(len) / static_cast<double>(perm.size());
      epoch_loss.l_c += w * lb.l_c;
      epoch_loss.l_p += w * lb.l_p;
      epoch_loss.l_e += w * lb.l_e;
      epoch_loss.total += w * lb.total;
    }

    buffer_.record(detail::train_snapshot(spec_, params_, ds_));
    const UpdateResult upd = maybe_update(store_, buffer_, cfg_.schedule, e);

    MetricsRecord rec;
    rec.epoch = e;
    rec.train = epoch_loss;
    if (ds_.n_val > 0 && ds_.has_ground_truth()) {
      rec.val_acc = evaluate(spec_, params_, ds_, Split::val);
    }
    if (ds_.n_test > 0 && ds_.has_ground_truth()) {
      rec.test_acc = evaluate(spec_, params_, ds_, Split::test);
    }
    if (store_.has_ground_truth()) rec.recovery_acc = store_.recovery_accuracy_pct();
    rec.labels_changed = upd.did_update ? upd.changed : 0;
    metrics_.push_back(rec);
    ++epoch_;
    return rec;
  }

  /// Resume from a checkpoint taken after `completed_epochs` epochs.
  void restore(std::size_t completed_epochs, std::map<std::string, Tensor> params,
               std::map<std::string, Tensor> momentum, const Tensor& labels_current,
               std::deque<Tensor> buffer_history, std::size_t buffer_epochs) {
    if (completed_epochs > cfg_.num_epochs) {
      throw ContractError("JointRun::restore: epoch beyond configured run");
    }
    for (auto& [name, p] : params_.params) {
      auto it = params.find(name);
      if (it == params.end() || !it->second.same_shape(p)) {
        throw ContractError("JointRun::restore: missing or mismatched parameter " + name);
      }
      p.values = it->second.values;
      auto mit = momentum.find(name);
      if (mit == momentum.end() || !mit->second.same_shape(p)) {
        throw ContractError("JointRun::restore: missing momentum buffer for " + name);
      }
      params_.momentum.at(name).values = mit->second.values;
    }
    store_.restore_current(labels_current);
    buffer_.restore(std::move(buffer_history), buffer_epochs);
    epoch_ = completed_epochs;
    metrics_.clear();
  }

 private:
  static LabelStore make_store(const LabeledDataset& ds, LabelMode mode) {
    if (!ds.has_noisy()) throw UsageError("joint run: dataset has no noisy labels");
    Tensor noisy = one_hot(ds.labels_of(Split::train, true), ds.classes);
    std::optional<Tensor> truth;
    if (ds.has_ground_truth()) {
      truth = one_hot(ds.labels_of(Split::train, false), ds.classes);
    }
    return LabelStore(std::move(noisy), std::move(truth), mode);
  }

  const LabeledDataset& ds_;
  NetworkSpec spec_;
  JointRunConfig cfg_;
  OptimizerConfig opt_;
  Prior prior_;
  LabelStore store_;
  ProbBuffer buffer_;
  ParamSet params_;
  std::vector<MetricsRecord> metrics_;
  std::size_t epoch_ = 0;
};

struct JointResult {
  LabelStore store;
  std::vector<MetricsRecord> metrics;
  ParamSet params;
};

inline JointResult run_joint(const LabeledDataset& ds, const NetworkSpec& spec,
                             const JointRunConfig& cfg, const OptimizerConfig& opt,
                             const Prior& prior) {
  JointRun run(ds, spec, cfg, opt, prior);
  while (!run.done()) run.run_epoch();
  return JointResult{run.store(), run.metrics(), run.params()};
}

/// Step 2: supervised training on fixed (possibly soft) labels with the
/// classification loss only, from freshly initialized parameters.
class FinalRun {
 public:
  FinalRun(const LabeledDataset& ds, Tensor train_labels, NetworkSpec spec,
           OptimizerConfig opt, std::size_t num_epochs, std::uint64_t seed)
      : ds_(ds),
        labels_(std::move(train_labels)),
        spec_(std::move(spec)),
        opt_(opt),
        num_epochs_(num_epochs),
        seed_(seed),
        params_(init_params(spec_, derive_seed(seed, "init-step2"))) {
    opt_.validate();
    if (labels_.shape.size() != 2 || labels_.rows() != ds.n_train ||
        labels_.cols() != ds.classes) {
      throw ContractError("final run: label matrix must be n_train x classes");
    }
    check_row_stochastic(labels_, "final run: labels", 1e-6);
    if (ds.has_ground_truth()) {
      const auto truth = ds.labels_of(Split::train, false);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < ds.n_train; ++i) {
        if (argmax_row(labels_, i) == truth[i]) ++correct;
      }
      recovery_acc_ = 100.0 * static_cast<double>(correct) /
                      static_cast<double>(ds.n_train);
    }
  }

  bool done() const { return epoch_ >= num_epochs_; }
  std::size_t epoch() const { return epoch_; }
  const ParamSet& params() const { return params_; }
  const std::vector<MetricsRecord>& metrics() const { return metrics_; }

  MetricsRecord run_epoch() {
    if (done()) throw UsageError("FinalRun: all epochs already executed");
    const std::size_t e = epoch_;
    std::vector<std::size_t> perm(ds_.n_train);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng shuffle_rng(derive_seed(seed_, "shuffle-step2", e));
    shuffle_rng.shuffle(perm);

    double loss_acc = 0.0;
    for (std::size_t off = 0; off < perm.size(); off += opt_.batch_size) {
      const std::size_t len = std::min(opt_.batch_size, perm.size() - off);
      std::vector<std::size_t> batch_idx(perm.begin() + off, perm.begin() + off + len);
      const Tensor features = ds_.gather_features(batch_idx);
      const Tensor labels = detail::gather_rows(labels_, batch_idx);

      Trace trace;
      const Tensor probs = forward(spec_, params_, features, &trace);
      Tensor dprobs;
      const double l_c = kl_classification_loss(labels, probs, &dprobs);
      if (!std::isfinite(l_c)) {
        throw NumericError("final run: training loss diverged at epoch " +
                           std::to_string(e));
      }
      params_.zero_grads();
      backward(spec_, params_, trace, dprobs);
      sgd_step(params_, opt_, e);
      loss_acc += l_c * static_cast<double>(len) / static_cast<double>(perm.size());
    }

    MetricsRecord rec;
    rec.epoch = e;
    rec.train.l_c = loss_acc;
    rec.train.total = loss_acc;
    if (ds_.n_val > 0 && ds_.has_ground_truth()) {
      rec.val_acc = evaluate(spec_, params_, ds_, Split::val);
    }
    if (ds_.n_test > 0 && ds_.has_ground_truth()) {
      rec.test_acc = evaluate(spec_, params_, ds_, Split::test);
    }
    rec.recovery_acc = recovery_acc_;
    metrics_.push_back(rec);
    ++epoch_;
    return rec;
  }

  void restore(std::size_t completed_epochs, std::map<std::string, Tensor> params,
               std::map<std::string, Tensor> momentum) {
    if (completed_epochs > num_epochs_) {
      throw ContractError("FinalRun::restore: epoch beyond configured run");
    }
    for (auto& [name, p] : params_.params) {
      auto it = params.find(name);
      if (it == params.end() || !it->second.same_shape(p)) {
        throw ContractError("FinalRun::restore: missing or mismatched parameter " + name);
      }
      p.values = it->second.values;
      auto mit = momentum.find(name);
      if (mit == momentum.end() || !mit->second.same_shape(p)) {
        throw ContractError("FinalRun::restore: missing momentum buffer for " + name);
      }
      params_.momentum.at(name).values = mit->second.values;
    }
    epoch_ = completed_epochs;
    metrics_.clear();
  }

 private:
  const LabeledDataset& ds_;
  Tensor labels_;
  NetworkSpec spec_;
  OptimizerConfig opt_;
  std::size_t num_epochs_;
  std::uint64_t seed_;
  ParamSet params_;
  std::vector<MetricsRecord> metrics_;
  std::optional<double> recovery_acc_;
  std::size_t epoch_ = 0;
};

struct FinalResult {
  ParamSet params;
  std::vector<MetricsRecord> metrics;
};

inline FinalResult run_final(const LabeledDataset& ds, const Tensor& train_labels,
                             const NetworkSpec& spec, const OptimizerConfig& opt,
                             std::size_t num_epochs, std::uint64_t seed) {
  FinalRun run(ds, train_labels, spec, opt, num_epochs, seed);
  while (!run.done()) run.run_epoch();
  return FinalResult{run.params(), run.metrics()};
}

struct ProbeCell {
  double lr = 0.0;
  double noise_rate = 0.0;
  double final_train_loss = 0.0;
  std::optional<double> final_test_acc;
  std::optional<double> best_test_acc;
  std::vector<MetricsRecord> metrics;
};

/// Cross-entropy-only training grid over (learning rate x noise rate), no
/// label updates. The same injected dataset is reused across learning rates
/// so cells in a column differ only in the schedule.
inline std::vector<ProbeCell> memorization_probe(
    const LabeledDataset& clean, const NetworkSpec& spec,
    const std::vector<double>& lr_values, const std::vector<double>& noise_rates,
    std::size_t epochs, const OptimizerConfig& opt_base, std::uint64_t seed) {
  if (lr_values.empty() || noise_rates.empty()) {
    throw ConfigError("memorization_probe: empty grid axis");
  }
  std::vector<ProbeCell> cells;
  for (std::size_t ri = 0; ri < noise_rates.size(); ++ri) {
    const InjectResult injected =
        inject_symmetric(clean, noise_rates[ri], derive_seed(seed, "probe-noise", ri));
    const Tensor labels = one_hot(
        injected.dataset.labels_of(Split::train, true), injected.dataset.classes);
    for (std::size_t li = 0; li < lr_values.size(); ++li) {
      OptimizerConfig opt = opt_base;
      opt.lr = LrSchedule::constant(lr_values[li]);
      const std::uint64_t cell_seed =
          derive_seed(seed, "probe-cell", ri * lr_values.size() + li);
      FinalResult res =
          run_final(injected.dataset, labels, spec, opt, epochs, cell_seed);
      ProbeCell cell;
      cell.lr = lr_values[li];
      cell.noise_rate = noise_rates[ri];
      cell.final_train_loss = res.metrics.empty() ? 0.0 : res.metrics.back().train.l_c;
      if (!res.metrics.empty()) cell.final_test_acc = res.metrics.back().test_acc;
      for (const MetricsRecord& m : res.metrics) {
        if (m.test_acc && (!cell.best_test_acc || *m.test_acc > *cell.best_test_acc)) {
          cell.best_test_acc = m.test_acc;
        }
      }
      cell.metrics = std::move(res.metrics);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace jolt
