// Experiment orchestration behind the CLI subcommands: dataset preparation
// and noise injection, the two-step run with per-epoch checkpoints and
// resume, hyperparameter sweeps, plot-data export, the memorization probe,
// and the gradient-check suite.
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "jolt/config.hpp"
#include "jolt/dataset.hpp"
#include "jolt/error.hpp"
#include "jolt/gradcheck.hpp"
#include "jolt/io.hpp"
#include "jolt/kmeans.hpp"
#include "jolt/losses.hpp"
#include "jolt/network.hpp"
#include "jolt/noise.hpp"
#include "jolt/trainer.hpp"

namespace jolt {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// dataset preparation

struct DatasetBundle {
  LabeledDataset dataset;
  std::size_t corrupted = 0;
  std::optional<double> pseudo_accuracy;
  std::optional<double> pseudo_inertia;
};

/// Builds (blobs) or loads (file) the dataset and applies the configured
/// corruption to its training split.
inline DatasetBundle prepare_dataset(const ExperimentConfig& ec) {
  DatasetBundle bundle;
  if (ec.dataset_kind == "file") {
    bundle.dataset = read_dataset(ec.dataset_path);
  } else {
    bundle.dataset = make_blobs(ec.blobs);
  }
  switch (ec.noise.kind) {
    case NoiseKind::none:
      break;
    case NoiseKind::symmetric: {
      InjectResult r = inject_symmetric(bundle.dataset, ec.noise.rate, ec.seed);
      bundle.dataset = std::move(r.dataset);
      bundle.corrupted = r.corrupted_count;
      break;
    }
    case NoiseKind::asymmetric: {
      InjectResult r =
          inject_asymmetric(bundle.dataset, ec.noise.rate, ec.noise.pair_map, ec.seed);
      bundle.dataset = std::move(r.dataset);
      bundle.corrupted = r.corrupted_count;
      break;
    }
    case NoiseKind::pseudo: {
      const std::size_t k = ec.kmeans_k == 0 ? bundle.dataset.classes : ec.kmeans_k;
      PseudoLabelResult r =
          kmeanspp_pseudo_labels(bundle.dataset, k, ec.seed, ec.kmeans_iters);
      bundle.dataset = std::move(r.dataset);
      bundle.pseudo_inertia = r.inertia;
      if (bundle.dataset.has_ground_truth()) {
        bundle.pseudo_accuracy = r.accuracy_pct;
        for (std::size_t i = 0; i < bundle.dataset.n_train; ++i) {
          if (bundle.dataset.noisy[i] != bundle.dataset.ground_truth[i]) {
            ++bundle.corrupted;
          }
        }
      }
      break;
    }
  }
  return bundle;
}

inline void write_noise_report(const fs::path& path, const ExperimentConfig& ec,
                               const DatasetBundle& bundle) {
  const LabeledDataset& ds = bundle.dataset;
  std::vector<std::pair<std::string, std::string>> kv;
  const char* kind = "none";
  switch (ec.noise.kind) {
    case NoiseKind::symmetric: kind = "symmetric"; break;
    case NoiseKind::asymmetric: kind = "asymmetric"; break;
    case NoiseKind::pseudo: kind = "pseudo"; break;
    default: break;
  }
  kv.emplace_back("noise.kind", kind);
  kv.emplace_back("noise.rate_nominal", io::fmt_double(ec.noise.rate));
  kv.emplace_back("train_samples", std::to_string(ds.n_train));
  kv.emplace_back("corrupted_count", std::to_string(bundle.corrupted));
  kv.emplace_back("corrupted_fraction",
                  io::fmt_double(ds.n_train == 0
                                     ? 0.0
                                     : static_cast<double>(bundle.corrupted) /
                                           static_cast<double>(ds.n_train)));
  if (ec.noise.kind == NoiseKind::symmetric) {
    kv.emplace_back("effective_rate_expected",
                    io::fmt_double(effective_symmetric_rate(ec.noise.rate, ds.classes)));
  }
  if (bundle.pseudo_accuracy) {
    kv.emplace_back("pseudo_label_accuracy", io::fmt_double(*bundle.pseudo_accuracy));
  }
  if (bundle.pseudo_inertia) {
    kv.emplace_back("pseudo_label_inertia", io::fmt_double(*bundle.pseudo_inertia));
  }
  // per-class confusion counts over the train split (truth -> noisy)
  if (ds.has_ground_truth() && ds.has_noisy()) {
    std::vector<std::size_t> confusion(ds.classes * ds.classes, 0);
    for (std::size_t i = 0; i < ds.n_train; ++i) {
      ++confusion[ds.ground_truth[i] * ds.classes + ds.noisy[i]];
    }
    for (std::size_t t = 0; t < ds.classes; ++t) {
      std::string row;
      for (std::size_t j = 0; j < ds.classes; ++j) {
        if (!row.empty()) row += ",";
        row += std::to_string(confusion[t * ds.classes + j]);
      }
      kv.emplace_back("confusion." + std::to_string(t), row);
    }
  }
  write_kv(path, kv);
}

/// inject subcommand: writes dataset.bin and noise_report.txt.
inline DatasetBundle cmd_inject(const ExperimentConfig& ec, const fs::path& out) {
  fs::create_directories(out);
  DatasetBundle bundle = prepare_dataset(ec);
  write_dataset(out / "dataset.bin", bundle.dataset);
  write_noise_report(out / "noise_report.txt", ec, bundle);
  return bundle;
}

// ---------------------------------------------------------------------------
// the two-step run

struct RunOutcome {
  fs::path out_dir;
  std::map<std::string, std::string> summary;
  bool stopped_early = false;
};

namespace detail {

inline void write_status(const fs::path& dir, const std::string& state,
                         std::uint32_t step, std::size_t epochs_done) {
  write_kv(dir / "status.txt", {{"state", state},
                                {"step", std::to_string(step)},
                                {"epochs_done", std::to_string(epochs_done)}});
}

inline std::string buffer_key(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "buffer.%08zu", i);
  return buf;
}

inline Checkpoint joint_checkpoint(const JointRun& run) {
  Checkpoint ck;
  ck.step = 1;
  ck.completed_epochs = run.epoch();
  for (const auto& [name, p] : run.params().params) {
    Tensor t = p;
    t.grad.clear();
    ck.entries.emplace("param." + name, std::move(t));
  }
  for (const auto& [name, m] : run.params().momentum) {
    ck.entries.emplace("mom." + name, m);
  }
  ck.entries.emplace("labels.current", run.store().current());
  std::size_t i = 0;
  for (const Tensor& snap : run.buffer().history()) {
    ck.entries.emplace(buffer_key(i++), snap);
  }
  Tensor meta = Tensor::matrix(1, 2);
  meta.values[0] = static_cast<double>(run.buffer().stored());
  meta.values[1] = static_cast<double>(run.buffer().epoch_count());
  ck.entries.emplace("meta.buffer", std::move(meta));
  return ck;
}

inline void restore_joint(JointRun& run, const Checkpoint& ck) {
  std::map<std::string, Tensor> params, momentum;
  for (const auto& [name, t] : ck.entries) {
    if (name.rfind("param.", 0) == 0) params.emplace(name.substr(6), t);
    if (name.rfind("mom.", 0) == 0) momentum.emplace(name.substr(4), t);
  }
  const Tensor& meta = ck.entries.at("meta.buffer");
  const std::size_t stored = static_cast<std::size_t>(meta.values[0]);
  const std::size_t buffer_epochs = static_cast<std::size_t>(meta.values[1]);
  std::deque<Tensor> history;
  for (std::size_t i = 0; i < stored; ++i) {
    history.push_back(ck.entries.at(buffer_key(i)));
  }
  run.restore(ck.completed_epochs, std::move(params), std::move(momentum),
              ck.entries.at("labels.current"), std::move(history), buffer_epochs);
}

inline Checkpoint final_checkpoint(const FinalRun& run) {
  Checkpoint ck;
  ck.step = 2;
  ck.completed_epochs = run.epoch();
  for (const auto& [name, p] : run.params().params) {
    Tensor t = p;
    t.grad.clear();
    ck.entries.emplace("param." + name, std::move(t));
  }
  for (const auto& [name, m] : run.params().momentum) {
    ck.entries.emplace("mom." + name, m);
  }
  return ck;
}

inline void restore_final(FinalRun& run, const Checkpoint& ck) {
  std::map<std::string, Tensor> params, momentum;
  for (const auto& [name, t] : ck.entries) {
    if (name.rfind("param.", 0) == 0) params.emplace(name.substr(6), t);
    if (name.rfind("mom.", 0) == 0) momentum.emplace(name.substr(4), t);
  }
  run.restore(ck.completed_epochs, std::move(params), std::move(momentum));
}

/// Index of the record with the highest validation accuracy; earliest epoch
/// wins ties. Falls back to the last record when no validation accuracy
/// exists.
inline std::size_t best_epoch_by_val(const std::vector<MetricsRecord>& ms) {
  std::size_t best = ms.size() - 1;
  double best_val = -1.0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (ms[i].val_acc && *ms[i].val_acc > best_val) {
      best_val = *ms[i].val_acc;
      best = i;
    }
  }
  return best;
}

inline std::string opt_str(const std::optional<double>& v) {
  return v ? io::fmt_double(*v) : std::string("");
}

}  // namespace detail

inline Prior make_prior(const ExperimentConfig& ec, const LabeledDataset& ds) {
  if (ec.prior_kind == "empirical") {
    std::vector<std::size_t> counts(ds.classes, 0);
    for (std::size_t i = 0; i < ds.n_train; ++i) ++counts[ds.noisy[i]];
    return Prior::from_counts(counts);
  }
  return Prior::uniform(ds.classes);
}

/// run subcommand: step 1 (joint optimization) then step 2 (retrain on the
/// recovered labels), with a checkpoint and appended metrics row per epoch.
/// `resume` continues a stopped/killed run from its last checkpoint;
/// `stop_after` halts after that many completed epochs (both steps counted)
/// leaving a resumable directory.
inline RunOutcome cmd_run(const ExperimentConfig& ec, const fs::path& out,
                          bool resume = false,
                          std::optional<std::size_t> stop_after = std::nullopt) {
  fs::create_directories(out);
  const fs::path config_path = out / "config_resolved.cfg";
  const KvConfig resolved = ec.to_kv();
  if (resume && fs::exists(config_path)) {
    const KvConfig previous = KvConfig::parse_file(config_path);
    if (!(previous == resolved)) {
      throw ConfigError("resume: config does not match " + config_path.string());
    }
  } else {
    resolved.write_file(config_path);
  }

  const fs::path dataset_path = out / "dataset.bin";
  LabeledDataset ds;
  if (resume && fs::exists(dataset_path)) {
    ds = read_dataset(dataset_path);
  } else {
    DatasetBundle bundle = prepare_dataset(ec);
    write_dataset(dataset_path, bundle.dataset);
    write_noise_report(out / "noise_report.txt", ec, bundle);
    ds = std::move(bundle.dataset);
  }

  const NetworkSpec spec = parse_network_preset(ec.network_preset);
  const Prior prior = make_prior(ec, ds);
  const fs::path metrics1 = out / "metrics_step1.csv";
  const fs::path metrics2 = out / "metrics_step2.csv";
  const fs::path ckpt1 = out / "ckpt_step1.bin";
  const fs::path ckpt2 = out / "ckpt_step2.bin";
  const fs::path labels_path = out / "labels_recovered.bin";

  std::size_t total_done = 0;
  const auto should_stop = [&]() {
    return stop_after && total_done >= *stop_after;
  };

  // ----- step 1
  std::vector<MetricsRecord> metrics_step1;
  const bool step1_complete_on_disk = resume && fs::exists(labels_path);
  if (step1_complete_on_disk) {
    metrics_step1 = read_metrics_csv(metrics1);
    total_done += metrics_step1.size();
  } else {
    JointRun run(ds, spec, ec.joint, ec.opt1, prior);
    if (resume && fs::exists(ckpt1)) {
      const Checkpoint ck = read_checkpoint(ckpt1);
      if (ck.step != 1) throw IoError("ckpt_step1.bin: unexpected step");
      detail::restore_joint(run, ck);
      truncate_metrics_csv(metrics1, run.epoch());
      metrics_step1 = read_metrics_csv(metrics1);
    } else {
      fs::remove(metrics1);
      fs::remove(ckpt1);
    }
    total_done += run.epoch();
    detail::write_status(out, "running", 1, run.epoch());
    try {
      while (!run.done()) {
        if (should_stop()) {
          write_checkpoint(ckpt1, detail::joint_checkpoint(run));
          detail::write_status(out, "stopped", 1, run.epoch());
          return RunOutcome{out, {}, true};
        }
        const MetricsRecord rec = run.run_epoch();
        metrics_step1.push_back(rec);
        append_metrics_row(metrics1, rec);
        ++total_done;
        if (run.epoch() % ec.checkpoint_every == 0 || run.done()) {
          write_checkpoint(ckpt1, detail::joint_checkpoint(run));
        }
        detail::write_status(out, "running", 1, run.epoch());
      }
    } catch (const NumericError&) {
      write_checkpoint(ckpt1, detail::joint_checkpoint(run));
      detail::write_status(out, "aborted", 1, run.epoch());
      throw;
    }
    write_label_matrix(labels_path, run.store().current(),
                       run.store().mode(), run.config().num_epochs);
  }

  // ----- step 2
  const Tensor recovered = read_label_matrix(labels_path).matrix;
  std::vector<MetricsRecord> metrics_step2;
  {
    FinalRun run(ds, recovered, spec, ec.opt2, ec.final_epochs, ec.seed);
    if (resume && fs::exists(ckpt2)) {
      const Checkpoint ck = read_checkpoint(ckpt2);
      if (ck.step != 2) throw IoError("ckpt_step2.bin: unexpected step");
      detail::restore_final(run, ck);
      truncate_metrics_csv(metrics2, run.epoch());
      metrics_step2 = read_metrics_csv(metrics2);
    } else {
      fs::remove(metrics2);
      fs::remove(ckpt2);
    }
    detail::write_status(out, "running", 2, run.epoch());
    try {
      while (!run.done()) {
        if (should_stop()) {
          write_checkpoint(ckpt2, detail::final_checkpoint(run));
          detail::write_status(out, "stopped", 2, run.epoch());
          return RunOutcome{out, {}, true};
        }
        const MetricsRecord rec = run.run_epoch();
        metrics_step2.push_back(rec);
        append_metrics_row(metrics2, rec);
        ++total_done;
        if (run.epoch() % ec.checkpoint_every == 0 || run.done()) {
          write_checkpoint(ckpt2, detail::final_checkpoint(run));
        }
        detail::write_status(out, "running", 2, run.epoch());
      }
    } catch (const NumericError&) {
      write_checkpoint(ckpt2, detail::final_checkpoint(run));
      detail::write_status(out, "aborted", 2, run.epoch());
      throw;
    }
  }

  // ----- summary
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("classes", std::to_string(ds.classes));
  kv.emplace_back("n_train", std::to_string(ds.n_train));
  kv.emplace_back("n_val", std::to_string(ds.n_val));
  kv.emplace_back("n_test", std::to_string(ds.n_test));
  if (!metrics_step1.empty()) {
    const MetricsRecord& last1 = metrics_step1.back();
    const MetricsRecord& best1 = metrics_step1[detail::best_epoch_by_val(metrics_step1)];
    kv.emplace_back("step1_epochs", std::to_string(metrics_step1.size()));
    kv.emplace_back("recovery_accuracy", detail::opt_str(last1.recovery_acc));
    kv.emplace_back("step1_val_best", detail::opt_str(best1.val_acc));
    kv.emplace_back("step1_val_best_epoch", std::to_string(best1.epoch));
    kv.emplace_back("step1_test_best", detail::opt_str(best1.test_acc));
    kv.emplace_back("step1_test_last", detail::opt_str(last1.test_acc));
    kv.emplace_back("step1_train_loss_last", io::fmt_double(last1.train.total));
  }
  if (!metrics_step2.empty()) {
    const MetricsRecord& last2 = metrics_step2.back();
    const MetricsRecord& best2 = metrics_step2[detail::best_epoch_by_val(metrics_step2)];
    kv.emplace_back("step2_epochs", std::to_string(metrics_step2.size()));
    kv.emplace_back("val_best", detail::opt_str(best2.val_acc));
    kv.emplace_back("val_best_epoch", std::to_string(best2.epoch));
    kv.emplace_back("test_best", detail::opt_str(best2.test_acc));
    kv.emplace_back("test_last", detail::opt_str(last2.test_acc));
    kv.emplace_back("train_loss_last", io::fmt_double(last2.train.total));
  }
  write_kv(out / "summary.txt", kv);
  detail::write_status(out, "completed", 2, metrics_step2.size());

  RunOutcome outcome;
  outcome.out_dir = out;
  for (const auto& [k, v] : kv) outcome.summary[k] = v;
  return outcome;
}

// ---------------------------------------------------------------------------
// sweeps

struct SweepSpec {
  std::string axis;  // alpha | beta | learning_rate | t1 | t2 | noise_rate
  std::vector<double> values;
  KvConfig base;

  void validate() const {
    static const std::set<std::string> axes = {"alpha", "beta", "learning_rate",
                                               "t1", "t2", "noise_rate"};
    if (!axes.count(axis)) throw ConfigError("unknown sweep axis '" + axis + "'");
    if (values.empty()) throw ConfigError("sweep: empty value list");
  }
};

struct SweepRow {
  double value = 0.0;
  std::optional<double> val_acc;
  std::string status;  // "ok" or an error message
  fs::path dir;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> best_value;
};

namespace detail {

inline std::string axis_key(const std::string& axis) {
  if (axis == "alpha") return "joint.alpha";
  if (axis == "beta") return "joint.beta";
  if (axis == "learning_rate") return "opt1.lr";
  if (axis == "t1") return "joint.t1";
  if (axis == "t2") return "joint.t2";
  return "noise.rate";
}

inline std::string axis_value_str(const std::string& axis, double v) {
  if (axis == "t1" || axis == "t2") {
    return std::to_string(static_cast<std::size_t>(v));
  }
  return io::fmt_double(v);
}

}  // namespace detail

/// One full two-step run per axis value, in parallel up to `jobs` threads.
/// Failures are recorded per cell and do not stop the sweep. The table is
/// sorted by value; the best value is flagged by validation accuracy.
inline SweepResult cmd_sweep(const SweepSpec& sweep, const fs::path& out,
                             std::size_t jobs = 1) {
  sweep.validate();
  fs::create_directories(out);
  std::vector<double> values = sweep.values;
  std::sort(values.begin(), values.end());

  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, values.size()));
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= values.size()) return;
      SweepRow& row = rows[i];
      row.value = values[i];
      row.dir = out / ("cell_" + detail::axis_value_str(sweep.axis, values[i]));
      try {
        KvConfig kv = sweep.base;
        kv.set(detail::axis_key(sweep.axis),
               detail::axis_value_str(sweep.axis, values[i]));
        const ExperimentConfig ec = ExperimentConfig::from_kv(kv);
        const RunOutcome outcome = cmd_run(ec, row.dir);
        const auto it = outcome.summary.find("val_best");
        if (it != outcome.summary.end() && !it->second.empty()) {
          row.val_acc = std::stod(it->second);
        }
        row.status = "ok";
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  SweepResult result;
  result.rows = rows;
  double best_acc = -1.0;
  for (const SweepRow& r : rows) {
    if (r.val_acc && *r.val_acc > best_acc) {
      best_acc = *r.val_acc;
      result.best_value = r.value;
    }
  }

  std::ofstream table(out / "sweep.csv", std::ios::trunc);
  if (!table) throw IoError("cannot write sweep.csv");
  table << "value,val_accuracy,status,dir\n";
  for (const SweepRow& r : rows) {
    table << io::fmt_double(r.value) << "," << detail::opt_str(r.val_acc) << ","
          << (r.status == "ok" ? "ok" : "failed") << "," << r.dir.filename().string()
          << "\n";
  }
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("axis", sweep.axis);
  if (result.best_value) {
    kv.emplace_back("best_value", io::fmt_double(*result.best_value));
    kv.emplace_back("best_val_accuracy", io::fmt_double(best_acc));
  }
  for (const SweepRow& r : rows) {
    if (r.status != "ok") {
      kv.emplace_back("error." + detail::axis_value_str(sweep.axis, r.value), r.status);
    }
  }
  write_kv(out / "sweep_summary.txt", kv);
  return result;
}

// ---------------------------------------------------------------------------
// plot data

/// Emits one (epoch, value) series file per metric column, copying the field
/// strings from the metrics files verbatim.
inline std::vector<fs::path> cmd_plotdata(const fs::path& run_dir) {
  const fs::path curves = run_dir / "curves";
  bool found_any = false;
  std::vector<fs::path> written;
  for (int step : {1, 2}) {
    const fs::path metrics =
        run_dir / ("metrics_step" + std::to_string(step) + ".csv");
    if (!fs::exists(metrics)) continue;
    found_any = true;
    std::ifstream in(metrics);
    if (!in) throw IoError("cannot open " + metrics.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) {
      throw UsageError("unexpected metrics header in " + metrics.string());
    }
    struct Series {
      const char* name;
      std::size_t column;
      std::vector<std::string> rows;
    };
    std::vector<Series> series = {{"train_loss_lc", 1, {}},
                                  {"train_loss_lp", 2, {}},
                                  {"train_loss_le", 3, {}},
                                  {"train_loss_total", 4, {}},
                                  {"test_accuracy", 6, {}},
                                  {"recovery_accuracy", 7, {}}};
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) fields.push_back(f);
      while (fields.size() < 9) fields.emplace_back();
      for (Series& s : series) {
        if (!fields[s.column].empty()) {
          s.rows.push_back(fields[0] + "," + fields[s.column]);
        }
      }
    }
    fs::create_directories(curves);
    for (const Series& s : series) {
      if (s.rows.empty()) continue;
      const fs::path path =
          curves / ("step" + std::to_string(step) + "_" + s.name + ".csv");
      std::ofstream out(path, std::ios::trunc);
      if (!out) throw IoError("cannot write " + path.string());
      out << "epoch," << s.name << "\n";
      for (const std::string& r : s.rows) out << r << "\n";
      written.push_back(path);
    }
  }
  if (!found_any) {
    throw UsageError("no metrics files found under " + run_dir.string());
  }
  return written;
}

// ---------------------------------------------------------------------------
// memorization probe

struct ProbeConfig {
  std::vector<double> lrs = {0.2, 0.01};
  std::vector<double> rates = {0.1, 0.5, 0.9};
  std::size_t epochs = 600;
};

inline std::vector<ProbeCell> cmd_probe(const ExperimentConfig& ec,
                                        const ProbeConfig& probe, const fs::path& out) {
  fs::create_directories(out);
  if (ec.dataset_kind != "blobs" && ec.dataset_kind != "file") {
    throw ConfigError("probe: dataset must be blobs or file");
  }
  ExperimentConfig clean_cfg = ec;
  clean_cfg.noise.kind = NoiseKind::none;
  const LabeledDataset clean = prepare_dataset(clean_cfg).dataset;
  const NetworkSpec spec = parse_network_preset(ec.network_preset);
  OptimizerConfig opt = ec.opt1;
  const std::vector<ProbeCell> cells = memorization_probe(
      clean, spec, probe.lrs, probe.rates, probe.epochs, opt, ec.seed);

  std::ofstream grid(out / "probe_grid.csv", std::ios::trunc);
  if (!grid) throw IoError("cannot write probe_grid.csv");
  grid << "lr,noise_rate,final_train_loss,final_test_acc,best_test_acc\n";
  for (const ProbeCell& c : cells) {
    grid << io::fmt_double(c.lr) << "," << io::fmt_double(c.noise_rate) << ","
         << io::fmt_double(c.final_train_loss) << ","
         << detail::opt_str(c.final_test_acc) << ","
         << detail::opt_str(c.best_test_acc) << "\n";
    char name[96];
    std::snprintf(name, sizeof(name), "probe_lr%g_r%g.csv", c.lr, c.noise_rate);
    write_metrics_csv(out / name, c.metrics);
  }
  return cells;
}

// ---------------------------------------------------------------------------
// gradient-check suite

struct GradCheckTrial {
  std::string network;
  std::string loss;
  double rel_error = 0.0;
};

struct GradCheckSuiteResult {
  std::vector<GradCheckTrial> trials;
  double max_rel_error = 0.0;
};

/// Randomized gradient checks across every layer type and every loss. Each
/// trial draws a small network (dense/relu stacks and a conv+pool stack), a
/// random batch, and cycles through the loss functions.
inline GradCheckSuiteResult run_gradcheck_suite(std::size_t trials, std::uint64_t seed,
                                                double eps = 1e-5) {
  GradCheckSuiteResult result;
  Rng rng(derive_seed(seed, "gradcheck-suite"));
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t classes = 2 + rng.uniform_int(4);  // 2..5
    std::string net_name;
    NetworkSpec spec;
    if (t % 3 == 2) {
      // conv2d + relu + global_avg_pool + dense + softmax
      const std::size_t ch = 1 + rng.uniform_int(2);
      const std::size_t side = 4 + rng.uniform_int(3);
      const std::size_t filters = 2 + rng.uniform_int(3);
      spec.input = FeatureDims::image_chw(ch, side, side);
      spec.layers = {Conv2dLayer{ch, filters, 3, 1, 1}, ReluLayer{},
                     GlobalAvgPoolLayer{}, DenseLayer{filters, classes},
                     SoftmaxLayer{classes}};
      spec.class_count = classes;
      net_name = "conv" + std::to_string(ch) + "x" + std::to_string(side);
    } else {
      const std::size_t in = 2 + rng.uniform_int(5);
      const std::size_t hidden = 3 + rng.uniform_int(6);
      spec.input = FeatureDims::flat(in);
      spec.class_count = classes;
      if (t % 3 == 1) {
        spec.layers = {DenseLayer{in, hidden}, ReluLayer{},
                       DenseLayer{hidden, classes}, SoftmaxLayer{classes}};
        net_name = "mlp" + std::to_string(in) + "-" + std::to_string(hidden);
      } else {
        spec.layers = {DenseLayer{in, classes}, SoftmaxLayer{classes}};
        net_name = "linear" + std::to_string(in);
      }
    }
    spec.validate();
    ParamSet params = init_params(spec, derive_seed(seed, "gradcheck-init", t));

    const std::size_t batch = 2 + rng.uniform_int(4);
    Tensor x = Tensor::matrix(batch, spec.input_size());
    for (double& v : x.values) v = rng.normal();

    // random row-stochastic labels with moderate entries, and one-hot labels
    Tensor soft_labels = Tensor::matrix(batch, classes);
    for (std::size_t i = 0; i < batch; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        const double e = std::exp(0.8 * rng.normal());
        soft_labels.at(i, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j < classes; ++j) soft_labels.at(i, j) /= sum;
    }
    std::vector<std::uint32_t> hard(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      hard[i] = static_cast<std::uint32_t>(rng.uniform_int(classes));
    }
    const Tensor onehot = one_hot(hard, classes);
    const Prior prior = Prior::uniform(classes);
    NoiseSpec sym;
    sym.kind = NoiseKind::symmetric;
    sym.rate = 0.3;
    const TransitionMatrix trans = build_transition_matrix(sym, classes);

    const std::vector<std::pair<std::string, LossFn>> losses = {
        {"kl",
         [&](const Tensor& probs) {
           LossEval ev;
           ev.value = kl_classification_loss(soft_labels, probs, &ev.grad);
           return ev;
         }},
        {"cross_entropy",
         [&](const Tensor& probs) {
           LossEval ev;
           ev.value = cross_entropy_loss(onehot, probs, &ev.grad);
           return ev;
         }},
        {"forward_corrected",
         [&](const Tensor& probs) {
           LossEval ev;
           ev.value = forward_corrected_loss(onehot, probs, trans, &ev.grad);
           return ev;
         }},
        {"prior",
         [&](const Tensor& probs) {
           LossEval ev;
           ev.value = prior_loss(probs, prior, &ev.grad);
           return ev;
         }},
        {"entropy",
         [&](const Tensor& probs) {
           LossEval ev;
           ev.value = entropy_loss(probs, &ev.grad);
           return ev;
         }},
        {"total",
         [&](const Tensor& probs) {
           LossEval ev;
           const LossBreakdown lb =
               total_loss(soft_labels, probs, prior, 1.2, 0.8, &ev.grad);
           ev.value = lb.total;
           return ev;
         }},
    };
    const auto& [loss_name, loss_fn] = losses[t % losses.size()];
    const GradCheckReport report = gradient_check(spec, params, loss_fn, x, eps);
    result.trials.push_back({net_name, loss_name, report.max_rel_error});
    result.max_rel_error = std::max(result.max_rel_error, report.max_rel_error);
  }
  return result;
}

}  // namespace jolt
