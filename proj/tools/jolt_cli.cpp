// jolt command-line tool: inject | run | sweep | plotdata | probe | gradcheck
//
// Exit codes: 0 ok, 1 usage error, 2 config error, 3 I/O error,
// 4 numerical divergence.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jolt/jolt.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_out = true) {
  cmd->add_option("--config", opts.config_path, "configuration file (key = value lines)");
  cmd->add_option("--preset", opts.preset, "built-in experiment preset name");
  if (needs_out) cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "root random seed (overrides config)");
  cmd->add_option("--set", opts.overrides, "extra key=value overrides")
      ->type_name("KEY=VALUE");
}

jolt::KvConfig assemble_kv(const CommonOpts& opts) {
  jolt::KvConfig kv;
  std::string preset = opts.preset;
  jolt::KvConfig file_kv;
  if (!opts.config_path.empty()) {
    file_kv = jolt::KvConfig::parse_file(opts.config_path);
    if (preset.empty()) preset = file_kv.get_str("preset", "");
  }
  if (!preset.empty()) kv = jolt::config_preset(preset);
  kv.merge_from(file_kv);
  if (opts.seed) kv.set("run.seed", std::to_string(*opts.seed));
  for (const std::string& kvpair : opts.overrides) {
    const auto eq = kvpair.find('=');
    if (eq == std::string::npos) {
      throw jolt::UsageError("--set expects KEY=VALUE, got '" + kvpair + "'");
    }
    kv.set(kvpair.substr(0, eq), kvpair.substr(eq + 1));
  }
  return kv;
}

jolt::ExperimentConfig experiment_from(const CommonOpts& opts, jolt::KvConfig& kv) {
  kv = assemble_kv(opts);
  (void)kv.get_str("preset", "");  // consumed above when present
  return jolt::ExperimentConfig::from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisy-label training toolkit: joint optimization of classifier "
               "parameters and training labels"};
  app.require_subcommand(1);

  CommonOpts inject_opts, run_opts, sweep_opts, probe_opts;
  std::string plotdata_dir;
  bool run_resume = false;
  std::optional<std::size_t> run_stop_after;
  std::size_t sweep_jobs = 1;
  std::string sweep_axis;
  std::string sweep_values;
  std::size_t gradcheck_trials = 20;
  std::uint64_t gradcheck_seed = 1;

  CLI::App* inject = app.add_subcommand("inject", "build a dataset and corrupt its labels");
  add_common(inject, inject_opts);

  CLI::App* run = app.add_subcommand("run", "two-step training: label recovery, then retrain");
  add_common(run, run_opts);
  run->add_flag("--resume", run_resume, "continue from the last checkpoint in --out");
  run->add_option("--stop-after", run_stop_after,
                  "stop after N completed epochs, leaving a resumable directory");

  CLI::App* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", sweep_axis,
                    "alpha|beta|learning_rate|t1|t2|noise_rate")->required();
  sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
  sweep->add_option("--jobs", sweep_jobs, "parallel sweep cells");

  CLI::App* plotdata = app.add_subcommand("plotdata", "export per-epoch curve files from a run");
  plotdata->add_option("run_dir", plotdata_dir, "run directory")->required();

  CLI::App* probe = app.add_subcommand(
      "probe", "cross-entropy memorization grid over learning and noise rates");
  add_common(probe, probe_opts);

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference gradient checks over layers and losses");
  gradcheck->add_option("--trials", gradcheck_trials, "number of random configurations");
  gradcheck->add_option("--seed", gradcheck_seed, "seed for the random configurations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (inject->parsed()) {
      jolt::KvConfig kv;
      const jolt::ExperimentConfig ec = experiment_from(inject_opts, kv);
      kv.require_all_consumed();
      const jolt::DatasetBundle bundle = jolt::cmd_inject(ec, inject_opts.out);
      std::printf("dataset: %zu train / %zu val / %zu test, %zu classes\n",
                  bundle.dataset.n_train, bundle.dataset.n_val, bundle.dataset.n_test,
                  bundle.dataset.classes);
      std::printf("corrupted: %zu of %zu train labels (%.4f)\n", bundle.corrupted,
                  bundle.dataset.n_train,
                  bundle.dataset.n_train
                      ? static_cast<double>(bundle.corrupted) /
                            static_cast<double>(bundle.dataset.n_train)
                      : 0.0);
      std::printf("wrote %s\n", (std::filesystem::path(inject_opts.out) / "dataset.bin")
                                    .string().c_str());
    } else if (run->parsed()) {
      jolt::KvConfig kv;
      const jolt::ExperimentConfig ec = experiment_from(run_opts, kv);
      kv.require_all_consumed();
      const jolt::RunOutcome outcome =
          jolt::cmd_run(ec, run_opts.out, run_resume, run_stop_after);
      if (outcome.stopped_early) {
        std::printf("stopped early; resume with: jolt run --resume --out %s\n",
                    run_opts.out.c_str());
      } else {
        for (const auto& [k, v] : outcome.summary) {
          std::printf("%s = %s\n", k.c_str(), v.c_str());
        }
      }
    } else if (sweep->parsed()) {
      jolt::SweepSpec spec;
      spec.axis = sweep_axis;
      spec.base = assemble_kv(sweep_opts);
      {
        std::stringstream ss(sweep_values);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) spec.values.push_back(std::stod(item));
        }
      }
      const jolt::SweepResult result = jolt::cmd_sweep(spec, sweep_opts.out, sweep_jobs);
      std::printf("value,val_accuracy,status\n");
      for (const jolt::SweepRow& r : result.rows) {
        std::printf("%s,%s,%s\n", jolt::io::fmt_double(r.value).c_str(),
                    r.val_acc ? jolt::io::fmt_double(*r.val_acc).c_str() : "",
                    r.status.c_str());
      }
      if (result.best_value) {
        std::printf("best value: %s\n", jolt::io::fmt_double(*result.best_value).c_str());
      }
    } else if (plotdata->parsed()) {
      const std::vector<std::filesystem::path> files = jolt::cmd_plotdata(plotdata_dir);
      for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
    } else if (probe->parsed()) {
      jolt::KvConfig kv = assemble_kv(probe_opts);
      jolt::ProbeConfig pc;
      if (kv.has("probe.lrs")) pc.lrs = kv.get_double_list("probe.lrs");
      if (kv.has("probe.rates")) pc.rates = kv.get_double_list("probe.rates");
      pc.epochs = static_cast<std::size_t>(kv.get_u64("probe.epochs", pc.epochs));
      const jolt::ExperimentConfig ec = jolt::ExperimentConfig::from_kv(kv);
      kv.require_all_consumed();
      const std::vector<jolt::ProbeCell> cells = jolt::cmd_probe(ec, pc, probe_opts.out);
      std::printf("lr,noise_rate,final_train_loss,final_test_acc,best_test_acc\n");
      for (const jolt::ProbeCell& c : cells) {
        std::printf("%g,%g,%s,%s,%s\n", c.lr, c.noise_rate,
                    jolt::io::fmt_double(c.final_train_loss).c_str(),
                    c.final_test_acc ? jolt::io::fmt_double(*c.final_test_acc).c_str() : "",
                    c.best_test_acc ? jolt::io::fmt_double(*c.best_test_acc).c_str() : "");
      }
    } else if (gradcheck->parsed()) {
      const jolt::GradCheckSuiteResult result =
          jolt::run_gradcheck_suite(gradcheck_trials, gradcheck_seed);
      std::printf("network,loss,max_rel_error\n");
      for (const jolt::GradCheckTrial& t : result.trials) {
        std::printf("%s,%s,%s\n", t.network.c_str(), t.loss.c_str(),
                    jolt::io::fmt_double(t.rel_error).c_str());
      }
      std::printf("max relative error: %s\n",
                  jolt::io::fmt_double(result.max_rel_error).c_str());
      if (result.max_rel_error > 1e-4) {
        std::fprintf(stderr, "gradient check FAILED (threshold 1e-4)\n");
        return static_cast<int>(jolt::ExitCode::numeric);
      }
    }
  } catch (const jolt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return static_cast<int>(jolt::ExitCode::config);
  } catch (const jolt::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return static_cast<int>(jolt::ExitCode::io);
  } catch (const jolt::NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return static_cast<int>(jolt::ExitCode::numeric);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(jolt::ExitCode::usage);
  }
  return 0;
}
