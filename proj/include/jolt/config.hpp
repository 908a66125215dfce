// Flat plain-text configuration with dotted keys ("joint.alpha = 1.2"),
// built-in experiment presets, and the typed ExperimentConfig they resolve
// into. Writing is canonical (sorted keys), so parse(write(x)) == x.
#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "jolt/dataset.hpp"
#include "jolt/error.hpp"
#include "jolt/io.hpp"
#include "jolt/labels.hpp"
#include "jolt/noise.hpp"
#include "jolt/optimizer.hpp"
#include "jolt/trainer.hpp"

namespace jolt {

class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_text(const std::string& text) {
    KvConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string& s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
          s.erase(s.begin());
        }
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
          s.pop_back();
        }
      };
      trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected 'key = value', got '" + line + "'");
      }
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      trim(key);
      trim(value);
      if (key.empty()) {
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      }
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KvConfig parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Overlays `other` on top of this config (other wins).
  void merge_from(const KvConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  std::string get_str(const std::string& key, const std::string& fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_str(const std::string& key) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const std::string s = get_str(key, "");
    if (s.empty()) return fallback;
    return parse_double(key, s);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const std::string s = get_str(key, "");
    if (s.empty()) return fallback;
    return parse_u64(key, s);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const std::string s = get_str(key, "");
    if (s.empty()) return fallback;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + s + "'");
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get_str(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
  }

  /// Canonical text form: sorted keys, one per line.
  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  void write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write config file " + path.string());
    out << to_text();
  }

  bool operator==(const KvConfig& other) const { return values_ == other.values_; }

  /// Keys that were never read by any getter; used to reject typos.
  std::vector<std::string> unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!consumed_.count(k)) out.push_back(k);
    }
    return out;
  }

  void require_all_consumed() const {
    const std::vector<std::string> left = unconsumed();
    if (left.empty()) return;
    std::string msg = "unknown config key(s):";
    for (const std::string& k : left) msg += " " + k;
    throw ConfigError(msg);
  }

 private:
  static double parse_double(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
    }
  }

  static std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected an integer, got '" + s +
                        "'");
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

/// Built-in experiment presets. A preset supplies default key/value pairs;
/// explicit config-file keys and command-line overrides win over it.
inline KvConfig config_preset(const std::string& name) {
  auto mk = [](std::initializer_list<std::pair<const char*, const char*>> items) {
    KvConfig cfg;
    for (const auto& [k, v] : items) cfg.set(k, v);
    return cfg;
  };
  // common desk-scale blob setup used by the sn/an presets
  auto cifar_like = [&mk](const char* rate, const char* alpha, const char* beta,
                          const char* lr, const char* kind) {
    KvConfig cfg = mk({{"dataset.kind", "blobs"},
                       {"blobs.train_per_class", "100"},
                       {"blobs.test_per_class", "20"},
                       {"blobs.classes", "10"},
                       {"blobs.dim", "8"},
                       {"blobs.separation", "5"},
                       {"network.preset", "mlp:8-64-64-10"},
                       {"joint.mode", "soft"},
                       {"joint.epochs", "200"},
                       {"joint.t1", "70"},
                       {"joint.t2", "200"},
                       {"joint.window", "10"},
                       {"joint.prior", "uniform"},
                       {"opt1.momentum", "0.9"},
                       {"opt1.weight_decay", "1e-4"},
                       {"opt1.batch_size", "128"},
                       {"final.epochs", "120"},
                       {"opt2.lr", "0:0.2,40:0.02,80:0.002"},
                       {"opt2.momentum", "0.9"},
                       {"opt2.weight_decay", "1e-4"},
                       {"opt2.batch_size", "128"}});
    cfg.set("noise.kind", kind);
    cfg.set("noise.rate", rate);
    cfg.set("joint.alpha", alpha);
    cfg.set("joint.beta", beta);
    cfg.set("opt1.lr", lr);
    return cfg;
  };

  if (name == "blobs-sn40") {
    // three separable 2-D blobs under 40% symmetric noise
    return mk({{"dataset.kind", "blobs"},
               {"blobs.train_per_class", "300"},
               {"blobs.test_per_class", "100"},
               {"blobs.classes", "3"},
               {"blobs.dim", "2"},
               {"blobs.separation", "4"},
               {"noise.kind", "symmetric"},
               {"noise.rate", "0.4"},
               {"network.preset", "mlp:2-32-32-3"},
               {"joint.alpha", "1.2"},
               {"joint.beta", "0.8"},
               {"joint.mode", "soft"},
               {"joint.epochs", "200"},
               {"joint.t1", "30"},
               {"joint.t2", "200"},
               {"joint.window", "10"},
               {"joint.prior", "uniform"},
               {"opt1.lr", "0.1"},
               {"opt1.momentum", "0.9"},
               {"opt1.weight_decay", "1e-4"},
               {"opt1.batch_size", "128"},
               {"final.epochs", "100"},
               {"opt2.lr", "0:0.2,40:0.02,80:0.002"},
               {"opt2.momentum", "0.9"},
               {"opt2.weight_decay", "1e-4"},
               {"opt2.batch_size", "128"}});
  }
  // symmetric-noise presets carrying the published per-rate hyperparameters
  if (name == "sn-cifar-0") return cifar_like("0.0", "1.2", "0.8", "0.01", "symmetric");
  if (name == "sn-cifar-10") return cifar_like("0.1", "1.2", "0.8", "0.02", "symmetric");
  if (name == "sn-cifar-30") return cifar_like("0.3", "1.2", "0.8", "0.03", "symmetric");
  if (name == "sn-cifar-50") return cifar_like("0.5", "1.2", "0.8", "0.04", "symmetric");
  if (name == "sn-cifar-70") return cifar_like("0.7", "1.2", "0.8", "0.08", "symmetric");
  if (name == "sn-cifar-90") return cifar_like("0.9", "0.8", "0.4", "0.12", "symmetric");
  if (name == "an-cifar") {
    KvConfig cfg = cifar_like("0.4", "0.8", "0.4", "0.03", "asymmetric");
    cfg.set("noise.preset", "cifar10-asym");
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

/// Every knob of a two-step experiment, resolved and validated.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 1;

  std::string dataset_kind = "blobs";  // blobs | file
  std::filesystem::path dataset_path;
  BlobsConfig blobs;

  NoiseSpec noise;
  std::size_t kmeans_k = 0;  // pseudo noise: 0 = class count
  std::size_t kmeans_iters = 100;

  std::string network_preset = "mlp:2-32-32-3";

  JointRunConfig joint;
  std::string prior_kind = "uniform";  // uniform | empirical
  OptimizerConfig opt1;

  std::size_t final_epochs = 100;
  OptimizerConfig opt2;

  static ExperimentConfig from_kv(const KvConfig& kv) {
    ExperimentConfig ec;
    ec.seed = kv.get_u64("run.seed", 1);
    ec.checkpoint_every =
        static_cast<std::size_t>(kv.get_u64("run.checkpoint_every", 1));
    if (ec.checkpoint_every == 0) {
      throw ConfigError("run.checkpoint_every must be positive");
    }

    ec.dataset_kind = kv.get_str("dataset.kind", "blobs");
    if (ec.dataset_kind == "file") {
      ec.dataset_path = kv.require_str("dataset.path");
    } else if (ec.dataset_kind == "blobs") {
      ec.blobs.train_per_class =
          static_cast<std::size_t>(kv.get_u64("blobs.train_per_class", 300));
      ec.blobs.test_per_class =
          static_cast<std::size_t>(kv.get_u64("blobs.test_per_class", 100));
      ec.blobs.classes = static_cast<std::size_t>(kv.get_u64("blobs.classes", 3));
      ec.blobs.dim = static_cast<std::size_t>(kv.get_u64("blobs.dim", 2));
      ec.blobs.separation = kv.get_double("blobs.separation", 4.0);
      ec.blobs.seed = ec.seed;
    } else {
      throw ConfigError("dataset.kind must be 'blobs' or 'file'");
    }

    const std::string noise_kind = kv.get_str("noise.kind", "none");
    if (noise_kind == "none") {
      ec.noise.kind = NoiseKind::none;
    } else if (noise_kind == "symmetric") {
      ec.noise.kind = NoiseKind::symmetric;
    } else if (noise_kind == "asymmetric") {
      ec.noise.kind = NoiseKind::asymmetric;
    } else if (noise_kind == "pseudo") {
      ec.noise.kind = NoiseKind::pseudo;
    } else {
      throw ConfigError("noise.kind must be none|symmetric|asymmetric|pseudo");
    }
    ec.noise.rate = kv.get_double("noise.rate", 0.0);
    ec.noise.seed = ec.seed;
    if (ec.noise.kind == NoiseKind::asymmetric) {
      if (kv.has("noise.preset")) {
        ec.noise.pair_map = pair_map_preset(kv.get_str("noise.preset", ""));
      } else {
        ec.noise.pair_map = parse_pairs(kv.require_str("noise.pairs"));
      }
    }
    ec.kmeans_k = static_cast<std::size_t>(kv.get_u64("noise.kmeans_k", 0));
    ec.kmeans_iters = static_cast<std::size_t>(kv.get_u64("noise.kmeans_iters", 100));

    ec.network_preset = kv.get_str("network.preset", "mlp:2-32-32-3");

    ec.joint.alpha = kv.get_double("joint.alpha", 1.2);
    ec.joint.beta = kv.get_double("joint.beta", 0.8);
    ec.joint.mode = parse_label_mode(kv.get_str("joint.mode", "soft"));
    ec.joint.num_epochs = static_cast<std::size_t>(kv.get_u64("joint.epochs", 200));
    ec.joint.seed = ec.seed;
    ec.joint.schedule.t1 = static_cast<std::size_t>(kv.get_u64("joint.t1", 30));
    ec.joint.schedule.t2 =
        static_cast<std::size_t>(kv.get_u64("joint.t2", ec.joint.num_epochs));
    const std::string topk = kv.get_str("joint.topk", "all");
    ec.joint.schedule.topk =
        topk == "all" ? 0 : static_cast<std::size_t>(kv.get_u64("joint.topk", 0));
    const std::string window = kv.get_str("joint.window", "10");
    ec.joint.averaging_window =
        window == "all" ? 0 : static_cast<std::size_t>(kv.get_u64("joint.window", 10));
    ec.prior_kind = kv.get_str("joint.prior", "uniform");
    if (ec.prior_kind != "uniform" && ec.prior_kind != "empirical") {
      throw ConfigError("joint.prior must be 'uniform' or 'empirical'");
    }

    ec.opt1.lr = LrSchedule::parse(kv.get_str("opt1.lr", "0.1"));
    ec.opt1.momentum = kv.get_double("opt1.momentum", 0.9);
    ec.opt1.weight_decay = kv.get_double("opt1.weight_decay", 1e-4);
    ec.opt1.batch_size = static_cast<std::size_t>(kv.get_u64("opt1.batch_size", 128));

    ec.final_epochs = static_cast<std::size_t>(kv.get_u64("final.epochs", 100));
    ec.opt2.lr = LrSchedule::parse(kv.get_str("opt2.lr", "0:0.2,40:0.02,80:0.002"));
    ec.opt2.momentum = kv.get_double("opt2.momentum", 0.9);
    ec.opt2.weight_decay = kv.get_double("opt2.weight_decay", 1e-4);
    ec.opt2.batch_size = static_cast<std::size_t>(kv.get_u64("opt2.batch_size", 128));

    ec.joint.validate();
    ec.opt1.validate();
    ec.opt2.validate();
    return ec;
  }

  static PairMap parse_pairs(const std::string& text) {
    PairMap pm;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw ConfigError("noise.pairs entry '" + item + "': expected src:dst");
      }
      try {
        pm.emplace_back(static_cast<std::uint32_t>(std::stoul(item.substr(0, colon))),
                        static_cast<std::uint32_t>(std::stoul(item.substr(colon + 1))));
      } catch (const std::exception&) {
        throw ConfigError("noise.pairs entry '" + item + "': bad class index");
      }
    }
    return pm;
  }

  static std::string pairs_to_string(const PairMap& pm) {
    std::string out;
    for (const auto& [s, d] : pm) {
      if (!out.empty()) out += ",";
      out += std::to_string(s) + ":" + std::to_string(d);
    }
    return out;
  }

  /// Canonical resolved key set; from_kv(parse(to_kv())) reproduces this
  /// config exactly.
  KvConfig to_kv() const {
    KvConfig kv;
    kv.set("run.seed", std::to_string(seed));
    kv.set("run.checkpoint_every", std::to_string(checkpoint_every));
    kv.set("dataset.kind", dataset_kind);
    if (dataset_kind == "file") {
      kv.set("dataset.path", dataset_path.string());
    } else {
      kv.set("blobs.train_per_class", std::to_string(blobs.train_per_class));
      kv.set("blobs.test_per_class", std::to_string(blobs.test_per_class));
      kv.set("blobs.classes", std::to_string(blobs.classes));
      kv.set("blobs.dim", std::to_string(blobs.dim));
      kv.set("blobs.separation", io::fmt_double(blobs.separation));
    }
    switch (noise.kind) {
      case NoiseKind::none: kv.set("noise.kind", "none"); break;
      case NoiseKind::symmetric: kv.set("noise.kind", "symmetric"); break;
      case NoiseKind::asymmetric:
        kv.set("noise.kind", "asymmetric");
        kv.set("noise.pairs", pairs_to_string(noise.pair_map));
        break;
      case NoiseKind::pseudo: kv.set("noise.kind", "pseudo"); break;
    }
    kv.set("noise.rate", io::fmt_double(noise.rate));
    if (noise.kind == NoiseKind::pseudo) {
      kv.set("noise.kmeans_k", std::to_string(kmeans_k));
      kv.set("noise.kmeans_iters", std::to_string(kmeans_iters));
    }
    kv.set("network.preset", network_preset);
    kv.set("joint.alpha", io::fmt_double(joint.alpha));
    kv.set("joint.beta", io::fmt_double(joint.beta));
    kv.set("joint.mode", label_mode_name(joint.mode));
    kv.set("joint.epochs", std::to_string(joint.num_epochs));
    kv.set("joint.t1", std::to_string(joint.schedule.t1));
    kv.set("joint.t2", std::to_string(joint.schedule.t2));
    kv.set("joint.topk",
           joint.schedule.topk == 0 ? "all" : std::to_string(joint.schedule.topk));
    kv.set("joint.window", joint.averaging_window == 0
                               ? "all"
                               : std::to_string(joint.averaging_window));
    kv.set("joint.prior", prior_kind);
    kv.set("opt1.lr", opt1.lr.to_string());
    kv.set("opt1.momentum", io::fmt_double(opt1.momentum));
    kv.set("opt1.weight_decay", io::fmt_double(opt1.weight_decay));
    kv.set("opt1.batch_size", std::to_string(opt1.batch_size));
    kv.set("final.epochs", std::to_string(final_epochs));
    kv.set("opt2.lr", opt2.lr.to_string());
    kv.set("opt2.momentum", io::fmt_double(opt2.momentum));
    kv.set("opt2.weight_decay", io::fmt_double(opt2.weight_decay));
    kv.set("opt2.batch_size", std::to_string(opt2.batch_size));
    return kv;
  }
};

}  // namespace jolt
