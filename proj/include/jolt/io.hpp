// File formats. All binary payloads are little-endian:
//
//   label matrix  "JOLTLM01" | u64 n | u64 c | u32 mode | u64 epoch
//                 | n*c f64 row-major
//   dataset       "JOLTDS01" | u64 n | u64 d | u64 c
//                 | u64 n_train | u64 n_val | u64 n_test | u32 flags
//                 | n*d f64 features | [n u32 ground truth] | [n u32 noisy]
//                 (flags bit0 = ground truth present, bit1 = noisy present;
//                  samples ordered train, val, test)
//   checkpoint    "JOLTCK01" | u32 step | u64 completed epochs | u64 entries
//                 | { u32 name_len | name | u64 rank | u64 dims[rank]
//                   | f64 data }*
//
// Metrics are CSV with the fixed header
//   epoch,l_c,l_p,l_e,total,val_acc,test_acc,recovery_acc,labels_changed
// and one row per epoch; optional columns are empty when absent. Summaries
// are "key = value" lines. All doubles are printed with %.10g, so identical
// runs produce byte-identical files.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "jolt/dataset.hpp"
#include "jolt/error.hpp"
#include "jolt/labels.hpp"
#include "jolt/tensor.hpp"
#include "jolt/trainer.hpp"

namespace jolt {

namespace io {

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed");
}

inline void read_bytes(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw IoError("unexpected end of file");
  }
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(out, b, 8);
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  read_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  read_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void expect_magic(std::istream& in, const char* magic,
                         const std::string& what) {
  char buf[8];
  read_bytes(in, buf, 8);
  if (std::memcmp(buf, magic, 8) != 0) {
    throw IoError(what + ": bad magic, not a " + what + " file");
  }
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

/// Fixed double formatting shared by all text outputs.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace io

// ---------------------------------------------------------------------------
// label matrix files

struct LabelMatrixFile {
  Tensor matrix;
  LabelMode mode = LabelMode::soft;
  std::uint64_t epoch = 0;
};

inline void write_label_matrix(const std::filesystem::path& path, const Tensor& m,
                               LabelMode mode, std::uint64_t epoch) {
  std::ofstream out = io::open_out(path);
  io::write_bytes(out, "JOLTLM01", 8);
  io::write_u64(out, m.rows());
  io::write_u64(out, m.cols());
  io::write_u32(out, mode == LabelMode::hard ? 0u : 1u);
  io::write_u64(out, epoch);
  for (double v : m.values) io::write_f64(out, v);
}

inline LabelMatrixFile read_label_matrix(const std::filesystem::path& path) {
  std::ifstream in = io::open_in(path);
  io::expect_magic(in, "JOLTLM01", "label matrix");
  LabelMatrixFile f;
  const std::uint64_t n = io::read_u64(in);
  const std::uint64_t c = io::read_u64(in);
  f.mode = io::read_u32(in) == 0 ? LabelMode::hard : LabelMode::soft;
  f.epoch = io::read_u64(in);
  f.matrix = Tensor::matrix(n, c);
  for (double& v : f.matrix.values) v = io::read_f64(in);
  return f;
}

// ---------------------------------------------------------------------------
// dataset files

inline void write_dataset(const std::filesystem::path& path, const LabeledDataset& ds) {
  ds.validate();
  std::ofstream out = io::open_out(path);
  io::write_bytes(out, "JOLTDS01", 8);
  io::write_u64(out, ds.size());
  io::write_u64(out, ds.dim);
  io::write_u64(out, ds.classes);
  io::write_u64(out, ds.n_train);
  io::write_u64(out, ds.n_val);
  io::write_u64(out, ds.n_test);
  std::uint32_t flags = 0;
  if (ds.has_ground_truth()) flags |= 1u;
  if (ds.has_noisy()) flags |= 2u;
  io::write_u32(out, flags);
  for (double v : ds.features) io::write_f64(out, v);
  if (ds.has_ground_truth()) {
    for (std::uint32_t v : ds.ground_truth) io::write_u32(out, v);
  }
  if (ds.has_noisy()) {
    for (std::uint32_t v : ds.noisy) io::write_u32(out, v);
  }
}

inline LabeledDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in = io::open_in(path);
  io::expect_magic(in, "JOLTDS01", "dataset");
  LabeledDataset ds;
  const std::uint64_t n = io::read_u64(in);
  ds.dim = io::read_u64(in);
  ds.classes = io::read_u64(in);
  ds.n_train = io::read_u64(in);
  ds.n_val = io::read_u64(in);
  ds.n_test = io::read_u64(in);
  if (ds.n_train + ds.n_val + ds.n_test != n) {
    throw IoError("dataset: split counts do not sum to n");
  }
  const std::uint32_t flags = io::read_u32(in);
  ds.features.resize(n * ds.dim);
  for (double& v : ds.features) v = io::read_f64(in);
  if (flags & 1u) {
    ds.ground_truth.resize(n);
    for (std::uint32_t& v : ds.ground_truth) v = io::read_u32(in);
  }
  if (flags & 2u) {
    ds.noisy.resize(n);
    for (std::uint32_t& v : ds.noisy) v = io::read_u32(in);
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// checkpoints

struct Checkpoint {
  std::uint32_t step = 1;           // 1 = joint, 2 = final
  std::uint64_t completed_epochs = 0;
  std::map<std::string, Tensor> entries;  // matrices keyed by role
};

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out = io::open_out(tmp);
    io::write_bytes(out, "JOLTCK01", 8);
    io::write_u32(out, ck.step);
    io::write_u64(out, ck.completed_epochs);
    io::write_u64(out, ck.entries.size());
    for (const auto& [name, t] : ck.entries) {
      io::write_u32(out, static_cast<std::uint32_t>(name.size()));
      io::write_bytes(out, name.data(), name.size());
      io::write_u64(out, t.shape.size());
      for (std::size_t d : t.shape) io::write_u64(out, d);
      for (double v : t.values) io::write_f64(out, v);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in = io::open_in(path);
  io::expect_magic(in, "JOLTCK01", "checkpoint");
  Checkpoint ck;
  ck.step = io::read_u32(in);
  ck.completed_epochs = io::read_u64(in);
  const std::uint64_t count = io::read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t len = io::read_u32(in);
    std::string name(len, '\0');
    io::read_bytes(in, name.data(), len);
    const std::uint64_t rank = io::read_u64(in);
    std::vector<std::size_t> dims(rank);
    for (std::uint64_t d = 0; d < rank; ++d) dims[d] = io::read_u64(in);
    Tensor t = Tensor::zeros(dims);
    for (double& v : t.values) v = io::read_f64(in);
    ck.entries.emplace(std::move(name), std::move(t));
  }
  return ck;
}

// ---------------------------------------------------------------------------
// metrics CSV

inline constexpr const char* kMetricsHeader =
    "epoch,l_c,l_p,l_e,total,val_acc,test_acc,recovery_acc,labels_changed";

inline std::string metrics_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.epoch);
  row += "," + io::fmt_double(r.train.l_c);
  row += "," + io::fmt_double(r.train.l_p);
  row += "," + io::fmt_double(r.train.l_e);
  row += "," + io::fmt_double(r.train.total);
  row += ",";
  if (r.val_acc) row += io::fmt_double(*r.val_acc);
  row += ",";
  if (r.test_acc) row += io::fmt_double(*r.test_acc);
  row += ",";
  if (r.recovery_acc) row += io::fmt_double(*r.recovery_acc);
  row += "," + std::to_string(r.labels_changed);
  return row;
}

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << kMetricsHeader << "\n";
  for (const MetricsRecord& r : records) out << metrics_row(r) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline void append_metrics_row(const std::filesystem::path& path,
                               const MetricsRecord& r) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path.string() + " for appending");
  if (fresh) out << kMetricsHeader << "\n";
  out << metrics_row(r) << "\n";
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

/// Keeps the header plus the first `epochs` data rows; used when resuming
/// from a checkpoint older than the metrics file.
inline void truncate_metrics_csv(const std::filesystem::path& path, std::size_t epochs) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line) && keep.size() < epochs + 1) keep.push_back(line);
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const std::string& l : keep) out << l << "\n";
}

inline std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty metrics file " + path.string());
  if (line != kMetricsHeader) throw IoError("unexpected metrics header in " + path.string());
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    while (fields.size() < 9) fields.emplace_back();  // trailing empties
    if (fields.size() != 9) throw IoError("bad metrics row: " + line);
    MetricsRecord r;
    r.epoch = std::stoul(fields[0]);
    r.train.l_c = std::stod(fields[1]);
    r.train.l_p = std::stod(fields[2]);
    r.train.l_e = std::stod(fields[3]);
    r.train.total = std::stod(fields[4]);
    if (!fields[5].empty()) r.val_acc = std::stod(fields[5]);
    if (!fields[6].empty()) r.test_acc = std::stod(fields[6]);
    if (!fields[7].empty()) r.recovery_acc = std::stod(fields[7]);
    r.labels_changed = std::stoul(fields[8]);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// key = value summaries

inline void write_kv(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string k = line.substr(0, eq);
    std::string v = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.pop_back();
      }
    };
    trim(k);
    trim(v);
    out[k] = v;
  }
  return out;
}

}  // namespace jolt
