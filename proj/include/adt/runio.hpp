// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adt/config.hpp"
#include "adt/metrics.hpp"
#include "adt/tensor.hpp"

#include <json.hpp>

namespace adt {

// Metrics stream: CSV rows `step,name,value` (f64 printed with %.17g so a
// rerun is byte-identical).
inline std::string metrics_csv(const MetricsReport& rep) {
  std::ostringstream os;
  os << "step,name,value\n";
  for (const MetricEntry& e : rep.entries)
    os << e.step << ',' << e.name << ',' << fmt_f64(e.value) << '\n';
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("short write: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Sample dump: plain numeric text, one sample per row, space-separated.
inline std::string samples_text(const Tensor& samples) {
  std::ostringstream os;
  for (long i = 0; i < samples.rows(); ++i) {
    for (long j = 0; j < samples.cols(); ++j) {
      if (j) os << ' ';
      os << fmt_f64(samples.at(i, j));
    }
    os << '\n';
  }
  return os.str();
}

inline Tensor parse_samples_text(const std::string& text, const std::string& origin) {
  std::vector<double> values;
  long cols = -1;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.empty()) continue;
    if (cols == -1) cols = static_cast<long>(row.size());
    if (static_cast<long>(row.size()) != cols)
      throw IoError(origin + ": ragged row at line " + std::to_string(lineno));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (cols <= 0 || values.empty()) throw IoError(origin + ": no samples found");
  const long rows = static_cast<long>(values.size()) / cols;
  return Tensor({rows, cols}, std::move(values));
}

inline Tensor load_samples(const std::string& path) {
  return parse_samples_text(read_text_file(path), path);
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Run manifest: config hash, seed, artifact version.
inline std::string run_manifest_json(const RunConfig& cfg, const std::string& command) {
  nlohmann::json j;
  j["artifact_version"] = kVersion;
  j["command"] = command;
  j["config_hash"] = hash_hex(cfg.hash());
  j["seed"] = cfg.train.seed;
  return j.dump(2) + "\n";
}

}  // namespace adt
