// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adt/consistency.hpp"
#include "adt/data.hpp"
#include "adt/dpm_train.hpp"
#include "adt/samplers.hpp"

namespace adt {

inline std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Full run configuration. One INI-style text file, strict: unknown sections
// or keys are errors with line diagnostics, and every run writes back the
// fully-resolved config (all defaults included).
struct RunConfig {
  // [schedule]
  std::string schedule_kind = "cosine";
  long T = 100;
  // [model]
  long hidden = 128;
  long depth = 3;
  long time_embed = 16;
  double sigma_data = 1.0;
  double s_max = 1.0;
  // [train]
  TrainConfig train;
  // [at]
  bool at_enabled = false;
  ATConfig at;
  // [cd]
  std::string cd_solver = "ddim";
  std::string cd_metric = "l2";
  std::string cd_perturb = "target";
  std::string cd_teacher;
  // [sampler]
  std::string sampler_kind = "ancestral";
  long nfe = 0;  // 0 resolves to T
  long solver_order = 1;
  double es_lambda = 0.99;
  std::string es_lambda_file;
  long cm_steps = 1;
  bool use_ema = false;
  std::uint64_t sampler_seed = 0;
  std::optional<double> clip_x0;
  // [data]
  std::string data_kind = "gaussian_1d(0,1)";
  long data_n = 10000;
  std::uint64_t data_seed = 1;
  // [io]
  std::string out_dir = "run";
  long eval_every = 500;
  long checkpoint_every = 0;
  long eval_samples = 0;
  long eval_n_proj = 64;
  std::uint64_t eval_seed = 1234;

  void validate() const {
    schedule_kind_from(schedule_kind);
    if (T < 1) throw ConfigError("schedule.T must be >= 1");
    if (hidden < 1 || depth < 1 || time_embed < 2 || time_embed % 2 != 0)
      throw ConfigError("model dimensions invalid (time_embed must be even and >= 2)");
    train.validate();
    if (at_enabled) at.validate();
    ode_solver_from(cd_solver);
    cd_metric_from(cd_metric);
    perturb_branch_from(cd_perturb);
    sampler_kind_from(sampler_kind);
    if (nfe < 0 || nfe > T) throw ConfigError("sampler.nfe must be in 0..T");
    if (solver_order != 1 && solver_order != 2) throw ConfigError("sampler.order must be 1 or 2");
    if (cm_steps < 1) throw ConfigError("sampler.steps must be >= 1");
    if (clip_x0 && !(*clip_x0 > 0.0)) throw ConfigError("sampler.clip_x0 must be positive");
    DatasetSpec::parse(data_kind);
    if (data_n < 1) throw ConfigError("data.n must be >= 1");
    if (eval_every < 0 || checkpoint_every < 0 || eval_samples < 0 || eval_n_proj < 1)
      throw ConfigError("io section values out of range");
  }

  long resolved_nfe() const { return nfe == 0 ? T : nfe; }

  std::string serialize() const {
    std::ostringstream os;
    os << "[schedule]\n";
    os << "kind = " << schedule_kind << "\n";
    os << "T = " << T << "\n";
    os << "\n[model]\n";
    os << "hidden = " << hidden << "\n";
    os << "depth = " << depth << "\n";
    os << "time_embed = " << time_embed << "\n";
    os << "sigma_data = " << fmt_f64(sigma_data) << "\n";
    os << "s_max = " << fmt_f64(s_max) << "\n";
    os << "\n[train]\n";
    os << "lr = " << fmt_f64(train.lr) << "\n";
    os << "batch_size = " << train.batch_size << "\n";
    os << "iterations = " << train.iterations << "\n";
    os << "seed = " << train.seed << "\n";
    os << "lambda = " << fmt_f64(train.loss_weight) << "\n";
    os << "optimizer = " << to_string(train.optimizer) << "\n";
    os << "ema_mu = " << fmt_f64(train.ema_mu) << "\n";
    os << "per_example_t = " << (train.per_example_t ? "true" : "false") << "\n";
    os << "\n[at]\n";
    os << "enabled = " << (at_enabled ? "true" : "false") << "\n";
    os << "K = " << at.K << "\n";
    os << "alpha = " << fmt_f64(at.adv_lr) << "\n";
    os << "norm = " << at.norm << "\n";
    os << "delta_reset = " << at.delta_reset << "\n";
    os << "eta = " << (at.radius_eta ? fmt_f64(*at.radius_eta) : std::string("none")) << "\n";
    os << "\n[cd]\n";
    os << "solver = " << cd_solver << "\n";
    os << "metric = " << cd_metric << "\n";
    os << "perturb = " << cd_perturb << "\n";
    os << "teacher = " << cd_teacher << "\n";
    os << "\n[sampler]\n";
    os << "kind = " << sampler_kind << "\n";
    os << "nfe = " << nfe << "\n";
    os << "order = " << solver_order << "\n";
    os << "es_lambda = " << fmt_f64(es_lambda) << "\n";
    os << "es_lambda_file = " << es_lambda_file << "\n";
    os << "steps = " << cm_steps << "\n";
    os << "use_ema = " << (use_ema ? "true" : "false") << "\n";
    os << "seed = " << sampler_seed << "\n";
    os << "clip_x0 = " << (clip_x0 ? fmt_f64(*clip_x0) : std::string("none")) << "\n";
    os << "\n[data]\n";
    os << "kind = " << data_kind << "\n";
    os << "n = " << data_n << "\n";
    os << "seed = " << data_seed << "\n";
    os << "\n[io]\n";
    os << "out_dir = " << out_dir << "\n";
    os << "eval_every = " << eval_every << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\n";
    os << "eval_samples = " << eval_samples << "\n";
    os << "eval_n_proj = " << eval_n_proj << "\n";
    os << "eval_seed = " << eval_seed << "\n";
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a64(serialize()); }

  static RunConfig parse(const std::string& text);
  static RunConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline long to_long(const std::string& v, const std::string& key, long line) {
  try {
    size_t pos = 0;
    const long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": bad integer for '" + key + "': " + v);
  }
}

inline std::uint64_t to_u64(const std::string& v, const std::string& key, long line) {
  try {
    size_t pos = 0;
    const unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": bad integer for '" + key + "': " + v);
  }
}

inline double to_f64(const std::string& v, const std::string& key, long line) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": bad float for '" + key + "': " + v);
  }
}

inline bool to_bool(const std::string& v, const std::string& key, long line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("line " + std::to_string(line) + ": bad bool for '" + key + "' (true/false): " + v);
}

}  // namespace detail

inline RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  long line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash_pos = raw.find('#');
    if (hash_pos != std::string::npos) raw = raw.substr(0, hash_pos);
    const std::string s = detail::trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(line) + ": malformed section header");
      section = s.substr(1, s.size() - 2);
      if (section != "schedule" && section != "model" && section != "train" && section != "at" &&
          section != "cd" && section != "sampler" && section != "data" && section != "io")
        throw ConfigError("line " + std::to_string(line) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    const std::string qual = section + "." + key;
    using detail::to_bool;
    using detail::to_f64;
    using detail::to_long;
    using detail::to_u64;

    if (qual == "schedule.kind") cfg.schedule_kind = val;
    else if (qual == "schedule.T") cfg.T = to_long(val, qual, line);
    else if (qual == "model.hidden") cfg.hidden = to_long(val, qual, line);
    else if (qual == "model.depth") cfg.depth = to_long(val, qual, line);
    else if (qual == "model.time_embed") cfg.time_embed = to_long(val, qual, line);
    else if (qual == "model.sigma_data") cfg.sigma_data = to_f64(val, qual, line);
    else if (qual == "model.s_max") cfg.s_max = to_f64(val, qual, line);
    else if (qual == "train.lr") cfg.train.lr = to_f64(val, qual, line);
    else if (qual == "train.batch_size") cfg.train.batch_size = to_long(val, qual, line);
    else if (qual == "train.iterations") cfg.train.iterations = to_long(val, qual, line);
    else if (qual == "train.seed") cfg.train.seed = to_u64(val, qual, line);
    else if (qual == "train.lambda") cfg.train.loss_weight = to_f64(val, qual, line);
    else if (qual == "train.optimizer") cfg.train.optimizer = optimizer_kind_from(val);
    else if (qual == "train.ema_mu") cfg.train.ema_mu = to_f64(val, qual, line);
    else if (qual == "train.per_example_t") cfg.train.per_example_t = to_bool(val, qual, line);
    else if (qual == "at.enabled") cfg.at_enabled = to_bool(val, qual, line);
    else if (qual == "at.K") cfg.at.K = to_long(val, qual, line);
    else if (qual == "at.alpha") cfg.at.adv_lr = to_f64(val, qual, line);
    else if (qual == "at.norm") cfg.at.norm = val;
    else if (qual == "at.delta_reset") cfg.at.delta_reset = val;
    else if (qual == "at.eta") cfg.at.radius_eta = val == "none"
                                                       ? std::optional<double>{}
                                                       : std::optional<double>{to_f64(val, qual, line)};
    else if (qual == "cd.solver") cfg.cd_solver = val;
    else if (qual == "cd.metric") cfg.cd_metric = val;
    else if (qual == "cd.perturb") cfg.cd_perturb = val;
    else if (qual == "cd.teacher") cfg.cd_teacher = val;
    else if (qual == "sampler.kind") cfg.sampler_kind = val;
    else if (qual == "sampler.nfe") cfg.nfe = to_long(val, qual, line);
    else if (qual == "sampler.order") cfg.solver_order = to_long(val, qual, line);
    else if (qual == "sampler.es_lambda") cfg.es_lambda = to_f64(val, qual, line);
    else if (qual == "sampler.es_lambda_file") cfg.es_lambda_file = val;
    else if (qual == "sampler.steps") cfg.cm_steps = to_long(val, qual, line);
    else if (qual == "sampler.use_ema") cfg.use_ema = to_bool(val, qual, line);
    else if (qual == "sampler.seed") cfg.sampler_seed = to_u64(val, qual, line);
    else if (qual == "sampler.clip_x0") cfg.clip_x0 = val == "none"
                                                          ? std::optional<double>{}
                                                          : std::optional<double>{to_f64(val, qual, line)};
    else if (qual == "data.kind") cfg.data_kind = val;
    else if (qual == "data.n") cfg.data_n = to_long(val, qual, line);
    else if (qual == "data.seed") cfg.data_seed = to_u64(val, qual, line);
    else if (qual == "io.out_dir") cfg.out_dir = val;
    else if (qual == "io.eval_every") cfg.eval_every = to_long(val, qual, line);
    else if (qual == "io.checkpoint_every") cfg.checkpoint_every = to_long(val, qual, line);
    else if (qual == "io.eval_samples") cfg.eval_samples = to_long(val, qual, line);
    else if (qual == "io.eval_n_proj") cfg.eval_n_proj = to_long(val, qual, line);
    else if (qual == "io.eval_seed") cfg.eval_seed = to_u64(val, qual, line);
    else
      throw ConfigError("line " + std::to_string(line) + ": unknown key '" + qual + "'");
  }
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

}  // namespace adt
