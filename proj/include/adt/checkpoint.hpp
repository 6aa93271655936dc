// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "adt/config.hpp"
#include "adt/models.hpp"
#include "adt/optim.hpp"
#include "adt/schedule.hpp"

#include <json.hpp>

namespace adt {

// Versioned checkpoint container, bit-exact round-trip: fixed-order binary
// header (format_version, kind, schedule length T, then all arrays as
// little-endian f64), followed by an embedded JSON manifest. The schedule is
// stored as explicit arrays rather than (kind, T).
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;
  enum class Kind : std::uint8_t { kEps = 0, kCm = 1 };

  Kind kind = Kind::kEps;
  NoiseSchedule sched;
  long data_dim = 0, hidden = 0, depth = 0, time_embed = 0;
  double sigma_data = 1.0, s_max = 1.0;
  std::vector<Tensor> params;  // w0, b0, w1, b1, ...
  OptimizerKind opt_kind = OptimizerKind::kAdam;
  double opt_lr = 1e-3;
  long opt_step = 0;
  std::vector<Tensor> opt_m, opt_v;  // empty when the optimizer has no state yet
  double ema_mu = 0.9999;
  std::vector<Tensor> ema_target;
  std::uint64_t rng_state = 0;
  long step = 0;
  std::vector<double> data_shift, data_scale;
  std::uint64_t teacher_hash = 0;
  double final_loss = 0.0;          // trailing-mean training loss at save time
  std::vector<double> loss_tail;    // last <= 500 per-update losses, for resume-stable statistics
  std::string config_echo;

  EpsModel to_eps_model() const {
    if (kind != Kind::kEps) throw ContractError("checkpoint holds a consistency model, not eps");
    EpsModel m;
    m.data_dim = data_dim;
    m.T = sched.T;
    m.time_embed.dim = time_embed;
    m.mlp = materialize_mlp();
    return m;
  }

  ConsistencyModel to_cm_model() const {
    if (kind != Kind::kCm) throw ContractError("checkpoint holds an eps model, not a consistency model");
    ConsistencyModel m;
    m.data_dim = data_dim;
    m.T = sched.T;
    m.time_embed.dim = time_embed;
    m.sigma_data = sigma_data;
    m.s_max = s_max;
    m.mlp = materialize_mlp();
    return m;
  }

  MlpParams materialize_mlp() const {
    MlpParams p;
    p.in_dim = data_dim + time_embed;
    p.hidden_dim = hidden;
    p.depth = depth;
    p.out_dim = data_dim;
    if (params.size() % 2 != 0) throw IoError("checkpoint: odd parameter tensor count");
    for (size_t i = 0; i < params.size(); i += 2)
      p.layers.push_back({params[i], params[i + 1]});
    return p;
  }

  MlpParams ema_model_params() const {
    MlpParams p = materialize_mlp();
    auto dst = p.tensors();
    if (dst.size() != ema_target.size()) throw IoError("checkpoint: EMA tensor count mismatch");
    for (size_t i = 0; i < dst.size(); ++i) *dst[i] = ema_target[i];
    return p;
  }

  Optimizer to_optimizer() const {
    Optimizer opt(opt_kind, opt_lr);
    opt.restore(opt_step, opt_m, opt_v);
    return opt;
  }

  EmaPair to_ema(const MlpParams& arch) const {
    EmaPair e = EmaPair::from(arch, ema_mu);
    if (e.target.size() != ema_target.size()) throw IoError("checkpoint: EMA tensor count mismatch");
    e.target = ema_target;
    return e;
  }
};

namespace ckpt_detail {

inline void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}
inline void put_u32(std::string& out, std::uint32_t v) { put_bytes(out, &v, 4); }
inline void put_u64(std::string& out, std::uint64_t v) { put_bytes(out, &v, 8); }
inline void put_i64(std::string& out, long v) { put_u64(out, static_cast<std::uint64_t>(v)); }
inline void put_f64(std::string& out, double v) { put_bytes(out, &v, 8); }
inline void put_f64s(std::string& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  if (!v.empty()) put_bytes(out, v.data(), v.size() * 8);
}
inline void put_tensors(std::string& out, const std::vector<Tensor>& ts) {
  put_u64(out, ts.size());
  for (const Tensor& t : ts) {
    put_u64(out, t.shape().size());
    for (long d : t.shape()) put_i64(out, d);
    put_bytes(out, t.data(), static_cast<size_t>(t.size()) * 8);
  }
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("checkpoint: truncated file");
  }
  void get_bytes(void* p, size_t n) {
    need(n);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t get_u32() {
    std::uint32_t v;
    get_bytes(&v, 4);
    return v;
  }
  std::uint64_t get_u64() {
    std::uint64_t v;
    get_bytes(&v, 8);
    return v;
  }
  long get_i64() { return static_cast<long>(get_u64()); }
  double get_f64() {
    double v;
    get_bytes(&v, 8);
    return v;
  }
  std::vector<double> get_f64s() {
    const size_t n = get_u64();
    std::vector<double> v(n);
    if (n) get_bytes(v.data(), n * 8);
    return v;
  }
  std::vector<Tensor> get_tensors() {
    const size_t n = get_u64();
    std::vector<Tensor> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      const size_t rank = get_u64();
      Shape shape(rank);
      for (size_t r = 0; r < rank; ++r) shape[r] = get_i64();
      Tensor t(shape);
      get_bytes(t.data(), static_cast<size_t>(t.size()) * 8);
      out.push_back(std::move(t));
    }
    return out;
  }
};

}  // namespace ckpt_detail

inline std::string checkpoint_serialize(const Checkpoint& c) {
  using namespace ckpt_detail;
  std::string out;
  out.append("ADTCKPT\0", 8);
  put_u32(out, Checkpoint::kFormatVersion);
  out.push_back(static_cast<char>(c.kind));
  put_i64(out, c.sched.T);
  put_f64s(out, c.sched.alpha);
  put_f64s(out, c.sched.alpha_bar);
  put_f64s(out, c.sched.beta);
  put_f64s(out, c.sched.sigma);
  put_i64(out, c.data_dim);
  put_i64(out, c.hidden);
  put_i64(out, c.depth);
  put_i64(out, c.time_embed);
  put_f64(out, c.sigma_data);
  put_f64(out, c.s_max);
  put_tensors(out, c.params);
  out.push_back(static_cast<char>(c.opt_kind == OptimizerKind::kSgd ? 0 : 1));
  put_f64(out, c.opt_lr);
  put_i64(out, c.opt_step);
  put_tensors(out, c.opt_m);
  put_tensors(out, c.opt_v);
  put_f64(out, c.ema_mu);
  put_tensors(out, c.ema_target);
  put_u64(out, c.rng_state);
  put_i64(out, c.step);
  put_f64s(out, c.data_shift);
  put_f64s(out, c.data_scale);
  put_u64(out, c.teacher_hash);
  put_f64(out, c.final_loss);
  put_f64s(out, c.loss_tail);
  put_u64(out, c.config_echo.size());
  out.append(c.config_echo);

  nlohmann::json manifest;
  manifest["format_version"] = Checkpoint::kFormatVersion;
  manifest["artifact_version"] = kVersion;
  manifest["kind"] = c.kind == Checkpoint::Kind::kEps ? "eps" : "cm";
  manifest["step"] = c.step;
  {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(c.config_echo)));
    manifest["config_hash"] = hex;
  }
  manifest["final_loss"] = c.final_loss;
  manifest["teacher_hash"] = c.teacher_hash;
  const std::string mtext = manifest.dump();
  put_u64(out, mtext.size());
  out.append(mtext);
  return out;
}

inline Checkpoint checkpoint_deserialize(const std::string& buf) {
  using namespace ckpt_detail;
  Reader r(buf);
  char magic[8];
  r.get_bytes(magic, 8);
  if (std::memcmp(magic, "ADTCKPT\0", 8) != 0) throw IoError("checkpoint: bad magic");
  Checkpoint c;
  const std::uint32_t ver = r.get_u32();
  if (ver != Checkpoint::kFormatVersion)
    throw IoError("checkpoint: unsupported format_version " + std::to_string(ver));
  char kind;
  r.get_bytes(&kind, 1);
  c.kind = static_cast<Checkpoint::Kind>(kind);
  const long T = r.get_i64();
  c.sched.T = T;
  c.sched.alpha = r.get_f64s();
  c.sched.alpha_bar = r.get_f64s();
  c.sched.beta = r.get_f64s();
  c.sched.sigma = r.get_f64s();
  if (static_cast<long>(c.sched.alpha.size()) != T ||
      static_cast<long>(c.sched.alpha_bar.size()) != T ||
      static_cast<long>(c.sched.beta.size()) != T || static_cast<long>(c.sched.sigma.size()) != T)
    throw IoError("checkpoint: schedule array length mismatch");
  c.data_dim = r.get_i64();
  c.hidden = r.get_i64();
  c.depth = r.get_i64();
  c.time_embed = r.get_i64();
  c.sigma_data = r.get_f64();
  c.s_max = r.get_f64();
  c.params = r.get_tensors();
  char opt_kind;
  r.get_bytes(&opt_kind, 1);
  c.opt_kind = opt_kind == 0 ? OptimizerKind::kSgd : OptimizerKind::kAdam;
  c.opt_lr = r.get_f64();
  c.opt_step = r.get_i64();
  c.opt_m = r.get_tensors();
  c.opt_v = r.get_tensors();
  c.ema_mu = r.get_f64();
  c.ema_target = r.get_tensors();
  c.rng_state = r.get_u64();
  c.step = r.get_i64();
  c.data_shift = r.get_f64s();
  c.data_scale = r.get_f64s();
  c.teacher_hash = r.get_u64();
  c.final_loss = r.get_f64();
  c.loss_tail = r.get_f64s();
  const size_t cfg_len = r.get_u64();
  r.need(cfg_len);
  c.config_echo.assign(buf, r.pos, cfg_len);
  r.pos += cfg_len;
  const size_t mlen = r.get_u64();
  r.need(mlen);
  r.pos += mlen;  // manifest is derived data; the binary fields are authoritative
  if (r.pos != buf.size()) throw IoError("checkpoint: trailing bytes");
  return c;
}

inline void checkpoint_save(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  const std::string buf = checkpoint_serialize(c);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

inline Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_deserialize(ss.str());
}

}  // namespace adt
