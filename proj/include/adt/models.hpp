// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "adt/schedule.hpp"
#include "adt/tape.hpp"

namespace adt {

struct DenseLayer {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

// Desk-scale MLP backbone with tanh hidden activations. depth = number of
// hidden layers; the final layer is linear.
struct MlpParams {
  std::vector<DenseLayer> layers;
  long in_dim = 0;
  long hidden_dim = 0;
  long depth = 0;
  long out_dim = 0;

  // Glorot-uniform weights, zero biases; optionally zero final layer.
  static MlpParams init(long in_dim, long hidden_dim, long depth, long out_dim, Rng& rng,
                        bool zero_final) {
    if (in_dim < 1 || hidden_dim < 1 || depth < 1 || out_dim < 1)
      throw ContractError("MlpParams: dimensions must be positive");
    MlpParams p;
    p.in_dim = in_dim;
    p.hidden_dim = hidden_dim;
    p.depth = depth;
    p.out_dim = out_dim;
    long fan_in = in_dim;
    for (long l = 0; l < depth + 1; ++l) {
      const long fan_out = l == depth ? out_dim : hidden_dim;
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      DenseLayer layer;
      layer.w = (l == depth && zero_final) ? Tensor({fan_in, fan_out})
                                           : Tensor::uniform({fan_in, fan_out}, rng, -bound, bound);
      layer.b = Tensor({fan_out});
      p.layers.push_back(std::move(layer));
      fan_in = fan_out;
    }
    return p;
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out;
    for (auto& l : layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
    return out;
  }

  std::vector<const Tensor*> tensors() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers) {
      out.push_back(&l.w);
      out.push_back(&l.b);
    }
    return out;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.w.all_finite() || !l.b.all_finite()) return false;
    return true;
  }
};

// MLP parameters registered on a tape. Target-branch bindings use
// requires_grad = false, which is the stop-gradient: input gradients still
// flow through, parameter gradients stay exactly zero.
struct BoundMlp {
  std::vector<std::pair<Var, Var>> layers;  // (w, b)

  Var forward(Tape& tape, Var x) const {
    const long batch = tape.val(x).rows();
    for (size_t l = 0; l < layers.size(); ++l) {
      Var h = tape.matmul(x, layers[l].first);
      h = tape.add(h, tape.broadcast_rows(layers[l].second, batch));
      x = (l + 1 < layers.size()) ? tape.tanh(h) : h;
    }
    return x;
  }

  std::vector<Var> params() const {
    std::vector<Var> out;
    for (const auto& [w, b] : layers) {
      out.push_back(w);
      out.push_back(b);
    }
    return out;
  }
};

inline BoundMlp bind_mlp(Tape& tape, const MlpParams& p, bool requires_grad) {
  BoundMlp bound;
  for (const auto& l : p.layers)
    bound.layers.push_back({tape.leaf(l.w, requires_grad), tape.leaf(l.b, requires_grad)});
  return bound;
}

// Sinusoidal embedding of the integer step index; geometric frequencies from
// 1 down to 1/10000.
struct TimeEmbed {
  long dim = 16;  // even

  Tensor row(double t) const {
    if (dim < 2 || dim % 2 != 0) throw ContractError("TimeEmbed: dim must be even and >= 2");
    const long half = dim / 2;
    Tensor out({1, dim});
    for (long i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                   static_cast<double>(half));
      out[2 * i] = std::sin(t * freq);
      out[2 * i + 1] = std::cos(t * freq);
    }
    return out;
  }

  // One embedding row per batch element; ts has size 1 (shared step) or batch.
  Tensor rows(std::span<const long> ts, long batch) const {
    if (ts.size() != 1 && static_cast<long>(ts.size()) != batch)
      throw ShapeError("TimeEmbed: ts size must be 1 or batch");
    Tensor out({batch, dim});
    for (long i = 0; i < batch; ++i) {
      const Tensor r = row(static_cast<double>(ts[ts.size() == 1 ? 0 : i]));
      for (long j = 0; j < dim; ++j) out[i * dim + j] = r[j];
    }
    return out;
  }
};

// Noise predictor eps_theta(x, t): MLP over [x, time-embedding].
struct EpsModel {
  MlpParams mlp;
  TimeEmbed time_embed;
  long data_dim = 0;
  long T = 0;

  static EpsModel init(long data_dim, long hidden, long depth, long time_embed_dim, long T,
                       Rng& rng) {
    EpsModel m;
    m.data_dim = data_dim;
    m.T = T;
    m.time_embed.dim = time_embed_dim;
    m.mlp = MlpParams::init(data_dim + time_embed_dim, hidden, depth, data_dim, rng,
                            /*zero_final=*/true);
    return m;
  }

  void check_t(long t) const {
    if (t < 0 || t > T)
      throw ContractError("EpsModel: t = " + std::to_string(t) + " outside 0..=" + std::to_string(T));
  }
};

inline Var eps_forward(Tape& tape, const BoundMlp& bound, const EpsModel& m, Var x,
                       std::span<const long> ts) {
  const Tensor& tx = tape.val(x);
  if (tx.shape().size() != 2 || tx.cols() != m.data_dim)
    throw ShapeError("eps_forward: expected [batch, " + std::to_string(m.data_dim) + "], got " +
                     shape_str(tx.shape()));
  for (long t : ts) m.check_t(t);
  Var emb = tape.leaf(m.time_embed.rows(ts, tx.rows()), false);
  return bound.forward(tape, tape.concat_cols(x, emb));
}

inline Var eps_forward(Tape& tape, const BoundMlp& bound, const EpsModel& m, Var x, long t) {
  const long ts[1] = {t};
  return eps_forward(tape, bound, m, x, std::span<const long>(ts));
}

// No-grad convenience: one forward through a throwaway tape.
inline Tensor eps_predict(const EpsModel& m, const Tensor& x, long t) {
  Tape tape;
  BoundMlp bound = bind_mlp(tape, m.mlp, false);
  return tape.val(eps_forward(tape, bound, m, tape.leaf(x, false), t));
}

// Consistency model f_theta(x, t) = c_skip(t) x + c_out(t) F_theta(x, t),
// with (c_skip, c_out)(0) = (1, 0) so f(x, 0) == x bit-exactly for any
// parameters. s_max = 0 degenerates the whole map to the identity (test
// configuration).
struct ConsistencyModel {
  MlpParams mlp;
  TimeEmbed time_embed;
  long data_dim = 0;
  long T = 0;
  double sigma_data = 1.0;
  double s_max = 1.0;

  static ConsistencyModel init(long data_dim, long hidden, long depth, long time_embed_dim, long T,
                               Rng& rng, double sigma_data = 1.0, double s_max = 1.0) {
    ConsistencyModel m;
    m.data_dim = data_dim;
    m.T = T;
    m.sigma_data = sigma_data;
    m.s_max = s_max;
    m.time_embed.dim = time_embed_dim;
    m.mlp = MlpParams::init(data_dim + time_embed_dim, hidden, depth, data_dim, rng,
                            /*zero_final=*/false);
    return m;
  }

  double c_skip(long t) const {
    const double r = static_cast<double>(t) / static_cast<double>(T) * s_max;
    return sigma_data * sigma_data / (r * r + sigma_data * sigma_data);
  }

  double c_out(long t) const {
    const double r = static_cast<double>(t) / static_cast<double>(T) * s_max;
    return r * sigma_data / std::sqrt(r * r + sigma_data * sigma_data);
  }

  void check_t(long t) const {
    if (t < 0 || t > T)
      throw ContractError("ConsistencyModel: t = " + std::to_string(t) + " outside 0..=" +
                          std::to_string(T));
  }
};

inline Var cm_forward(Tape& tape, const BoundMlp& bound, const ConsistencyModel& m, Var x, long t) {
  const Tensor& tx = tape.val(x);
  if (tx.shape().size() != 2 || tx.cols() != m.data_dim)
    throw ShapeError("cm_forward: expected [batch, " + std::to_string(m.data_dim) + "], got " +
                     shape_str(tx.shape()));
  m.check_t(t);
  const long ts[1] = {t};
  Var emb = tape.leaf(m.time_embed.rows(std::span<const long>(ts), tx.rows()), false);
  Var f = bound.forward(tape, tape.concat_cols(x, emb));
  return tape.add(tape.mul(x, tape.constant(m.c_skip(t))),
                  tape.mul(f, tape.constant(m.c_out(t))));
}

inline Tensor cm_predict(const ConsistencyModel& m, const Tensor& x, long t) {
  Tape tape;
  BoundMlp bound = bind_mlp(tape, m.mlp, false);
  return tape.val(cm_forward(tape, bound, m, tape.leaf(x, false), t));
}

// Target-parameter copy theta^- maintained as an EMA of the online
// parameters; the online side is never touched by update().
struct EmaPair {
  std::vector<Tensor> target;
  double mu = 0.9999;

  static EmaPair from(const MlpParams& online, double mu) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw ContractError("EmaPair: mu outside [0, 1]");
    EmaPair e;
    e.mu = mu;
    for (const Tensor* t : online.tensors()) e.target.push_back(*t);
    return e;
  }

  // target <- mu * target + (1 - mu) * online, elementwise.
  void update(const MlpParams& online) {
    const auto src = online.tensors();
    if (src.size() != target.size()) throw ContractError("EmaPair: parameter count mismatch");
    for (size_t i = 0; i < src.size(); ++i) {
      Tensor& tgt = target[i];
      const Tensor& on = *src[i];
      if (!tgt.same_shape(on))
        throw ContractError("EmaPair: parameter shape mismatch at index " + std::to_string(i));
      for (long k = 0; k < tgt.size(); ++k) tgt[k] = mu * tgt[k] + (1.0 - mu) * on[k];
    }
  }

  // Materialize the target parameters into a same-architecture container.
  MlpParams snapshot(const MlpParams& arch) const {
    MlpParams out = arch;
    auto dst = out.tensors();
    if (dst.size() != target.size()) throw ContractError("EmaPair: parameter count mismatch");
    for (size_t i = 0; i < dst.size(); ++i) *dst[i] = target[i];
    return out;
  }
};

inline void ema_update(EmaPair& pair, const MlpParams& online) { pair.update(online); }

}  // namespace adt
