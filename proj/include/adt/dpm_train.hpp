// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adt/metrics.hpp"
#include "adt/models.hpp"
#include "adt/optim.hpp"
#include "adt/schedule.hpp"

namespace adt {

struct ATConfig {
  long K = 3;
  double adv_lr = 0.1;  // alpha, the normalized ascent step size
  std::string norm = "l2";
  std::string delta_reset = "per_batch";
  std::optional<double> radius_eta;  // optional projection cap; off by default (implicit cap K*alpha)

  void validate() const {
    if (K < 1) throw ContractError("ATConfig: K must be >= 1");
    if (!(adv_lr > 0.0)) throw ContractError("ATConfig: adv_lr must be positive");
    if (norm != "l2") throw ContractError("ATConfig: only l2 perturbation geometry is supported");
    if (delta_reset != "per_batch") throw ContractError("ATConfig: only per_batch delta reset is supported");
    if (radius_eta && !(*radius_eta > 0.0)) throw ContractError("ATConfig: radius_eta must be positive");
  }
};

struct TrainConfig {
  double lr = 1e-3;  // kappa
  long batch_size = 128;
  long iterations = 1000;  // parameter updates (an AT batch performs K of them)
  std::uint64_t seed = 0;
  double loss_weight = 1.0;  // constant lambda(t)
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double ema_mu = 0.9999;
  bool per_example_t = false;  // control arm; default one t per batch

  void validate() const {
    if (!(lr > 0.0)) throw ContractError("TrainConfig: lr must be positive");
    if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
    if (iterations < 0) throw ContractError("TrainConfig: iterations must be >= 0");
    if (!(ema_mu >= 0.0 && ema_mu <= 1.0)) throw ContractError("TrainConfig: ema_mu outside [0, 1]");
  }
};

// x_t rows for a shared or per-example step index.
inline Tensor q_sample_rows(const Tensor& x0, std::span<const long> ts, const Tensor& eps,
                            const NoiseSchedule& sched) {
  if (ts.size() == 1) return q_sample(x0, ts[0], eps, sched);
  if (static_cast<long>(ts.size()) != x0.rows())
    throw ShapeError("q_sample_rows: ts size must be 1 or batch");
  Tensor out(x0.shape());
  const long d = x0.cols();
  for (long i = 0; i < x0.rows(); ++i) {
    const double ab = sched.ab(ts[i]);
    const double c0 = std::sqrt(ab), ce = std::sqrt(1.0 - ab);
    for (long j = 0; j < d; ++j) out[i * d + j] = c0 * x0[i * d + j] + ce * eps[i * d + j];
  }
  return out;
}

inline Var loss_reduce_rowsq(Tape& tape, Var resid, long batch, double lambda_t) {
  // mean over the batch of per-row squared norms, scaled by lambda(t)
  return tape.mul(tape.sum(tape.square(resid)),
                  tape.constant(lambda_t / static_cast<double>(batch)));
}

// Noise-prediction objective: lambda(t) * mean_batch || eps_hat(x_t, t) - eps ||^2.
template <class ModelF>
Var standard_loss_graph(Tape& tape, ModelF&& model, const Tensor& x0, std::span<const long> ts,
                        const Tensor& eps, const NoiseSchedule& sched, double lambda_t = 1.0) {
  if (!x0.same_shape(eps))
    throw ContractError("standard_loss: x0 " + shape_str(x0.shape()) + " vs eps " +
                        shape_str(eps.shape()));
  Var xt = tape.leaf(q_sample_rows(x0, ts, eps, sched), false);
  Var eps_leaf = tape.leaf(eps, false);
  Var resid = tape.sub(model(tape, xt, ts), eps_leaf);
  return loss_reduce_rowsq(tape, resid, x0.rows(), lambda_t);
}

// Adversarial objective: the perturbation delta enters both the model input
// and the regression target,
//   lambda(t) * mean_batch || eps_hat(x_t + delta, t) - eps - delta/sqrt(1-ab_t) ||^2,
// so the true denoiser stays a global zero for every delta.
template <class ModelF>
Var at_loss_graph(Tape& tape, ModelF&& model, const Tensor& x0, std::span<const long> ts,
                  const Tensor& eps, Var delta, const NoiseSchedule& sched, double lambda_t = 1.0) {
  if (!x0.same_shape(eps))
    throw ContractError("at_loss: x0 " + shape_str(x0.shape()) + " vs eps " + shape_str(eps.shape()));
  if (!tape.val(delta).same_shape(x0))
    throw ContractError("at_loss: delta " + shape_str(tape.val(delta).shape()) + " vs x0 " +
                        shape_str(x0.shape()));
  for (long t : ts)
    if (sched.ab(t) >= 1.0)
      throw NumericError("at_loss: alpha_bar_t = 1 makes the delta target shift divide by zero");

  Var xt = tape.leaf(q_sample_rows(x0, ts, eps, sched), false);
  Var input = tape.add(xt, delta);

  Var shift;
  if (ts.size() == 1) {
    shift = tape.mul(delta, tape.constant(1.0 / std::sqrt(1.0 - sched.ab(ts[0]))));
  } else {
    Tensor inv(x0.shape());
    const long d = x0.cols();
    for (long i = 0; i < x0.rows(); ++i) {
      const double c = 1.0 / std::sqrt(1.0 - sched.ab(ts[i]));
      for (long j = 0; j < d; ++j) inv[i * d + j] = c;
    }
    shift = tape.mul(delta, tape.leaf(std::move(inv), false));
  }
  Var target = tape.add(tape.leaf(eps, false), shift);
  Var resid = tape.sub(model(tape, input, ts), target);
  return loss_reduce_rowsq(tape, resid, x0.rows(), lambda_t);
}

// Scalar-valued convenience wrappers over the graph builders.
inline double standard_loss(const EpsModel& model, const Tensor& x0, long t, const Tensor& eps,
                            const NoiseSchedule& sched, double lambda_t = 1.0) {
  Tape tape;
  BoundMlp bound = bind_mlp(tape, model.mlp, false);
  const long ts[1] = {t};
  Var loss = standard_loss_graph(
      tape,
      [&](Tape& tp, Var x, std::span<const long> tss) { return eps_forward(tp, bound, model, x, tss); },
      x0, std::span<const long>(ts), eps, sched, lambda_t);
  return tape.val(loss)[0];
}

inline double at_loss(const EpsModel& model, const Tensor& x0, long t, const Tensor& eps,
                      const Tensor& delta, const NoiseSchedule& sched, double lambda_t = 1.0) {
  Tape tape;
  BoundMlp bound = bind_mlp(tape, model.mlp, false);
  Var dvar = tape.leaf(delta, false);
  const long ts[1] = {t};
  Var loss = at_loss_graph(
      tape,
      [&](Tape& tp, Var x, std::span<const long> tss) { return eps_forward(tp, bound, model, x, tss); },
      x0, std::span<const long>(ts), eps, dvar, sched, lambda_t);
  return tape.val(loss)[0];
}

// Normalized gradient-ascent step on delta; no-op when the gradient is
// degenerate (|g| <= 1e-12).
inline Tensor at_inner_ascent(const Tensor& grad, const Tensor& delta, double alpha) {
  if (!grad.same_shape(delta))
    throw ShapeError("at_inner_ascent: grad " + shape_str(grad.shape()) + " vs delta " +
                     shape_str(delta.shape()));
  const double n = grad.norm2();
  if (n <= 1e-12) return delta;
  Tensor out(delta.shape());
  for (long i = 0; i < delta.size(); ++i) out[i] = delta[i] + alpha * grad[i] / n;
  return out;
}

inline void project_l2(Tensor& delta, double eta) {
  const double n = delta.norm2();
  if (n > eta) {
    const double s = eta / n;
    for (long i = 0; i < delta.size(); ++i) delta[i] *= s;
  }
}

struct StepReport {
  std::vector<double> losses;  // one per parameter update within the batch
  double delta_norm = 0.0;
  long t = -1;
  long updates = 0;
};

inline std::vector<long> draw_ts(Rng& rng, long T, long batch, bool per_example) {
  std::vector<long> ts;
  if (per_example) {
    ts.resize(static_cast<size_t>(batch));
    for (auto& t : ts) t = rng.below(T) + 1;
  } else {
    ts = {rng.below(T) + 1};
  }
  return ts;
}

// One free-AT batch: sample (t, eps) once, reset delta, then K interleaved
// (ascend delta, descend theta, EMA) iterations on the same (x, t, eps).
inline StepReport at_train_step(EpsModel& model, Optimizer& opt, EmaPair& ema, const Tensor& batch,
                                const ATConfig& atc, const TrainConfig& tc,
                                const NoiseSchedule& sched, Rng& rng) {
  atc.validate();
  const long B = batch.rows();
  std::vector<long> ts = draw_ts(rng, sched.T, B, tc.per_example_t);
  Tensor eps = Tensor::randn({B, model.data_dim}, rng);
  Tensor delta({B, model.data_dim});

  StepReport rep;
  rep.t = ts[0];
  for (long i = 0; i < atc.K; ++i) {
    Tape tape;
    BoundMlp bound = bind_mlp(tape, model.mlp, true);
    Var dvar = tape.leaf(delta, true);
    double loss_value = 0.0;
    Tensor delta_grad;
    std::vector<Tensor> grads;
    try {
      Var loss = at_loss_graph(
          tape,
          [&](Tape& tp, Var x, std::span<const long> tss) {
            return eps_forward(tp, bound, model, x, tss);
          },
          batch, ts, eps, dvar, sched, tc.loss_weight);
      loss_value = tape.val(loss)[0];
      tape.backward(loss);
      for (Var p : bound.params()) grads.push_back(tape.grad(p));
      delta_grad = tape.grad(dvar);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " [at_train_step aborted: t=" +
                         std::to_string(ts[0]) + ", |delta|=" + std::to_string(delta.norm2()) +
                         ", inner=" + std::to_string(i + 1) + "/" + std::to_string(atc.K) + "]");
    }
    delta = at_inner_ascent(delta_grad, delta, atc.adv_lr);
    if (atc.radius_eta) project_l2(delta, *atc.radius_eta);
    opt.step(model.mlp.tensors(), grads);
    ema.update(model.mlp);
    rep.losses.push_back(loss_value);
    ++rep.updates;
  }
  rep.delta_norm = delta.norm2();
  return rep;
}

// Plain noise-prediction step; draws (t, eps) in the same order as
// at_train_step so side-by-side comparisons stay aligned.
inline StepReport standard_train_step(EpsModel& model, Optimizer& opt, EmaPair& ema,
                                      const Tensor& batch, const TrainConfig& tc,
                                      const NoiseSchedule& sched, Rng& rng) {
  const long B = batch.rows();
  std::vector<long> ts = draw_ts(rng, sched.T, B, tc.per_example_t);
  Tensor eps = Tensor::randn({B, model.data_dim}, rng);

  Tape tape;
  BoundMlp bound = bind_mlp(tape, model.mlp, true);
  double loss_value = 0.0;
  std::vector<Tensor> grads;
  try {
    Var loss = standard_loss_graph(
        tape,
        [&](Tape& tp, Var x, std::span<const long> tss) {
          return eps_forward(tp, bound, model, x, tss);
        },
        batch, ts, eps, sched, tc.loss_weight);
    loss_value = tape.val(loss)[0];
    tape.backward(loss);
    for (Var p : bound.params()) grads.push_back(tape.grad(p));
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " [train step aborted: t=" + std::to_string(ts[0]) +
                       "]");
  }
  opt.step(model.mlp.tensors(), grads);
  ema.update(model.mlp);

  StepReport rep;
  rep.t = ts[0];
  rep.losses.push_back(loss_value);
  rep.updates = 1;
  return rep;
}

enum class TrainMode { kStandard, kAdversarial };

inline TrainMode train_mode_from(const std::string& s) {
  if (s == "standard") return TrainMode::kStandard;
  if (s == "adversarial") return TrainMode::kAdversarial;
  throw ContractError("unknown train mode '" + s + "'");
}

struct TrainSummary {
  long updates = 0;
  std::vector<double> losses;  // one per parameter update

  double trailing_mean(long window) const {
    if (losses.empty()) return 0.0;
    const size_t w = std::min<size_t>(static_cast<size_t>(window), losses.size());
    double acc = 0.0;
    for (size_t i = losses.size() - w; i < losses.size(); ++i) acc += losses[i];
    return acc / static_cast<double>(w);
  }
};

struct TrainHooks {
  long eval_every = 0;
  std::function<void(long step, double loss)> on_eval;
  long checkpoint_every = 0;
  std::function<void(long step, const TrainSummary& so_far)> on_checkpoint;
};

inline Tensor gather_rows(const Tensor& data, const std::vector<long>& idx) {
  const long d = data.cols();
  Tensor out({static_cast<long>(idx.size()), d});
  for (size_t i = 0; i < idx.size(); ++i)
    for (long j = 0; j < d; ++j) out[static_cast<long>(i) * d + j] = data.at(idx[i], j);
  return out;
}

// Outer training loop; runs until tc.iterations parameter updates have been
// performed (an adversarial batch contributes K, so totals round up to a
// multiple of K). start_step supports checkpoint resume.
inline TrainSummary train_dpm(TrainMode mode, EpsModel& model, Optimizer& opt, EmaPair& ema,
                              const Tensor& data, const ATConfig& atc, const TrainConfig& tc,
                              const NoiseSchedule& sched, Rng& rng,
                              const TrainHooks& hooks = TrainHooks{}, long start_step = 0) {
  tc.validate();
  if (mode == TrainMode::kAdversarial) atc.validate();
  TrainSummary summary;
  long step = start_step;
  while (step < tc.iterations) {
    std::vector<long> idx(static_cast<size_t>(tc.batch_size));
    for (auto& k : idx) k = rng.below(data.rows());
    const Tensor batch = gather_rows(data, idx);

    const StepReport rep = mode == TrainMode::kAdversarial
                               ? at_train_step(model, opt, ema, batch, atc, tc, sched, rng)
                               : standard_train_step(model, opt, ema, batch, tc, sched, rng);
    const long prev = step;
    step += rep.updates;
    summary.updates = step;
    for (double l : rep.losses) summary.losses.push_back(l);

    if (hooks.eval_every > 0 && hooks.on_eval && prev / hooks.eval_every != step / hooks.eval_every)
      hooks.on_eval(step, rep.losses.back());
    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint &&
        prev / hooks.checkpoint_every != step / hooks.checkpoint_every)
      hooks.on_checkpoint(step, summary);
  }
  return summary;
}

}  // namespace adt
