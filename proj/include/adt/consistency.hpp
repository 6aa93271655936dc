// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "adt/dpm_train.hpp"
#include "adt/metrics.hpp"
#include "adt/models.hpp"
#include "adt/samplers.hpp"

namespace adt {

enum class OdeSolverKind { kEuler, kDdim };

inline OdeSolverKind ode_solver_from(const std::string& s) {
  if (s == "euler") return OdeSolverKind::kEuler;
  if (s == "ddim") return OdeSolverKind::kDdim;
  throw ContractError("unknown ODE solver '" + s + "'");
}

inline std::string to_string(OdeSolverKind k) {
  return k == OdeSolverKind::kEuler ? "euler" : "ddim";
}

enum class CdMetric { kL2, kL1 };

inline CdMetric cd_metric_from(const std::string& s) {
  if (s == "l2") return CdMetric::kL2;
  if (s == "l1") return CdMetric::kL1;
  throw ContractError("unknown CD metric '" + s + "'");
}

inline std::string to_string(CdMetric m) { return m == CdMetric::kL2 ? "l2" : "l1"; }

// Which branch evaluates the perturbed solver output (Phi_hat + delta, t):
// kTarget is the pseudocode-literal d(f_theta(x_{t+1}, t+1), f_target(Phi+delta, t));
// kStudent swaps the models across the two branches for ablation. The
// perturbation always enters after Phi_hat, never on x_{t+1}.
enum class PerturbBranch { kTarget, kStudent };

inline PerturbBranch perturb_branch_from(const std::string& s) {
  if (s == "target") return PerturbBranch::kTarget;
  if (s == "student") return PerturbBranch::kStudent;
  throw ContractError("unknown perturb branch '" + s + "'");
}

inline std::string to_string(PerturbBranch p) {
  return p == PerturbBranch::kTarget ? "target" : "student";
}

struct CdConfig {
  OdeSolverKind solver = OdeSolverKind::kDdim;
  CdMetric metric = CdMetric::kL2;
  PerturbBranch perturb = PerturbBranch::kTarget;
};

// Euler step of the probability-flow ODE backward from s to t, with the
// time-change bookkeeping collapsed into step_scale = 1 - ab_s/ab_t (the
// effective 1 - alpha of the jump):
//   Phi = x + (step_scale / 2) (x - eps_hat / sqrt(1 - ab_s)).
// step_scale = 0 is the zero-step identity (test hook).
inline Tensor phi_hat_euler_raw(const Tensor& x, const Tensor& eps_hat, double ab_s,
                                double step_scale) {
  if (!x.same_shape(eps_hat)) throw ShapeError("phi_hat_euler_raw: shape mismatch");
  if (!(ab_s < 1.0)) throw NumericError("phi_hat_euler_raw: alpha_bar at source step must be < 1");
  const double inv = 1.0 / std::sqrt(1.0 - ab_s);
  Tensor out(x.shape());
  for (long i = 0; i < x.size(); ++i)
    out[i] = x[i] + 0.5 * step_scale * (x[i] - inv * eps_hat[i]);
  return out;
}

// One-step ODE estimate of x_t from x_{t+1} under a frozen teacher.
inline Tensor phi_hat(const Tensor& x_next, long t_next, long t, const EpsFn& teacher,
                      OdeSolverKind solver, const NoiseSchedule& sched) {
  if (!(t < t_next)) throw ContractError("phi_hat: need t < t_next");
  Tensor eps_hat = teacher(x_next, t_next);
  if (solver == OdeSolverKind::kDdim) return ddim_update(x_next, t_next, t, eps_hat, sched);
  return phi_hat_euler_raw(x_next, eps_hat, sched.ab(t_next), 1.0 - sched.ab_ratio(t_next, t));
}

inline Var cd_metric_reduce(Tape& tape, Var resid, long batch, CdMetric metric, double lambda_t) {
  Var per_elem = metric == CdMetric::kL2 ? tape.square(resid) : vabs(resid);
  return tape.mul(tape.sum(per_elem), tape.constant(lambda_t / static_cast<double>(batch)));
}

// Distillation loss on the tape: lambda(t) d(student(x_{t+1}, t+1),
// target(Phi_hat + delta, t)). phi is the precomputed solver output (constant
// across the inner loop); target parameters are stop-gradient while delta
// still receives input gradients through the target network.
inline Var cd_loss_graph(Tape& tape, const ConsistencyModel& student, const BoundMlp& student_bound,
                         const ConsistencyModel& target, const BoundMlp& target_bound,
                         const Tensor& x_next, long t_next, long t, const Tensor& phi, Var delta,
                         const CdConfig& cfg, double lambda_t = 1.0) {
  if (!x_next.same_shape(phi)) throw ShapeError("cd_loss: x_next vs phi shape mismatch");
  if (!tape.val(delta).same_shape(phi)) throw ShapeError("cd_loss: delta shape mismatch");
  Var x_next_leaf = tape.leaf(x_next, false);
  Var phi_in = tape.add(tape.leaf(phi, false), delta);
  Var clean_branch, perturbed_branch;
  if (cfg.perturb == PerturbBranch::kTarget) {
    clean_branch = cm_forward(tape, student_bound, student, x_next_leaf, t_next);
    perturbed_branch = cm_forward(tape, target_bound, target, phi_in, t);
  } else {
    perturbed_branch = cm_forward(tape, student_bound, student, phi_in, t);
    clean_branch = cm_forward(tape, target_bound, target, x_next_leaf, t_next);
  }
  Var resid = tape.sub(clean_branch, perturbed_branch);
  return cd_metric_reduce(tape, resid, x_next.rows(), cfg.metric, lambda_t);
}

// Scalar convenience (delta = 0 gives the plain CD loss of the distillation
// objective).
inline double cd_loss(const ConsistencyModel& student, const ConsistencyModel& target,
                      const Tensor& x_next, long t_next, long t, const EpsFn& teacher,
                      const CdConfig& cfg, const NoiseSchedule& sched, double lambda_t = 1.0) {
  Tape tape;
  BoundMlp sb = bind_mlp(tape, student.mlp, false);
  BoundMlp tb = bind_mlp(tape, target.mlp, false);
  Tensor phi = phi_hat(x_next, t_next, t, teacher, cfg.solver, sched);
  Var delta = tape.leaf(Tensor(x_next.shape()), false);
  return tape.val(cd_loss_graph(tape, student, sb, target, tb, x_next, t_next, t, phi, delta, cfg,
                                lambda_t))[0];
}

// Teacher-free adversarial consistency-training loss: x_t and x_{t+1} are
// built from the SAME (x0, eps) draw, delta perturbs the x_t (target) branch:
//   lambda(t) d(target(x_t + delta, t), student(x_{t+1}, t+1)).
inline Var ct_adv_loss_graph(Tape& tape, const ConsistencyModel& student,
                             const BoundMlp& student_bound, const ConsistencyModel& target,
                             const BoundMlp& target_bound, const Tensor& x0, long t,
                             const Tensor& eps_shared, Var delta, const CdConfig& cfg,
                             const NoiseSchedule& sched, double lambda_t = 1.0) {
  if (!x0.same_shape(eps_shared)) throw ShapeError("ct_adv_loss: x0 vs eps shape mismatch");
  if (t < 0 || t >= sched.T) throw ContractError("ct_adv_loss: t outside 0..T-1");
  const Tensor x_t = t == 0 ? x0 : q_sample(x0, t, eps_shared, sched);
  const Tensor x_next = q_sample(x0, t + 1, eps_shared, sched);
  Var target_in = tape.add(tape.leaf(x_t, false), delta);
  Var a = cm_forward(tape, target_bound, target, target_in, t);
  Var b = cm_forward(tape, student_bound, student, tape.leaf(x_next, false), t + 1);
  Var resid = tape.sub(a, b);
  return cd_metric_reduce(tape, resid, x0.rows(), cfg.metric, lambda_t);
}

inline double ct_adv_loss(const ConsistencyModel& student, const ConsistencyModel& target,
                          const Tensor& x0, long t, const Tensor& eps_shared, const Tensor& delta,
                          const CdConfig& cfg, const NoiseSchedule& sched, double lambda_t = 1.0) {
  Tape tape;
  BoundMlp sb = bind_mlp(tape, student.mlp, false);
  BoundMlp tb = bind_mlp(tape, target.mlp, false);
  Var d = tape.leaf(delta, false);
  return tape.val(
      ct_adv_loss_graph(tape, student, sb, target, tb, x0, t, eps_shared, d, cfg, sched, lambda_t))[0];
}

// One adversarial distillation batch (Algorithm-2 shape): sample t ~ U[0,T-1],
// x_{t+1} from the forward process, reset delta, then K interleaved
// (ascend delta, descend theta, EMA-update theta^-) iterations against the
// same precomputed Phi_hat.
inline StepReport cd_at_step(ConsistencyModel& student, Optimizer& opt, EmaPair& ema,
                             const Tensor& batch, const EpsFn& teacher, const CdConfig& cfg,
                             const ATConfig& atc, const TrainConfig& tc, const NoiseSchedule& sched,
                             Rng& rng) {
  atc.validate();
  const long B = batch.rows(), d = student.data_dim;
  const long t = rng.below(sched.T);  // U[0, T-1]
  Tensor eps = Tensor::randn({B, d}, rng);
  const Tensor x_next = q_sample(batch, t + 1, eps, sched);
  const Tensor phi = phi_hat(x_next, t + 1, t, teacher, cfg.solver, sched);
  Tensor delta({B, d});

  StepReport rep;
  rep.t = t;
  for (long i = 0; i < atc.K; ++i) {
    Tape tape;
    BoundMlp sb = bind_mlp(tape, student.mlp, true);
    ConsistencyModel target = student;
    target.mlp = ema.snapshot(student.mlp);
    BoundMlp tb = bind_mlp(tape, target.mlp, false);
    Var dvar = tape.leaf(delta, true);
    double loss_value = 0.0;
    Tensor delta_grad;
    std::vector<Tensor> grads;
    try {
      Var loss = cd_loss_graph(tape, student, sb, target, tb, x_next, t + 1, t, phi, dvar, cfg,
                               tc.loss_weight);
      loss_value = tape.val(loss)[0];
      tape.backward(loss);
      for (Var p : sb.params()) grads.push_back(tape.grad(p));
      delta_grad = tape.grad(dvar);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " [cd_at_step aborted: t=" + std::to_string(t) +
                         ", |delta|=" + std::to_string(delta.norm2()) + "]");
    }
    delta = at_inner_ascent(delta_grad, delta, atc.adv_lr);
    if (atc.radius_eta) project_l2(delta, *atc.radius_eta);
    opt.step(student.mlp.tensors(), grads);
    ema.update(student.mlp);
    rep.losses.push_back(loss_value);
    ++rep.updates;
  }
  rep.delta_norm = delta.norm2();
  return rep;
}

// Outer distillation loop; adversarial when atc.K * atc.adv_lr is meant to
// bite, and plain CD in the alpha -> 0 limit (also reachable with K = 1 and
// tiny alpha, since the loss is evaluated at delta = 0 before the ascent).
inline TrainSummary train_cd(ConsistencyModel& student, Optimizer& opt, EmaPair& ema,
                             const Tensor& data, const EpsFn& teacher, const CdConfig& cfg,
                             const ATConfig& atc, const TrainConfig& tc, const NoiseSchedule& sched,
                             Rng& rng, const TrainHooks& hooks = TrainHooks{}, long start_step = 0) {
  tc.validate();
  atc.validate();
  TrainSummary summary;
  long step = start_step;
  while (step < tc.iterations) {
    std::vector<long> idx(static_cast<size_t>(tc.batch_size));
    for (auto& k : idx) k = rng.below(data.rows());
    const Tensor batch = gather_rows(data, idx);
    const StepReport rep = cd_at_step(student, opt, ema, batch, teacher, cfg, atc, tc, sched, rng);
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

// Decreasing time ladder for k-step generation, uniform in t, starting at T.
inline std::vector<long> cm_time_ladder(long T, long steps) {
  if (steps < 1) throw ContractError("cm_time_ladder: steps must be >= 1");
  std::vector<long> ladder;
  for (long i = 0; i < steps; ++i) {
    const long tau = std::llround(static_cast<double>(T) * static_cast<double>(steps - i) /
                                  static_cast<double>(steps));
    ladder.push_back(std::max<long>(1, tau));
  }
  for (size_t i = 1; i < ladder.size(); ++i)
    if (ladder[i] >= ladder[i - 1]) throw ContractError("cm_time_ladder: non-decreasing ladder");
  return ladder;
}

// One- or few-step generation: f(x_T, T), then alternate re-noising to the
// ladder time and re-evaluating f. Chain i draws from the stream seeded with
// seed ^ i, as in the DPM samplers.
inline Tensor cm_sample(const ConsistencyModel& model, long steps, long n,
                        const NoiseSchedule& sched, std::uint64_t seed) {
  const std::vector<long> ladder = cm_time_ladder(sched.T, steps);
  if (n < 1) throw ContractError("cm_sample: n must be >= 1");
  std::vector<Rng> streams;
  streams.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) streams.emplace_back(seed ^ static_cast<std::uint64_t>(i));

  const long d = model.data_dim;
  Tensor x({n, d});
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) x.at(i, j) = streams[static_cast<size_t>(i)].normal();
  Tensor out = cm_predict(model, x, sched.T);
  for (size_t k = 1; k < ladder.size(); ++k) {
    const long tau = ladder[k];
    const double c0 = std::sqrt(sched.ab(tau));
    const double ce = std::sqrt(1.0 - sched.ab(tau));
    Tensor renoised({n, d});
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < d; ++j)
        renoised.at(i, j) = c0 * out.at(i, j) + ce * streams[static_cast<size_t>(i)].normal();
    out = cm_predict(model, renoised, tau);
  }
  if (out.has_nan()) throw NumericError("cm_sample: NaN in generated samples");
  return out;
}

// Empirical check of the distillation transport bound: exact 1D W1 between
// 1-step samples and data against sqrt(T * L_CD) plus the fixed 0.1 slack
// for the o(1) estimator term.
inline BoundCheck verify_cd_bound(const ConsistencyModel& model, const NoiseSchedule& sched,
                                  const Tensor& data_1d, double final_cd_loss, long n = 100000,
                                  std::uint64_t seed = 2026) {
  if (data_1d.cols() != 1) throw ContractError("verify_cd_bound: requires 1D data");
  if (!(final_cd_loss >= 0.0)) throw ContractError("verify_cd_bound: loss must be non-negative");
  const Tensor samples = cm_sample(model, 1, n, sched, seed);
  BoundCheck out;
  out.lhs = w1_1d(column(samples, 0), column(data_1d, 0), seed + 1);
  out.rhs = std::sqrt(static_cast<double>(sched.T) * final_cd_loss);
  out.pass = out.lhs <= out.rhs + 0.1;
  return out;
}

}  // namespace adt
