// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "adt/consistency.hpp"
#include "adt/dpm_train.hpp"
#include "adt/metrics.hpp"
#include "adt/samplers.hpp"

namespace adt {

struct SuiteResult {
  bool pass = false;
  double worst = 0.0;
  std::string detail;
};

// Autodiff vs central finite differences on random MLP loss instances,
// including the gradient w.r.t. the adversarial perturbation.
inline SuiteResult gradcheck_suite(long instances = 100, std::uint64_t seed = 7) {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(seed);
  double worst = 0.0;
  for (long rep = 0; rep < instances; ++rep) {
    Rng mrng(seed + 1000 + static_cast<std::uint64_t>(rep));
    EpsModel m = EpsModel::init(2, 6, 2, 4, 50, mrng);
    m.mlp.layers.back().w = Tensor::uniform(m.mlp.layers.back().w.shape(), mrng, -0.5, 0.5);
    const Tensor x0 = Tensor::uniform({3, 2}, rng, -1.0, 1.0);
    const Tensor eps = Tensor::uniform({3, 2}, rng, -1.0, 1.0);
    const Tensor delta = Tensor::uniform({3, 2}, rng, -0.05, 0.05);
    const long t = rng.below(48) + 2;
    const long ts[1] = {t};

    Tape tape;
    BoundMlp bound = bind_mlp(tape, m.mlp, true);
    Var dvar = tape.leaf(delta, true);
    Var loss = at_loss_graph(
        tape,
        [&](Tape& tp, Var x, std::span<const long> tss) { return eps_forward(tp, bound, m, x, tss); },
        x0, std::span<const long>(ts), eps, dvar, sched);
    tape.backward(loss);

    // gradient w.r.t. the perturbation (the ascent direction of the inner loop)
    const Tensor ad_delta = tape.grad(dvar);
    const Tensor fd_delta = finite_difference(
        [&](const Tensor& v) { return at_loss(m, x0, t, eps, v, sched); }, delta, 1e-5);
    for (long k = 0; k < ad_delta.size(); ++k)
      worst = std::max(worst, std::fabs(ad_delta[k] - fd_delta[k]) /
                                  std::max(std::fabs(fd_delta[k]), 1e-3));

    // gradient w.r.t. one parameter tensor per instance (rotating)
    auto tensors = m.mlp.tensors();
    const size_t pi = static_cast<size_t>(rep) % tensors.size();
    auto params = bound.params();
    const Tensor ad_p = tape.grad(params[pi]);
    const Tensor fd_p = finite_difference(
        [&](const Tensor& v) {
          EpsModel q = m;
          *q.mlp.tensors()[pi] = v;
          return at_loss(q, x0, t, eps, delta, sched);
        },
        *tensors[pi], 1e-5);
    for (long k = 0; k < ad_p.size(); ++k)
      worst =
          std::max(worst, std::fabs(ad_p[k] - fd_p[k]) / std::max(std::fabs(fd_p[k]), 1e-3));
  }
  SuiteResult out;
  out.worst = worst;
  out.pass = worst < 1e-4;
  out.detail = "max relative error " + fmt_f64(worst) + " over " + std::to_string(instances) +
               " instances (tolerance 1e-4)";
  return out;
}

// First-order DPM solver vs DDIM on random steps.
inline SuiteResult sampler_equiv_suite(long instances = 100, std::uint64_t seed = 11) {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 100);
  Rng rng(seed);
  double worst = 0.0;
  for (long rep = 0; rep < instances; ++rep) {
    const long r = rng.below(99);
    const long s = r + 1 + rng.below(100 - r);
    const Tensor x = Tensor::randn({2, 2}, rng);
    Rng crng(seed + 5000 + static_cast<std::uint64_t>(rep));
    const double a = crng.uniform(-0.5, 0.5), b = crng.uniform(-0.5, 0.5);
    const EpsFn model = [a, b](const Tensor& v, long) {
      Tensor out(v.shape());
      for (long i = 0; i < v.size(); ++i) out[i] = a * v[i] + b;
      return out;
    };
    SolverHistory h;
    const Tensor first = dpm_solver_step(model, x, s, r, 1, h, sched);
    const Tensor ref = ddim_step(model, x, s, r, sched);
    worst = std::max(worst, max_abs_diff(first, ref));
  }
  SuiteResult out;
  out.worst = worst;
  out.pass = worst < 1e-10;
  out.detail = "max |dpm_solver(order 1) - ddim| = " + fmt_f64(worst) + " over " +
               std::to_string(instances) + " random steps (tolerance 1e-10)";
  return out;
}

// Transport-entropy bound over the (m, t) grid; the equal-variance shift is
// the equality case and must match to 1e-9.
inline SuiteResult talagrand_suite(long T = 100) {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, T);
  SuiteResult out;
  out.pass = true;
  double worst_gap = 0.0;
  for (long ti = 0; ti < 10; ++ti) {
    const long t = std::max<long>(1, T * ti / 10 + T / 20);
    for (long mi = 0; mi < 10; ++mi) {
      const double m = -3.0 + 6.0 * static_cast<double>(mi) / 9.0;
      const BoundCheck chk = verify_talagrand(m, t, sched);
      if (!chk.pass || std::fabs(chk.lhs - chk.rhs) > 1e-9) out.pass = false;
      worst_gap = std::max(worst_gap, std::fabs(chk.lhs - chk.rhs));
    }
  }
  out.worst = worst_gap;
  out.detail = "100-point (m, t) grid, max |lhs - rhs| = " + fmt_f64(worst_gap) +
               " (equality tolerance 1e-9)";
  return out;
}

}  // namespace adt
