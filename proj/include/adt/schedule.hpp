// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "adt/tensor.hpp"

namespace adt {

// Discrete noise schedule for a T-step diffusion. Indexing convention:
// alpha[t-1] stores alpha_t for t = 1..T, and alpha_bar(0) == 1 denotes
// clean data. alpha_bar is built by sequential products so the recurrence
// alpha_bar_t = alpha_bar_{t-1} * alpha_t holds exactly.
struct NoiseSchedule {
  long T = 0;
  std::vector<double> alpha;      // alpha_t, t = 1..T
  std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s, t = 1..T
  std::vector<double> beta;       // 1 - alpha_t
  std::vector<double> sigma;      // sqrt(1 - alpha_t)

  double a(long t) const {
    check_t(t);
    return alpha[t - 1];
  }
  double ab(long t) const {
    if (t == 0) return 1.0;
    check_t(t);
    return alpha_bar[t - 1];
  }
  double b(long t) const {
    check_t(t);
    return beta[t - 1];
  }
  double sig(long t) const {
    check_t(t);
    return sigma[t - 1];
  }

  // Effective single-step alpha for a coarse jump from time s down to time r
  // (the alpha_bar ratio), used by sub-schedule samplers.
  double ab_ratio(long s, long r) const {
    if (!(r < s)) throw ContractError("ab_ratio: need r < s");
    return ab(s) / ab(r);
  }

  static NoiseSchedule from_alphas(std::vector<double> alphas) {
    NoiseSchedule s;
    s.T = static_cast<long>(alphas.size());
    if (s.T < 1) throw ContractError("NoiseSchedule: T must be >= 1");
    s.alpha = std::move(alphas);
    s.alpha_bar.resize(s.T);
    s.beta.resize(s.T);
    s.sigma.resize(s.T);
    double ab = 1.0;
    for (long t = 0; t < s.T; ++t) {
      if (!(s.alpha[t] > 0.0 && s.alpha[t] <= 1.0))
        throw ContractError("NoiseSchedule: alpha_" + std::to_string(t + 1) + " out of (0, 1]");
      ab *= s.alpha[t];
      s.alpha_bar[t] = ab;
      s.beta[t] = 1.0 - s.alpha[t];
      s.sigma[t] = std::sqrt(1.0 - s.alpha[t]);
    }
    return s;
  }

 private:
  void check_t(long t) const {
    if (t < 1 || t > T)
      throw ContractError("schedule: step " + std::to_string(t) + " outside 1.." + std::to_string(T));
  }
};

enum class ScheduleKind { kCosine, kLinear };

inline ScheduleKind schedule_kind_from(const std::string& s) {
  if (s == "cosine") return ScheduleKind::kCosine;
  if (s == "linear") return ScheduleKind::kLinear;
  throw ContractError("unknown schedule kind '" + s + "'");
}

inline std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::kCosine ? "cosine" : "linear";
}

// Cosine: alpha_bar_t = f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2)
// with offset s = 0.008; per-step alpha clipped to [0.001, 0.999].
// Linear: beta_t linearly spaced, defaults 1e-4..0.02 scaled for T relative
// to the conventional 1000-step grid.
inline NoiseSchedule build_schedule(ScheduleKind kind, long T) {
  if (T < 1) throw ContractError("build_schedule: T must be >= 1");
  std::vector<double> alphas(T);
  if (kind == ScheduleKind::kCosine) {
    constexpr double kOffset = 0.008;
    constexpr double kPi = 3.14159265358979323846;
    auto f = [&](double t) {
      const double c = std::cos(((t / static_cast<double>(T) + kOffset) / (1.0 + kOffset)) * kPi / 2.0);
      return c * c;
    };
    double prev = f(0.0);
    for (long t = 1; t <= T; ++t) {
      const double cur = f(static_cast<double>(t));
      double a = cur / prev;
      a = std::min(0.999, std::max(0.001, a));
      alphas[t - 1] = a;
      prev = cur;
    }
  } else {
    const double scale = 1000.0 / static_cast<double>(T);
    const double b1 = scale * 1e-4;
    const double bT = scale * 0.02;
    for (long t = 1; t <= T; ++t) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
      double b = b1 + (bT - b1) * frac;
      b = std::min(0.999, std::max(1e-8, b));
      alphas[t - 1] = 1.0 - b;
    }
  }
  return NoiseSchedule::from_alphas(std::move(alphas));
}

inline NoiseSchedule build_schedule(const std::string& kind, long T) {
  return build_schedule(schedule_kind_from(kind), T);
}

// Forward (noising) process: x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps.
inline Tensor q_sample(const Tensor& x0, long t, const Tensor& eps, const NoiseSchedule& sched) {
  if (!x0.same_shape(eps))
    throw ShapeError("q_sample: x0 " + shape_str(x0.shape()) + " vs eps " + shape_str(eps.shape()));
  if (t < 1 || t > sched.T) throw ContractError("q_sample: t outside 1..T");
  const double ab = sched.ab(t);
  const double c0 = std::sqrt(ab);
  const double ce = std::sqrt(1.0 - ab);
  Tensor out(x0.shape());
  for (long i = 0; i < x0.size(); ++i) out[i] = c0 * x0[i] + ce * eps[i];
  return out;
}

// Ground-truth posterior mean of x_t given (x0, x_{t+1}):
//   mu = sqrt(ab_t)(1 - a_{t+1})/(1 - ab_{t+1}) * x0
//      + sqrt(a_{t+1})(1 - ab_t)/(1 - ab_{t+1}) * x_{t+1}
inline Tensor posterior_mean(const Tensor& x0, const Tensor& x_next, long t,
                             const NoiseSchedule& sched) {
  if (!x0.same_shape(x_next))
    throw ShapeError("posterior_mean: x0 " + shape_str(x0.shape()) + " vs x_next " +
                     shape_str(x_next.shape()));
  if (t < 0 || t >= sched.T) throw ContractError("posterior_mean: t outside 0..T-1");
  const double ab_t = sched.ab(t);
  const double ab_next = sched.ab(t + 1);
  const double a_next = sched.a(t + 1);
  const double denom = 1.0 - ab_next;
  if (denom == 0.0) throw NumericError("posterior_mean: 1 - alpha_bar_{t+1} is zero");
  const double c0 = std::sqrt(ab_t) * (1.0 - a_next) / denom;
  const double cn = std::sqrt(a_next) * (1.0 - ab_t) / denom;
  Tensor out(x0.shape());
  for (long i = 0; i < x0.size(); ++i) out[i] = c0 * x0[i] + cn * x_next[i];
  return out;
}

}  // namespace adt
