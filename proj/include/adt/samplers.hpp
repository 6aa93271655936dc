// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adt/metrics.hpp"
#include "adt/models.hpp"
#include "adt/schedule.hpp"

namespace adt {

// Batched noise predictor: x [n, d], step t -> eps_hat [n, d]. Wraps either
// a trained EpsModel or a closed-form oracle.
using EpsFn = std::function<Tensor(const Tensor&, long)>;

// Captures the model by reference; the model must outlive the function.
inline EpsFn make_eps_fn(const EpsModel& model) {
  return [&model](const Tensor& x, long t) { return eps_predict(model, x, t); };
}

inline EpsFn make_oracle_eps_fn(double mu, double sigma, NoiseSchedule sched) {
  return [mu, sigma, sched = std::move(sched)](const Tensor& x, long t) {
    return optimal_eps_oracle(x, t, mu, sigma, sched);
  };
}

enum class SamplerKind { kAncestral, kDdim, kDpmSolver, kEs };

inline SamplerKind sampler_kind_from(const std::string& s) {
  if (s == "ancestral") return SamplerKind::kAncestral;
  if (s == "ddim") return SamplerKind::kDdim;
  if (s == "dpm_solver") return SamplerKind::kDpmSolver;
  if (s == "es") return SamplerKind::kEs;
  throw ContractError("unknown sampler '" + s + "'");
}

inline std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::kAncestral: return "ancestral";
    case SamplerKind::kDdim: return "ddim";
    case SamplerKind::kDpmSolver: return "dpm_solver";
    case SamplerKind::kEs: return "es";
  }
  return "?";
}

struct SamplerConfig {
  SamplerKind kind = SamplerKind::kAncestral;
  long nfe = 0;
  std::string timestep_selection = "uniform_stride";
  double es_lambda = 0.99;                  // constant ES schedule (stand-in default)
  std::vector<double> es_lambda_schedule;   // optional per-eval schedule, size nfe
  long solver_order = 1;
  std::uint64_t seed = 0;
  // Clamp of the implied x0 prediction, following the reference sampler
  // convention for trained models whose late-step noise error would
  // otherwise be amplified by the schedule tail. Off by default: the bare
  // update formulas are the contract.
  std::optional<double> clip_x0;

  void validate(long T) const {
    if (nfe < 1 || nfe > T)
      throw ContractError("SamplerConfig: nfe must be in 1..T (nfe=" + std::to_string(nfe) +
                          ", T=" + std::to_string(T) + ")");
    if (timestep_selection != "uniform_stride")
      throw ContractError("SamplerConfig: only uniform_stride timestep selection is supported");
    if (solver_order != 1 && solver_order != 2)
      throw ContractError("SamplerConfig: solver_order must be 1 or 2");
    if (clip_x0 && !(*clip_x0 > 0.0)) throw ContractError("SamplerConfig: clip_x0 must be positive");
    if (kind == SamplerKind::kEs) {
      if (!es_lambda_schedule.empty() && static_cast<long>(es_lambda_schedule.size()) != nfe)
        throw ContractError("SamplerConfig: es lambda schedule must have nfe entries");
      for (long i = 0; i < nfe; ++i) {
        const double l = es_lambda_schedule.empty() ? es_lambda : es_lambda_schedule[i];
        if (!(l > 0.0 && l <= 1.0))
          throw ContractError("SamplerConfig: es lambda outside (0, 1]");
      }
    }
  }

  double lambda_at(long pos) const {
    return es_lambda_schedule.empty() ? es_lambda : es_lambda_schedule[pos];
  }
};

// Uniform-stride sub-schedule over 1..T: nfe strictly decreasing evaluation
// times starting at T, then the terminal 0.
inline std::vector<long> sampler_times(long T, long nfe) {
  if (nfe < 1 || nfe > T) throw ContractError("sampler_times: nfe must be in 1..T");
  std::vector<long> times(static_cast<size_t>(nfe) + 1);
  for (long i = 0; i < nfe; ++i)
    times[static_cast<size_t>(i)] =
        std::llround(static_cast<double>(T) * static_cast<double>(nfe - i) / static_cast<double>(nfe));
  times.back() = 0;
  for (size_t i = 1; i < times.size(); ++i)
    if (times[i] >= times[i - 1]) throw ContractError("sampler_times: stride produced a non-decreasing step");
  return times;
}

// --- tensor-level updates (eps_hat already evaluated) ---

// Reverse transition with the alpha_bar ratio as the effective per-step
// alpha for coarse jumps:
//   x_r = (x_s - (1-a_eff)/sqrt(1-ab_s) eps_hat) / sqrt(a_eff) + sqrt(1-a_eff) noise.
inline Tensor ancestral_update(const Tensor& x_s, long s, long r, const Tensor& eps_hat,
                               const Tensor& noise, const NoiseSchedule& sched,
                               std::optional<double> clip_x0 = std::nullopt) {
  if (!(r < s)) throw ContractError("ancestral_update: need r < s");
  if (!x_s.same_shape(eps_hat) || !x_s.same_shape(noise))
    throw ShapeError("ancestral_update: shape mismatch");
  const double ab_s = sched.ab(s);
  const double a_eff = sched.ab_ratio(s, r);
  const double noise_coef = std::sqrt(1.0 - a_eff);
  Tensor out(x_s.shape());
  if (clip_x0) {
    // clamped-x0 route: predict x0, clamp, then take the posterior mean of
    // the coarse step (algebraically the same transition when the clamp is
    // inactive)
    const double ab_r = sched.ab(r);
    const double inv_sqrt_ab = 1.0 / std::sqrt(ab_s);
    const double sig_s = std::sqrt(1.0 - ab_s);
    const double c0 = std::sqrt(ab_r) * (1.0 - a_eff) / (1.0 - ab_s);
    const double cs = std::sqrt(a_eff) * (1.0 - ab_r) / (1.0 - ab_s);
    for (long i = 0; i < out.size(); ++i) {
      const double x0_hat =
          std::clamp(inv_sqrt_ab * (x_s[i] - sig_s * eps_hat[i]), -*clip_x0, *clip_x0);
      out[i] = c0 * x0_hat + cs * x_s[i] + noise_coef * noise[i];
    }
    return out;
  }
  const double inv_sqrt_a = 1.0 / std::sqrt(a_eff);
  const double eps_coef = (1.0 - a_eff) / std::sqrt(1.0 - ab_s);
  for (long i = 0; i < out.size(); ++i)
    out[i] = inv_sqrt_a * (x_s[i] - eps_coef * eps_hat[i]) + noise_coef * noise[i];
  return out;
}

// Deterministic DDIM (eta = 0): x_r = sqrt(ab_r) x0_hat + sqrt(1-ab_r) eps_hat
// with x0_hat = (x_s - sqrt(1-ab_s) eps_hat) / sqrt(ab_s).
inline Tensor ddim_update(const Tensor& x_s, long s, long r, const Tensor& eps_hat,
                          const NoiseSchedule& sched,
                          std::optional<double> clip_x0 = std::nullopt) {
  if (!(r < s)) throw ContractError("ddim_update: need r < s");
  if (!x_s.same_shape(eps_hat)) throw ShapeError("ddim_update: shape mismatch");
  const double ab_s = sched.ab(s);
  const double ab_r = sched.ab(r);
  if (ab_s <= 0.0) throw NumericError("ddim_update: alpha_bar at source step is zero");
  const double c0 = 1.0 / std::sqrt(ab_s);
  const double cs = std::sqrt(1.0 - ab_s);
  const double a_r = std::sqrt(ab_r);
  const double s_r = std::sqrt(1.0 - ab_r);
  Tensor out(x_s.shape());
  for (long i = 0; i < out.size(); ++i) {
    double x0_hat = c0 * (x_s[i] - cs * eps_hat[i]);
    if (clip_x0) x0_hat = std::clamp(x0_hat, -*clip_x0, *clip_x0);
    out[i] = a_r * x0_hat + s_r * eps_hat[i];
  }
  return out;
}

inline double log_snr_half(long t, const NoiseSchedule& sched) {
  const double ab = sched.ab(t);
  return 0.5 * (std::log(ab) - std::log1p(-ab));
}

// Log-SNR-space exponential integrator for noise prediction. Order 1 is
// algebraically identical to DDIM; order 2 adds the standard multistep
// midpoint correction from the previous eps_hat. The correction is skipped
// on the first step (no history) and on the final step to t = 0, where the
// log-SNR gap is unbounded.
inline Tensor dpm_solver_update(const Tensor& x_s, long s, long r, const Tensor& eps_hat, long order,
                                const Tensor* eps_prev, long s_prev, const NoiseSchedule& sched) {
  if (!(r < s)) throw ContractError("dpm_solver_update: need r < s");
  if (!x_s.same_shape(eps_hat)) throw ShapeError("dpm_solver_update: shape mismatch");
  if (order != 1 && order != 2) throw ContractError("dpm_solver_update: order must be 1 or 2");
  const double ab_s = sched.ab(s);
  const double ab_r = sched.ab(r);
  if (ab_s <= 0.0) throw NumericError("dpm_solver_update: alpha_bar at source step is zero");
  const double alpha_s = std::sqrt(ab_s), sigma_s = std::sqrt(1.0 - ab_s);
  const double alpha_r = std::sqrt(ab_r), sigma_r = std::sqrt(1.0 - ab_r);
  const double x_coef = alpha_r / alpha_s;
  // sigma_r * (e^h - 1) written in the cancellation-free form, finite even at r = 0.
  const double eps_coef = alpha_r * sigma_s / alpha_s - sigma_r;

  double corr = 0.0;
  const bool second = order == 2 && eps_prev != nullptr && r > 0;
  if (second) {
    const double h = log_snr_half(r, sched) - log_snr_half(s, sched);
    const double r0 = (log_snr_half(s, sched) - log_snr_half(s_prev, sched)) / h;
    corr = 1.0 / (2.0 * r0);
  }
  Tensor out(x_s.shape());
  for (long i = 0; i < out.size(); ++i) {
    double d = eps_hat[i];
    if (second) d += corr * (eps_hat[i] - (*eps_prev)[i]);
    out[i] = x_coef * x_s[i] - eps_coef * d;
  }
  return out;
}

// Epsilon scaling: shrink the predicted noise before the base update.
inline Tensor es_wrap(const Tensor& eps_hat, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ContractError("es_wrap: lambda outside (0, 1]");
  Tensor out(eps_hat.shape());
  for (long i = 0; i < out.size(); ++i) out[i] = lambda * eps_hat[i];
  return out;
}

// --- model-level steps ---

inline Tensor ancestral_step(const EpsFn& model, const Tensor& x_next, long t_next, long t,
                             const Tensor& noise, const NoiseSchedule& sched,
                             std::optional<double> clip_x0 = std::nullopt) {
  return ancestral_update(x_next, t_next, t, model(x_next, t_next), noise, sched, clip_x0);
}

inline Tensor ddim_step(const EpsFn& model, const Tensor& x_next, long t_next, long t,
                        const NoiseSchedule& sched, std::optional<double> clip_x0 = std::nullopt) {
  return ddim_update(x_next, t_next, t, model(x_next, t_next), sched, clip_x0);
}

struct SolverHistory {
  Tensor eps_prev;
  long t_prev = -1;
  bool has = false;
};

inline Tensor dpm_solver_step(const EpsFn& model, const Tensor& x_next, long t_next, long t,
                              long order, SolverHistory& history, const NoiseSchedule& sched) {
  Tensor eps_hat = model(x_next, t_next);
  Tensor out = dpm_solver_update(x_next, t_next, t, eps_hat, order,
                                 history.has ? &history.eps_prev : nullptr, history.t_prev, sched);
  history.eps_prev = std::move(eps_hat);
  history.t_prev = t_next;
  history.has = true;
  return out;
}

struct Trajectory {
  std::vector<long> times;                       // T = times[0] > ... > 0
  std::vector<std::pair<long, Tensor>> states;   // batch state per time, x_T down to x_0
  SamplerConfig cfg;

  const Tensor& final_samples() const { return states.back().second; }
};

// n reverse chains from x_T ~ N(0, I). Chain i draws all of its noise from
// the stream seeded with seed ^ i, so chain outputs are independent of batch
// layout and of any execution order.
inline Trajectory sample(const EpsFn& model, const SamplerConfig& cfg, long n, long data_dim,
                         const NoiseSchedule& sched) {
  cfg.validate(sched.T);
  if (n < 1) throw ContractError("sample: n must be >= 1");
  Trajectory traj;
  traj.cfg = cfg;
  traj.times = sampler_times(sched.T, cfg.nfe);

  std::vector<Rng> streams;
  streams.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) streams.emplace_back(cfg.seed ^ static_cast<std::uint64_t>(i));

  Tensor x({n, data_dim});
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < data_dim; ++j) x.at(i, j) = streams[static_cast<size_t>(i)].normal();
  traj.states.push_back({sched.T, x});

  SolverHistory history;
  for (size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const long s = traj.times[k];
    const long r = traj.times[k + 1];
    switch (cfg.kind) {
      case SamplerKind::kAncestral:
      case SamplerKind::kEs: {
        Tensor eps_hat = model(x, s);
        if (cfg.kind == SamplerKind::kEs)
          eps_hat = es_wrap(eps_hat, cfg.lambda_at(static_cast<long>(k)));
        Tensor noise({n, data_dim});
        if (r > 0) {
          // No noise on the final step to t = 0.
          for (long i = 0; i < n; ++i)
            for (long j = 0; j < data_dim; ++j)
              noise.at(i, j) = streams[static_cast<size_t>(i)].normal();
        }
        x = ancestral_update(x, s, r, eps_hat, noise, sched, cfg.clip_x0);
        break;
      }
      case SamplerKind::kDdim:
        x = ddim_step(model, x, s, r, sched, cfg.clip_x0);
        break;
      case SamplerKind::kDpmSolver:
        x = dpm_solver_step(model, x, s, r, cfg.solver_order, history, sched);
        break;
    }
    if (x.has_nan()) throw NumericError("sample: NaN state at step t=" + std::to_string(r));
    traj.states.push_back({r, x});
  }
  return traj;
}

}  // namespace adt
