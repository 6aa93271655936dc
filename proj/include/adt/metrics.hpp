// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "adt/rng.hpp"
#include "adt/schedule.hpp"
#include "adt/tensor.hpp"

namespace adt {

// Named scalar metrics with run provenance.
struct MetricEntry {
  long step = 0;
  std::string name;
  double value = 0.0;
};

struct MetricsReport {
  std::vector<MetricEntry> entries;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  void add(long step, const std::string& name, double value) {
    if (!std::isfinite(value))
      throw NumericError("MetricsReport: non-finite value for '" + name + "' at step " +
                         std::to_string(step));
    entries.push_back({step, name, value});
  }

  double last(const std::string& name) const {
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
      if (it->name == name) return it->value;
    throw ContractError("MetricsReport: no entry named '" + name + "'");
  }
};

// Exact 1D Wasserstein-1 between equal-weight empirical measures: mean
// absolute difference of the sorted samples (the sorted coupling is optimal
// in 1D). Unequal counts are equalized by deterministic subsampling of the
// larger set.
inline double w1_1d(std::vector<double> a, std::vector<double> b, std::uint64_t resample_seed = 0) {
  if (a.empty() || b.empty()) throw ContractError("w1_1d: empty input");
  if (a.size() != b.size()) {
    Rng rng(resample_seed);
    auto shrink = [&](std::vector<double>& v, size_t m) {
      // Seeded Fisher-Yates prefix, then truncate.
      for (size_t i = 0; i < m; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(static_cast<long>(v.size() - i)));
        std::swap(v[i], v[j]);
      }
      v.resize(m);
    };
    if (a.size() > b.size())
      shrink(a, b.size());
    else
      shrink(b, a.size());
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

inline std::vector<double> column(const Tensor& t, long c) {
  std::vector<double> out(static_cast<size_t>(t.rows()));
  for (long i = 0; i < t.rows(); ++i) out[static_cast<size_t>(i)] = t.at(i, c);
  return out;
}

inline double w1_1d(const Tensor& a, const Tensor& b, std::uint64_t resample_seed = 0) {
  if (a.cols() != 1 || b.cols() != 1)
    throw ContractError("w1_1d: expected 1D samples (single column)");
  return w1_1d(column(a, 0), column(b, 0), resample_seed);
}

// Average of w1_1d over explicit projection directions (rows of dirs).
inline double sliced_wasserstein_dirs(const Tensor& a, const Tensor& b, const Tensor& dirs) {
  if (a.cols() != b.cols()) throw ShapeError("sliced_wasserstein: dimension mismatch");
  if (dirs.cols() != a.cols()) throw ShapeError("sliced_wasserstein: direction dimension mismatch");
  const long d = a.cols();
  double acc = 0.0;
  std::vector<double> pa(static_cast<size_t>(a.rows()));
  std::vector<double> pb(static_cast<size_t>(b.rows()));
  for (long p = 0; p < dirs.rows(); ++p) {
    for (long i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (long j = 0; j < d; ++j) s += a.at(i, j) * dirs.at(p, j);
      pa[static_cast<size_t>(i)] = s;
    }
    for (long i = 0; i < b.rows(); ++i) {
      double s = 0.0;
      for (long j = 0; j < d; ++j) s += b.at(i, j) * dirs.at(p, j);
      pb[static_cast<size_t>(i)] = s;
    }
    acc += w1_1d(pa, pb, /*resample_seed=*/static_cast<std::uint64_t>(p) + 1);
  }
  return acc / static_cast<double>(dirs.rows());
}

inline Tensor unit_directions(long n_proj, long d, std::uint64_t seed) {
  if (n_proj < 1) throw ContractError("unit_directions: n_proj must be >= 1");
  Rng rng(seed);
  Tensor dirs({n_proj, d});
  for (long p = 0; p < n_proj; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (long j = 0; j < d; ++j) {
        const double v = rng.normal();
        dirs.at(p, j) = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (long j = 0; j < d; ++j) dirs.at(p, j) /= norm;
  }
  return dirs;
}

// Sliced Wasserstein: mean 1D W1 over seeded uniform unit directions. The
// desk-scale surrogate for the distributional sample-quality metrics.
inline double sliced_wasserstein(const Tensor& a, const Tensor& b, long n_proj, std::uint64_t seed) {
  return sliced_wasserstein_dirs(a, b, unit_directions(n_proj, a.cols(), seed));
}

// Closed-form 1D Gaussian KL(N(m1, s1^2) || N(m2, s2^2)).
inline double gaussian_kl(double m1, double s1, double m2, double s2) {
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw ContractError("gaussian_kl: sigmas must be positive");
  return std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5;
}

// Closed-form minimizer of the noise-prediction loss for 1D Gaussian data
// N(mu, sigma^2):  E[eps | x_t] = sqrt(1-ab) (x_t - sqrt(ab) mu) / (ab sigma^2 + 1 - ab).
inline Tensor optimal_eps_oracle(const Tensor& x_t, long t, double data_mu, double data_sigma,
                                 const NoiseSchedule& sched) {
  const double ab = sched.ab(t);
  const double denom = ab * data_sigma * data_sigma + (1.0 - ab);
  if (denom <= 0.0) throw NumericError("optimal_eps_oracle: degenerate schedule/data combination");
  const double c = std::sqrt(1.0 - ab) / denom;
  Tensor out(x_t.shape());
  for (long i = 0; i < x_t.size(); ++i) out[i] = c * (x_t[i] - std::sqrt(ab) * data_mu);
  return out;
}

// Per-step minimum of the noise-prediction loss for 1D Gaussian data: the
// conditional variance E||eps - E[eps|x_t]||^2 = ab sigma^2 / (ab sigma^2 + 1 - ab).
// Limits anchor the algebra: ab -> 0 leaves x_t = eps (minimum 0), ab -> 1
// hides eps entirely (minimum 1). Verified against the Monte-Carlo
// conditional-mean oracle in the data_eval suite.
inline double optimal_eps_loss(long t, double data_sigma, const NoiseSchedule& sched) {
  const double ab = sched.ab(t);
  return ab * data_sigma * data_sigma / (ab * data_sigma * data_sigma + (1.0 - ab));
}

// Average over t ~ U[1, T]; the convergence target of standard training.
inline double optimal_eps_loss_mean(double data_sigma, const NoiseSchedule& sched) {
  double acc = 0.0;
  for (long t = 1; t <= sched.T; ++t) acc += optimal_eps_loss(t, data_sigma, sched);
  return acc / static_cast<double>(sched.T);
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

// Transport-entropy inequality W1 <= sqrt(2 sigma^2 KL) on the Gaussian pair
// N(0, 1-ab_t) vs N(m, 1-ab_t); lhs = |m| exactly, and the bound is tight
// for equal-variance shifts.
inline BoundCheck verify_talagrand(double m, long t, const NoiseSchedule& sched) {
  const double var = 1.0 - sched.ab(t);
  BoundCheck out;
  out.lhs = std::fabs(m);
  if (var <= 0.0) {
    out.rhs = 0.0;
    out.pass = out.lhs <= 1e-12;
    return out;
  }
  const double s = std::sqrt(var);
  out.rhs = std::sqrt(2.0 * var * gaussian_kl(0.0, s, m, s));
  out.pass = out.lhs <= out.rhs + 1e-12;
  return out;
}

}  // namespace adt
