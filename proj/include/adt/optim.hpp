// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "adt/tensor.hpp"

namespace adt {

enum class OptimizerKind { kSgd, kAdam };

inline OptimizerKind optimizer_kind_from(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ContractError("unknown optimizer '" + s + "'");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

// SGD is the pseudocode-literal theta <- theta - lr * g; Adam uses
// beta1 = 0.9, beta2 = 0.999, eps = 1e-8, no weight decay.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
    if (!(lr > 0)) throw ContractError("Optimizer: lr must be positive");
  }

  OptimizerKind kind() const { return kind_; }
  double lr() const { return lr_; }
  long step_count() const { return step_; }

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw ContractError("Optimizer: grads/params mismatch");
    if (kind_ == OptimizerKind::kSgd) {
      for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        for (long k = 0; k < p.size(); ++k) p[k] -= lr_ * g[k];
      }
      ++step_;
      return;
    }
    if (m_.empty()) {
      for (size_t i = 0; i < params.size(); ++i) {
        m_.emplace_back(params[i]->shape());
        v_.emplace_back(params[i]->shape());
      }
    }
    ++step_;
    const double b1c = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double b2c = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = grads[i];
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (long k = 0; k < p.size(); ++k) {
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
        const double mh = m[k] / b1c;
        const double vh = v[k] / b2c;
        p[k] -= lr_ * mh / (std::sqrt(vh) + kEps);
      }
    }
  }

  // Checkpoint access.
  std::vector<Tensor>& moment1() { return m_; }
  std::vector<Tensor>& moment2() { return v_; }
  const std::vector<Tensor>& moment1() const { return m_; }
  const std::vector<Tensor>& moment2() const { return v_; }
  void restore(long step, std::vector<Tensor> m, std::vector<Tensor> v) {
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  OptimizerKind kind_ = OptimizerKind::kAdam;
  double lr_ = 1e-3;
  long step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace adt
