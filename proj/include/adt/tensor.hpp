// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "adt/common.hpp"
#include "adt/rng.hpp"

namespace adt {

// Dense f64 tensor, row-major. Plain value type; tape linkage lives in
// tape.hpp.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(check_numel(shape_), 0.0) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<long>(data_.size()) != check_numel(shape_))
      throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor full(Shape shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }

  static Tensor randn(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = rng.normal();
    return t;
  }

  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = rng.uniform(lo, hi);
    return t;
  }

  const Shape& shape() const { return shape_; }
  long size() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  long rows() const { return shape_.size() == 2 ? shape_[0] : (shape_.empty() ? 0 : 1); }
  long cols() const { return shape_.size() == 2 ? shape_[1] : (shape_.empty() ? 0 : shape_[0]); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }
  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }

  double at(long r, long c) const { return data_[static_cast<size_t>(r * cols() + c)]; }
  double& at(long r, long c) { return data_[static_cast<size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool has_nan() const {
    for (double x : data_)
      if (std::isnan(x)) return true;
    return false;
  }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  // Sequential flat-index reduction; the fixed order is what makes training
  // trajectories bit-reproducible.
  double sum() const {
    double acc = 0.0;
    for (double x : data_) acc += x;
    return acc;
  }

  double norm2() const {
    double acc = 0.0;
    for (double x : data_) acc += x * x;
    return std::sqrt(acc);
  }

 private:
  static long check_numel(const Shape& s) {
    for (long d : s)
      if (d <= 0) throw ShapeError("Tensor: non-positive dimension in shape " + shape_str(s));
    return shape_numel(s);
  }

  Shape shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("max_abs_diff: shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double m = 0.0;
  for (long i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace adt
