// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "adt/tensor.hpp"

namespace adt {

// Reverse-mode autodiff over a define-by-run tape. The tape is rebuilt per
// training step; nodes are appended in topological order by construction.
//
// Closed primitive set: add, sub, mul, matmul, broadcast_rows, sum, mean,
// square, sqrt, exp, sin, cos, tanh, maximum, reciprocal, concat_cols,
// slice_cols. Everything else in the artifact is a composition of these.
class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
  enum class Op {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kMatmul,
    kBroadcastRows,
    kSum,
    kMean,
    kSquare,
    kSqrt,
    kExp,
    kSin,
    kCos,
    kTanh,
    kMax,
    kRecip,
    kConcatCols,
    kSliceCols,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    long aux0 = 0;  // slice start / broadcast rows
    long aux1 = 0;  // slice end
    Tensor value;
    bool needs_grad = false;
  };

 public:
  Var leaf(Tensor value, bool requires_grad = false) {
    return push({Op::kLeaf, -1, -1, 0, 0, std::move(value), requires_grad});
  }

  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  Var add(Var a, Var b) { return binary_ew(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary_ew(Op::kSub, a, b); }
  Var mul(Var a, Var b) { return binary_ew(Op::kMul, a, b); }
  Var maximum(Var a, Var b) { return binary_ew(Op::kMax, a, b); }

  Var matmul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape().size() != 2 || tb.shape().size() != 2 || ta.cols() != tb.rows())
      throw ShapeError("matmul: incompatible shapes " + shape_str(ta.shape()) + " x " +
                       shape_str(tb.shape()));
    Tensor out({ta.rows(), tb.cols()});
    mm_nn(ta, tb, out);
    return push({Op::kMatmul, a.id, b.id, 0, 0, std::move(out), needs(a) || needs(b)});
  }

  // [n] or [1, n] replicated to [rows, n]; gradient sums over rows.
  Var broadcast_rows(Var v, long rows) {
    const Tensor& tv = val(v);
    if (rows < 1) throw ShapeError("broadcast_rows: rows must be positive");
    if (tv.shape().size() > 2 || (tv.shape().size() == 2 && tv.rows() != 1))
      throw ShapeError("broadcast_rows: expected row vector, got " + shape_str(tv.shape()));
    const long n = tv.size();
    Tensor out({rows, n});
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < n; ++j) out[i * n + j] = tv[j];
    return push({Op::kBroadcastRows, v.id, -1, rows, 0, std::move(out), needs(v)});
  }

  Var sum(Var v) {
    return push({Op::kSum, v.id, -1, 0, 0, Tensor::scalar(val(v).sum()), needs(v)});
  }

  Var mean(Var v) {
    const Tensor& tv = val(v);
    return push({Op::kMean, v.id, -1, 0, 0, Tensor::scalar(tv.sum() / static_cast<double>(tv.size())),
                 needs(v)});
  }

  Var square(Var v) { return unary(Op::kSquare, v, [](double x) { return x * x; }); }
  Var sqrt(Var v) { return unary(Op::kSqrt, v, [](double x) { return std::sqrt(x); }); }
  Var exp(Var v) { return unary(Op::kExp, v, [](double x) { return std::exp(x); }); }
  Var sin(Var v) { return unary(Op::kSin, v, [](double x) { return std::sin(x); }); }
  Var cos(Var v) { return unary(Op::kCos, v, [](double x) { return std::cos(x); }); }
  Var tanh(Var v) { return unary(Op::kTanh, v, [](double x) { return std::tanh(x); }); }
  Var reciprocal(Var v) { return unary(Op::kRecip, v, [](double x) { return 1.0 / x; }); }

  Var concat_cols(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape().size() != 2 || tb.shape().size() != 2 || ta.rows() != tb.rows())
      throw ShapeError("concat_cols: incompatible shapes " + shape_str(ta.shape()) + " and " +
                       shape_str(tb.shape()));
    const long m = ta.rows(), ca = ta.cols(), cb = tb.cols();
    Tensor out({m, ca + cb});
    for (long i = 0; i < m; ++i) {
      for (long j = 0; j < ca; ++j) out[i * (ca + cb) + j] = ta[i * ca + j];
      for (long j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = tb[i * cb + j];
    }
    return push({Op::kConcatCols, a.id, b.id, 0, 0, std::move(out), needs(a) || needs(b)});
  }

  Var slice_cols(Var v, long c0, long c1) {
    const Tensor& tv = val(v);
    if (tv.shape().size() != 2 || c0 < 0 || c1 > tv.cols() || c0 >= c1)
      throw ShapeError("slice_cols: bad range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                       ") for shape " + shape_str(tv.shape()));
    const long m = tv.rows(), c = tv.cols(), w = c1 - c0;
    Tensor out({m, w});
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < w; ++j) out[i * w + j] = tv[i * c + c0 + j];
    return push({Op::kSliceCols, v.id, -1, c0, c1, std::move(out), needs(v)});
  }

  const Tensor& val(Var v) const { return nodes_[check(v)].value; }

  // Gradient of the last backward() output w.r.t. node v. Nodes untouched by
  // the backward sweep report exact zeros.
  Tensor grad(Var v) const {
    const int i = check(v);
    if (i < static_cast<int>(grads_.size()) && !grads_[i].empty()) return grads_[i];
    return Tensor(nodes_[i].value.shape());
  }

  void backward(Var out) {
    const int o = check(out);
    if (nodes_[o].value.size() != 1)
      throw ContractError("backward: output must be scalar, got shape " +
                          shape_str(nodes_[o].value.shape()));
    grads_.assign(nodes_.size(), Tensor());
    if (!nodes_[o].needs_grad) return;
    grads_[o] = Tensor::scalar(1.0);
    for (int i = o; i >= 0; --i) {
      const Node& n = nodes_[i];
      if (!n.needs_grad || grads_[i].empty()) continue;
      propagate(i, n);
    }
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  int check(Var v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw ContractError("Var does not belong to this tape");
    return v.id;
  }

  bool needs(Var v) const { return nodes_[check(v)].needs_grad; }

  Var push(Node n) {
    if (n.op != Op::kLeaf && n.value.has_nan())
      throw NumericError("forward: op " + op_name(n.op) + " produced NaN at node #" +
                         std::to_string(nodes_.size()));
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
  }

  template <class F>
  Var unary(Op op, Var v, F f) {
    const Tensor& tv = val(v);
    Tensor out(tv.shape());
    for (long i = 0; i < tv.size(); ++i) out[i] = f(tv[i]);
    return push({op, v.id, -1, 0, 0, std::move(out), needs(v)});
  }

  // Elementwise with equal shapes, or scalar (1-element) on either side.
  Var binary_ew(Op op, Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    const bool sa = ta.size() == 1, sb = tb.size() == 1;
    if (!sa && !sb && !ta.same_shape(tb))
      throw ShapeError(op_name(op) + ": shape mismatch " + shape_str(ta.shape()) + " vs " +
                       shape_str(tb.shape()));
    const Tensor& big = sa ? tb : ta;
    Tensor out(big.shape());
    for (long i = 0; i < big.size(); ++i) {
      const double x = ta[sa ? 0 : i];
      const double y = tb[sb ? 0 : i];
      switch (op) {
        case Op::kAdd: out[i] = x + y; break;
        case Op::kSub: out[i] = x - y; break;
        case Op::kMul: out[i] = x * y; break;
        case Op::kMax: out[i] = x >= y ? x : y; break;
        default: throw ContractError("binary_ew: bad op");
      }
    }
    return push({op, a.id, b.id, 0, 0, std::move(out), needs(a) || needs(b)});
  }

  Tensor& grad_buf(int i) {
    if (grads_[i].empty()) grads_[i] = Tensor(nodes_[i].value.shape());
    return grads_[i];
  }

  void accum_ew(int parent, const Tensor& g, bool parent_is_scalar, bool negate = false) {
    Tensor& gp = grad_buf(parent);
    if (parent_is_scalar) {
      double acc = 0.0;
      for (long i = 0; i < g.size(); ++i) acc += g[i];
      gp[0] += negate ? -acc : acc;
    } else {
      for (long i = 0; i < g.size(); ++i) gp[i] += negate ? -g[i] : g[i];
    }
  }

  void propagate(int i, const Node& n) {
    const Tensor& g = grads_[i];
    const bool na = n.a >= 0 && nodes_[n.a].needs_grad;
    const bool nb = n.b >= 0 && nodes_[n.b].needs_grad;
    switch (n.op) {
      case Op::kLeaf:
        return;
      case Op::kAdd: {
        if (na) accum_ew(n.a, g, nodes_[n.a].value.size() == 1 && g.size() > 1);
        if (nb) accum_ew(n.b, g, nodes_[n.b].value.size() == 1 && g.size() > 1);
        return;
      }
      case Op::kSub: {
        if (na) accum_ew(n.a, g, nodes_[n.a].value.size() == 1 && g.size() > 1);
        if (nb) accum_ew(n.b, g, nodes_[n.b].value.size() == 1 && g.size() > 1, /*negate=*/true);
        return;
      }
      case Op::kMul: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        const bool sa = ta.size() == 1 && g.size() > 1;
        const bool sb = tb.size() == 1 && g.size() > 1;
        if (na) {
          Tensor& ga = grad_buf(n.a);
          if (sa) {
            double acc = 0.0;
            for (long k = 0; k < g.size(); ++k) acc += g[k] * tb[sb ? 0 : k];
            ga[0] += acc;
          } else {
            for (long k = 0; k < g.size(); ++k) ga[k] += g[k] * tb[sb ? 0 : k];
          }
        }
        if (nb) {
          Tensor& gb = grad_buf(n.b);
          if (sb) {
            double acc = 0.0;
            for (long k = 0; k < g.size(); ++k) acc += g[k] * ta[sa ? 0 : k];
            gb[0] += acc;
          } else {
            for (long k = 0; k < g.size(); ++k) gb[k] += g[k] * ta[sa ? 0 : k];
          }
        }
        return;
      }
      case Op::kMax: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        const bool sa = ta.size() == 1 && g.size() > 1;
        const bool sb = tb.size() == 1 && g.size() > 1;
        // Ties route to the first operand.
        if (na) {
          Tensor& ga = grad_buf(n.a);
          for (long k = 0; k < g.size(); ++k) {
            const double x = ta[sa ? 0 : k], y = tb[sb ? 0 : k];
            if (x >= y) ga[sa ? 0 : k] += g[k];
          }
        }
        if (nb) {
          Tensor& gb = grad_buf(n.b);
          for (long k = 0; k < g.size(); ++k) {
            const double x = ta[sa ? 0 : k], y = tb[sb ? 0 : k];
            if (x < y) gb[sb ? 0 : k] += g[k];
          }
        }
        return;
      }
      case Op::kMatmul: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        if (na) mm_nt_accum(g, tb, grad_buf(n.a));  // dA += G * B^T
        if (nb) mm_tn_accum(ta, g, grad_buf(n.b));  // dB += A^T * G
        return;
      }
      case Op::kBroadcastRows: {
        if (!na) return;
        Tensor& gv = grad_buf(n.a);
        const long rows = n.aux0, w = gv.size();
        for (long r = 0; r < rows; ++r)
          for (long j = 0; j < w; ++j) gv[j] += g[r * w + j];
        return;
      }
      case Op::kSum: {
        if (!na) return;
        Tensor& ga = grad_buf(n.a);
        for (long k = 0; k < ga.size(); ++k) ga[k] += g[0];
        return;
      }
      case Op::kMean: {
        if (!na) return;
        Tensor& ga = grad_buf(n.a);
        const double s = g[0] / static_cast<double>(ga.size());
        for (long k = 0; k < ga.size(); ++k) ga[k] += s;
        return;
      }
      case Op::kSquare:
        return unary_back(n, g, [&](long k) { return 2.0 * nodes_[n.a].value[k]; });
      case Op::kSqrt:
        return unary_back(n, g, [&](long k) { return 0.5 / n.value[k]; });
      case Op::kExp:
        return unary_back(n, g, [&](long k) { return n.value[k]; });
      case Op::kSin:
        return unary_back(n, g, [&](long k) { return std::cos(nodes_[n.a].value[k]); });
      case Op::kCos:
        return unary_back(n, g, [&](long k) { return -std::sin(nodes_[n.a].value[k]); });
      case Op::kTanh:
        return unary_back(n, g, [&](long k) { return 1.0 - n.value[k] * n.value[k]; });
      case Op::kRecip:
        return unary_back(n, g, [&](long k) { return -n.value[k] * n.value[k]; });
      case Op::kConcatCols: {
        const long m = n.value.rows();
        const long ca = nodes_[n.a].value.cols(), cb = nodes_[n.b].value.cols();
        if (na) {
          Tensor& ga = grad_buf(n.a);
          for (long i = 0; i < m; ++i)
            for (long j = 0; j < ca; ++j) ga[i * ca + j] += g[i * (ca + cb) + j];
        }
        if (nb) {
          Tensor& gb = grad_buf(n.b);
          for (long i = 0; i < m; ++i)
            for (long j = 0; j < cb; ++j) gb[i * cb + j] += g[i * (ca + cb) + ca + j];
        }
        return;
      }
      case Op::kSliceCols: {
        if (!na) return;
        Tensor& gv = grad_buf(n.a);
        const long m = n.value.rows(), w = n.value.cols(), c = nodes_[n.a].value.cols();
        for (long i = 0; i < m; ++i)
          for (long j = 0; j < w; ++j) gv[i * c + n.aux0 + j] += g[i * w + j];
        return;
      }
    }
  }

  template <class DF>
  void unary_back(const Node& n, const Tensor& g, DF df) {
    if (n.a < 0 || !nodes_[n.a].needs_grad) return;
    Tensor& ga = grad_buf(n.a);
    for (long k = 0; k < g.size(); ++k) ga[k] += g[k] * df(k);
  }

  // Accumulating row-major kernel, 4-row blocked so each B row is reused
  // across four A rows. Per output element the p-order of the fused
  // multiply-adds is unchanged by the blocking, so results are deterministic.
  static void mm_accum_raw(const double* __restrict pa, const double* __restrict pb,
                           double* __restrict pc, long m, long kk, long nn) {
    long i = 0;
    for (; i + 4 <= m; i += 4) {
      double* c0 = pc + i * nn;
      double* c1 = c0 + nn;
      double* c2 = c1 + nn;
      double* c3 = c2 + nn;
      for (long p = 0; p < kk; ++p) {
        const double a0 = pa[(i + 0) * kk + p];
        const double a1 = pa[(i + 1) * kk + p];
        const double a2 = pa[(i + 2) * kk + p];
        const double a3 = pa[(i + 3) * kk + p];
        const double* bp = pb + p * nn;
        for (long j = 0; j < nn; ++j) {
          const double bj = bp[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      }
    }
    for (; i < m; ++i) {
      double* ci = pc + i * nn;
      for (long p = 0; p < kk; ++p) {
        const double aip = pa[i * kk + p];
        const double* bp = pb + p * nn;
        for (long j = 0; j < nn; ++j) ci[j] += aip * bp[j];
      }
    }
  }

  static std::vector<double> transposed(const double* src, long rows, long cols) {
    std::vector<double> out(static_cast<size_t>(rows * cols));
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) out[static_cast<size_t>(j * rows + i)] = src[i * cols + j];
    return out;
  }

  static void mm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
    mm_accum_raw(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  }

  // dA += G * B^T with G [m,n], B [k,n] -> dA [m,k]
  static void mm_nt_accum(const Tensor& g, const Tensor& b, Tensor& da) {
    const std::vector<double> bt = transposed(b.data(), b.rows(), b.cols());  // [n,k]
    mm_accum_raw(g.data(), bt.data(), da.data(), g.rows(), g.cols(), b.rows());
  }

  // dB += A^T * G with A [m,k], G [m,n] -> dB [k,n]
  static void mm_tn_accum(const Tensor& a, const Tensor& g, Tensor& db) {
    const std::vector<double> at = transposed(a.data(), a.rows(), a.cols());  // [k,m]
    mm_accum_raw(at.data(), g.data(), db.data(), a.cols(), a.rows(), g.cols());
  }

  static std::string op_name(Op op) {
    switch (op) {
      case Op::kLeaf: return "leaf";
      case Op::kAdd: return "add";
      case Op::kSub: return "sub";
      case Op::kMul: return "mul";
      case Op::kMatmul: return "matmul";
      case Op::kBroadcastRows: return "broadcast_rows";
      case Op::kSum: return "sum";
      case Op::kMean: return "mean";
      case Op::kSquare: return "square";
      case Op::kSqrt: return "sqrt";
      case Op::kExp: return "exp";
      case Op::kSin: return "sin";
      case Op::kCos: return "cos";
      case Op::kTanh: return "tanh";
      case Op::kMax: return "max";
      case Op::kRecip: return "reciprocal";
      case Op::kConcatCols: return "concat_cols";
      case Op::kSliceCols: return "slice_cols";
    }
    return "?";
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator*(Var a, double c) { return a.tape->mul(a, a.tape->constant(c)); }
inline Var operator*(double c, Var a) { return a.tape->mul(a.tape->constant(c), a); }
inline Var operator+(Var a, double c) { return a.tape->add(a, a.tape->constant(c)); }
inline Var operator-(Var a, double c) { return a.tape->sub(a, a.tape->constant(c)); }

// abs(x) composed as max(x, -x); ties at 0 give subgradient +1 via the
// first-operand rule, which is fine for the l1 metric.
inline Var vabs(Var x) { return x.tape->maximum(x, x.tape->sub(x.tape->constant(0.0), x)); }

// Central-difference gradient estimate; the independent oracle used by
// gradcheck suites. f must be a deterministic scalar function of x.
inline Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                double h) {
  if (!(h > 0)) throw ContractError("finite_difference: h must be positive");
  Tensor g(x.shape());
  Tensor xp = x;
  for (long i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace adt
