// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "adt/models.hpp"
#include "test_support.hpp"

using namespace adt;

TEST_CASE("zero-initialized final layer predicts zero noise") {
  Rng rng(3);
  EpsModel m = EpsModel::init(2, 16, 2, 8, 100, rng);
  Tensor x = Tensor::randn({5, 2}, rng);
  const Tensor out = eps_predict(m, x, 37);
  for (long i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("eps forward is deterministic and matches the hand-rolled pass") {
  auto build = [] {
    Rng rng(21);
    EpsModel m = EpsModel::init(1, 8, 2, 4, 50, rng);
    // non-zero final layer so the check is not vacuous
    Rng wrng(5);
    m.mlp.layers.back().w = Tensor::uniform(m.mlp.layers.back().w.shape(), wrng, -0.5, 0.5);
    return m;
  };
  const EpsModel m1 = build();
  const EpsModel m2 = build();
  Rng rng(77);
  const Tensor x = Tensor::randn({6, 1}, rng);
  const Tensor a = eps_predict(m1, x, 13);
  const Tensor b = eps_predict(m2, x, 13);
  for (long i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  // independent straight-line evaluation: embed, concat, MLP
  Tensor emb = testsupport::handrolled_embed(13, m1.time_embed.dim);
  Tensor full({x.rows(), 1 + m1.time_embed.dim});
  for (long i = 0; i < x.rows(); ++i) {
    full.at(i, 0) = x.at(i, 0);
    for (long j = 0; j < m1.time_embed.dim; ++j) full.at(i, 1 + j) = emb[j];
  }
  const Tensor want = testsupport::handrolled_mlp_forward(m1.mlp, full);
  CHECK(max_abs_diff(a, want) < 1e-12);
}

TEST_CASE("eps forward rejects out-of-range t") {
  Rng rng(9);
  EpsModel m = EpsModel::init(1, 8, 2, 4, 20, rng);
  Tensor x({2, 1});
  CHECK_THROWS_AS(eps_predict(m, x, 21), ContractError);
  CHECK_THROWS_AS(eps_predict(m, x, -1), ContractError);
}

TEST_CASE("gradient of mean-square eps output w.r.t. x matches finite differences") {
  Rng rng(31);
  EpsModel m = EpsModel::init(2, 8, 2, 6, 50, rng);
  Rng wrng(6);
  m.mlp.layers.back().w = Tensor::uniform(m.mlp.layers.back().w.shape(), wrng, -0.5, 0.5);
  const Tensor x = Tensor::uniform({4, 2}, rng, -1.0, 1.0);

  Tape tape;
  BoundMlp bound = bind_mlp(tape, m.mlp, false);
  Var xin = tape.leaf(x, true);
  tape.backward(tape.mean(tape.square(eps_forward(tape, bound, m, xin, 17L))));
  const Tensor ad = tape.grad(xin);

  const Tensor fd = finite_difference(
      [&](const Tensor& v) {
        Tape t;
        BoundMlp b = bind_mlp(t, m.mlp, false);
        return t.val(t.mean(t.square(eps_forward(t, b, m, t.leaf(v), 17L))))[0];
      },
      x, 1e-5);
  for (long i = 0; i < ad.size(); ++i)
    CHECK(std::fabs(ad[i] - fd[i]) / std::max(std::fabs(fd[i]), 1e-3) < 1e-4);
}

TEST_CASE("consistency model boundary holds bit-exactly at t = 0") {
  Rng rng(41);
  for (int rep = 0; rep < 1000; ++rep) {
    ConsistencyModel m = ConsistencyModel::init(2, 4, 1, 4, 50, rng);
    const Tensor x = Tensor::uniform({1, 2}, rng, -3.0, 3.0);
    const Tensor out = cm_predict(m, x, 0);
    CHECK(max_abs_diff(out, x) == 0.0);
  }
}

TEST_CASE("s_max = 0 degenerates the consistency model to the identity") {
  Rng rng(43);
  ConsistencyModel m = ConsistencyModel::init(2, 8, 2, 4, 50, rng, 1.0, /*s_max=*/0.0);
  const Tensor x = Tensor::randn({5, 2}, rng);
  for (long t : {0L, 1L, 17L, 50L}) CHECK(max_abs_diff(cm_predict(m, x, t), x) == 0.0);
}

TEST_CASE("consistency model is non-degenerate away from t = 0") {
  Rng rng(47);
  ConsistencyModel m = ConsistencyModel::init(2, 16, 2, 8, 50, rng);
  const Tensor x = Tensor::randn({4, 2}, rng);
  const Tensor out = cm_predict(m, x, 25);
  CHECK(max_abs_diff(out, x) > 1e-8);
}

TEST_CASE("time embedding separates steps") {
  Rng rng(53);
  EpsModel m = EpsModel::init(1, 16, 2, 16, 100, rng);
  Rng wrng(8);
  m.mlp.layers.back().w = Tensor::uniform(m.mlp.layers.back().w.shape(), wrng, -0.5, 0.5);
  const Tensor x = Tensor::randn({1, 1}, rng);
  const Tensor r17 = eps_predict(m, x, 17);
  const Tensor r18 = eps_predict(m, x, 18);
  const Tensor r99 = eps_predict(m, x, 99);
  CHECK(max_abs_diff(r17, r18) > 0.0);
  CHECK(max_abs_diff(r17, r99) > 0.0);
}

TEST_CASE("EMA update fixed points and hand value") {
  Rng rng(61);
  MlpParams online = MlpParams::init(2, 4, 1, 2, rng, false);

  EmaPair keep = EmaPair::from(online, 1.0);
  const std::vector<Tensor> before = keep.target;
  MlpParams moved = online;
  for (Tensor* t : moved.tensors())
    for (long k = 0; k < t->size(); ++k) (*t)[k] += 1.0;
  keep.update(moved);
  for (size_t i = 0; i < before.size(); ++i) CHECK(max_abs_diff(keep.target[i], before[i]) == 0.0);

  EmaPair copy = EmaPair::from(online, 0.0);
  copy.update(moved);
  auto moved_tensors = moved.tensors();
  for (size_t i = 0; i < copy.target.size(); ++i)
    CHECK(max_abs_diff(copy.target[i], *moved_tensors[i]) == 0.0);

  // mu = 0.95, target 1.0, online 0.0 -> 0.95
  MlpParams ones = online;
  for (Tensor* t : ones.tensors()) *t = Tensor::full(t->shape(), 1.0);
  MlpParams zeros = online;
  for (Tensor* t : zeros.tensors()) *t = Tensor(t->shape());
  EmaPair p = EmaPair::from(ones, 0.95);
  p.update(zeros);
  for (const Tensor& t : p.target)
    for (long k = 0; k < t.size(); ++k) CHECK(t[k] == 0.95);
}

TEST_CASE("EMA contracts toward a constant online value") {
  Rng rng(67);
  MlpParams online = MlpParams::init(1, 3, 1, 1, rng, false);
  MlpParams zeros = online;
  for (Tensor* t : zeros.tensors()) *t = Tensor(t->shape());

  const double mu = 0.9;
  EmaPair p = EmaPair::from(online, mu);
  std::vector<Tensor> expect = p.target;
  for (int n = 0; n < 25; ++n) {
    p.update(zeros);
    // same-sequence oracle: |target_n - 0| = mu^n |target_0| with the
    // multiplications applied in the same order
    for (auto& t : expect)
      for (long k = 0; k < t.size(); ++k) t[k] = mu * t[k] + (1.0 - mu) * 0.0;
  }
  for (size_t i = 0; i < expect.size(); ++i) CHECK(max_abs_diff(p.target[i], expect[i]) == 0.0);
}

TEST_CASE("EMA rejects mismatched shapes") {
  Rng rng(71);
  MlpParams a = MlpParams::init(2, 4, 1, 2, rng, false);
  MlpParams b = MlpParams::init(2, 5, 1, 2, rng, false);
  EmaPair p = EmaPair::from(a, 0.5);
  CHECK_THROWS_AS(p.update(b), ContractError);
}
