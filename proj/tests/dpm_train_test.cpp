// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <span>

#include "adt/dpm_train.hpp"
#include "test_support.hpp"

using namespace adt;

namespace {

// eps model with nonzero output for loss tests
EpsModel random_eps_model(long data_dim, long T, std::uint64_t seed) {
  Rng rng(seed);
  EpsModel m = EpsModel::init(data_dim, 8, 2, 4, T, rng);
  m.mlp.layers.back().w = Tensor::uniform(m.mlp.layers.back().w.shape(), rng, -0.5, 0.5);
  return m;
}

double straight_line_at_loss(const EpsModel& m, const Tensor& x0, long t, const Tensor& eps,
                             const Tensor& delta, const NoiseSchedule& sched, double lambda_t) {
  const long B = x0.rows(), d = x0.cols();
  const double ab = sched.ab(t);
  Tensor input({B, d});
  for (long i = 0; i < B * d; ++i)
    input[i] = std::sqrt(ab) * x0[i] + std::sqrt(1.0 - ab) * eps[i] + delta[i];
  Tensor emb = testsupport::handrolled_embed(t, m.time_embed.dim);
  Tensor full({B, d + m.time_embed.dim});
  for (long i = 0; i < B; ++i) {
    for (long j = 0; j < d; ++j) full.at(i, j) = input.at(i, j);
    for (long j = 0; j < m.time_embed.dim; ++j) full.at(i, d + j) = emb[j];
  }
  const Tensor pred = testsupport::handrolled_mlp_forward(m.mlp, full);
  double acc = 0.0;
  for (long i = 0; i < B * d; ++i) {
    const double target = eps[i] + delta[i] / std::sqrt(1.0 - ab);
    const double r = pred[i] - target;
    acc += r * r;
  }
  return lambda_t * acc / static_cast<double>(B);
}

}  // namespace

TEST_CASE("standard loss is zero for a model that returns its noise argument") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(5);
  const Tensor x0 = Tensor::randn({8, 2}, rng);
  const Tensor eps = Tensor::randn({8, 2}, rng);
  Tape tape;
  const long ts[1] = {17};
  Var loss = standard_loss_graph(
      tape, [&](Tape& tp, Var, std::span<const long>) { return tp.leaf(eps, false); }, x0,
      std::span<const long>(ts), eps, sched);
  CHECK(tape.val(loss)[0] == 0.0);
}

TEST_CASE("standard loss of the zero model is the chi-square mean") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(7);
  const long d = 3;
  EpsModel m = EpsModel::init(d, 8, 2, 4, 50, rng);  // zero final layer: eps_hat == 0
  const Tensor x0 = Tensor::randn({10000, d}, rng);
  const Tensor eps = Tensor::randn({10000, d}, rng);
  const double loss = standard_loss(m, x0, 11, eps, sched);
  CHECK(std::fabs(loss - static_cast<double>(d)) / static_cast<double>(d) < 0.05);
}

TEST_CASE("standard loss gradient matches finite differences") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  EpsModel m = random_eps_model(1, 50, 11);
  Rng rng(13);
  const Tensor x0 = Tensor::randn({4, 1}, rng);
  const Tensor eps = Tensor::randn({4, 1}, rng);
  const long ts[1] = {23};

  Tape tape;
  BoundMlp bound = bind_mlp(tape, m.mlp, true);
  Var loss = standard_loss_graph(
      tape,
      [&](Tape& tp, Var x, std::span<const long> tss) { return eps_forward(tp, bound, m, x, tss); },
      x0, std::span<const long>(ts), eps, sched);
  tape.backward(loss);

  auto tensors = m.mlp.tensors();
  auto params = bound.params();
  for (size_t i = 0; i < tensors.size(); ++i) {
    const Tensor ad = tape.grad(params[i]);
    const Tensor fd = finite_difference(
        [&](const Tensor& v) {
          EpsModel q = m;
          *q.mlp.tensors()[i] = v;
          return standard_loss(q, x0, 23, eps, sched);
        },
        *tensors[i], 1e-5);
    for (long k = 0; k < ad.size(); ++k)
      CHECK(std::fabs(ad[k] - fd[k]) / std::max(std::fabs(fd[k]), 1e-3) < 1e-4);
  }
}

TEST_CASE("at loss with delta = 0 equals the standard loss exactly") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 100);
  EpsModel m = random_eps_model(2, 100, 17);
  Rng rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor x0 = Tensor::randn({6, 2}, rng);
    const Tensor eps = Tensor::randn({6, 2}, rng);
    const long t = rng.below(100) + 1;
    const Tensor zero({6, 2});
    CHECK(at_loss(m, x0, t, eps, zero, sched) == standard_loss(m, x0, t, eps, sched));
  }
}

TEST_CASE("the affine oracle denoiser zeroes the adversarial loss for every delta") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 100);
  Rng rng(23);
  const ATConfig atc;  // K = 3, alpha = 0.1: deltas tested up to the implicit radius
  for (int rep = 0; rep < 1000; ++rep) {
    const long t = rng.below(100) + 1;
    const long B = 4, d = 2;
    const Tensor x0 = Tensor::randn({B, d}, rng);
    const Tensor eps = Tensor::randn({B, d}, rng);
    Tensor delta = Tensor::randn({B, d}, rng);
    const double radius = static_cast<double>(atc.K) * atc.adv_lr;
    const double n = delta.norm2();
    const double want_norm = rng.uniform(0.0, radius);
    for (long i = 0; i < delta.size(); ++i) delta[i] *= want_norm / n;

    const double ab = sched.ab(t);
    Tape tape;
    Var dvar = tape.leaf(delta, false);
    const long ts[1] = {t};
    // oracle: eps_theta(y, t) = (y - sqrt(ab) x0) / sqrt(1 - ab)
    Var loss = at_loss_graph(
        tape,
        [&](Tape& tp, Var y, std::span<const long>) {
          Var shifted = tp.sub(y, tp.mul(tp.leaf(x0, false), tp.constant(std::sqrt(ab))));
          return tp.mul(shifted, tp.constant(1.0 / std::sqrt(1.0 - ab)));
        },
        x0, std::span<const long>(ts), eps, dvar, sched);
    CHECK(tape.val(loss)[0] < 1e-20);
  }
}

TEST_CASE("at loss matches a straight-line re-evaluation") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  EpsModel m = random_eps_model(2, 50, 29);
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const Tensor x0 = Tensor::randn({5, 2}, rng);
    const Tensor eps = Tensor::randn({5, 2}, rng);
    const Tensor delta = Tensor::uniform({5, 2}, rng, -0.3, 0.3);
    const long t = rng.below(50) + 1;
    const double got = at_loss(m, x0, t, eps, delta, sched, 1.0);
    const double want = straight_line_at_loss(m, x0, t, eps, delta, sched, 1.0);
    CHECK(std::fabs(got - want) < 1e-12 * std::max(1.0, std::fabs(want)));
  }
}

TEST_CASE("at loss honors the loss weighting") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  EpsModel m = random_eps_model(1, 50, 37);
  Rng rng(41);
  const Tensor x0 = Tensor::randn({4, 1}, rng);
  const Tensor eps = Tensor::randn({4, 1}, rng);
  const Tensor delta({4, 1});
  const double base = at_loss(m, x0, 9, eps, delta, sched, 1.0);
  const double doubled = at_loss(m, x0, 9, eps, delta, sched, 2.0);
  CHECK(doubled == Catch::Approx(2.0 * base).epsilon(1e-15));
}

TEST_CASE("at loss rejects a degenerate target shift") {
  const NoiseSchedule ones = NoiseSchedule::from_alphas({1.0, 0.5});
  EpsModel m = random_eps_model(1, 2, 43);
  Rng rng(47);
  const Tensor x0 = Tensor::randn({2, 1}, rng);
  const Tensor eps = Tensor::randn({2, 1}, rng);
  const Tensor delta = Tensor::full({2, 1}, 0.1);
  CHECK_THROWS_AS(at_loss(m, x0, 1, eps, delta, ones), NumericError);  // ab_1 == 1
}

TEST_CASE("normalized ascent step geometry") {
  Rng rng(53);
  const Tensor zero({3, 2});
  Tensor g = Tensor::randn({3, 2}, rng);

  // K = 1 from delta = 0: the new norm is exactly alpha
  const Tensor stepped = at_inner_ascent(g, zero, 0.25);
  CHECK(std::fabs(stepped.norm2() - 0.25) < 1e-12);

  // zero gradient: no-op
  const Tensor same = at_inner_ascent(Tensor({3, 2}), stepped, 0.25);
  CHECK(max_abs_diff(same, stepped) == 0.0);

  // K steps stay inside the K * alpha ball
  Tensor delta({3, 2});
  const double alpha = 0.1;
  const long K = 5;
  for (long i = 0; i < K; ++i) {
    Tensor gi = Tensor::randn({3, 2}, rng);
    delta = at_inner_ascent(gi, delta, alpha);
    CHECK(delta.norm2() <= static_cast<double>(i + 1) * alpha + 1e-12);
  }
  CHECK(delta.norm2() <= static_cast<double>(K) * alpha + 1e-12);
}

TEST_CASE("one small ascent step does not decrease the loss (first order)") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(59);
  long ok = 0;
  const long trials = 1000;
  for (long rep = 0; rep < trials; ++rep) {
    EpsModel m = random_eps_model(1, 50, 1000 + static_cast<std::uint64_t>(rep));
    const Tensor x0 = Tensor::randn({2, 1}, rng);
    const Tensor eps = Tensor::randn({2, 1}, rng);
    Tensor delta = Tensor::uniform({2, 1}, rng, -0.05, 0.05);
    const long t = rng.below(49) + 2;  // keep 1/sqrt(1-ab) moderate

    Tape tape;
    BoundMlp bound = bind_mlp(tape, m.mlp, false);
    Var dvar = tape.leaf(delta, true);
    const long ts[1] = {t};
    Var loss = at_loss_graph(
        tape,
        [&](Tape& tp, Var x, std::span<const long> tss) { return eps_forward(tp, bound, m, x, tss); },
        x0, std::span<const long>(ts), eps, dvar, sched);
    const double before = tape.val(loss)[0];
    tape.backward(loss);
    const Tensor ascended = at_inner_ascent(tape.grad(dvar), delta, 1e-3);
    const double after = at_loss(m, x0, t, eps, ascended, sched);
    if (after >= before - 1e-12) ++ok;
  }
  CHECK(ok >= 950);
}

TEST_CASE("at_train_step performs K updates and bounds the perturbation") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng seed_rng(61);
  EpsModel m = EpsModel::init(1, 16, 2, 8, 50, seed_rng);
  Optimizer opt(OptimizerKind::kAdam, 1e-3);
  EmaPair ema = EmaPair::from(m.mlp, 0.999);
  ATConfig atc;
  atc.K = 3;
  atc.adv_lr = 0.1;
  TrainConfig tc;
  tc.batch_size = 16;
  Rng rng(63);
  const Tensor batch = Tensor::randn({16, 1}, rng);
  const StepReport rep = at_train_step(m, opt, ema, batch, atc, tc, sched, rng);
  CHECK(rep.updates == 3);
  CHECK(opt.step_count() == 3);
  CHECK(rep.delta_norm <= 3 * 0.1 + 1e-12);
  CHECK(rep.losses.size() == 3);
}

TEST_CASE("free-AT with K = 1 reproduces the standard trajectory") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  auto init = [] {
    Rng rng(67);
    return EpsModel::init(1, 16, 2, 8, 50, rng);
  };
  EpsModel a = init(), b = init();
  Optimizer oa(OptimizerKind::kAdam, 1e-3), ob(OptimizerKind::kAdam, 1e-3);
  EmaPair ea = EmaPair::from(a.mlp, 0.999), eb = EmaPair::from(b.mlp, 0.999);
  ATConfig atc;
  atc.K = 1;
  atc.adv_lr = 1e-12;
  TrainConfig tc;
  tc.batch_size = 8;
  Rng ra(71), rb(71);
  Rng data_rng(73);
  for (int step = 0; step < 5; ++step) {
    const Tensor batch = Tensor::randn({8, 1}, data_rng);
    at_train_step(a, oa, ea, batch, atc, tc, sched, ra);
    standard_train_step(b, ob, eb, batch, tc, sched, rb);
  }
  double dist = 0.0;
  auto ta = a.mlp.tensors(), tb = b.mlp.tensors();
  for (size_t i = 0; i < ta.size(); ++i) {
    for (long k = 0; k < ta[i]->size(); ++k) {
      const double diff = (*ta[i])[k] - (*tb[i])[k];
      dist += diff * diff;
    }
  }
  CHECK(std::sqrt(dist) < 1e-8);
}

TEST_CASE("training trajectories are bit-identical under a fixed seed") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  auto run = [&] {
    Rng rng(81);
    EpsModel m = EpsModel::init(1, 8, 2, 4, 50, rng);
    Optimizer opt(OptimizerKind::kAdam, 1e-3);
    EmaPair ema = EmaPair::from(m.mlp, 0.999);
    ATConfig atc;
    atc.K = 2;
    atc.adv_lr = 0.05;
    TrainConfig tc;
    tc.batch_size = 8;
    Rng train_rng(83);
    Rng data_rng(85);
    for (int step = 0; step < 100; ++step) {
      const Tensor batch = Tensor::randn({8, 1}, data_rng);
      at_train_step(m, opt, ema, batch, atc, tc, sched, train_rng);
    }
    return m;
  };
  const EpsModel m1 = run();
  const EpsModel m2 = run();
  auto t1 = m1.mlp.tensors(), t2 = m2.mlp.tensors();
  for (size_t i = 0; i < t1.size(); ++i)
    for (long k = 0; k < t1[i]->size(); ++k) CHECK((*t1[i])[k] == (*t2[i])[k]);
}

TEST_CASE("train loop: zero iterations is a no-op") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(91);
  EpsModel m = EpsModel::init(1, 8, 2, 4, 50, rng);
  std::vector<Tensor> snapshot;
  for (Tensor* t : m.mlp.tensors()) snapshot.push_back(*t);
  Optimizer opt(OptimizerKind::kAdam, 1e-3);
  EmaPair ema = EmaPair::from(m.mlp, 0.999);
  ATConfig atc;
  TrainConfig tc;
  tc.iterations = 0;
  Rng train_rng(93);
  const Tensor data = Tensor::randn({64, 1}, rng);
  const TrainSummary s =
      train_dpm(TrainMode::kStandard, m, opt, ema, data, atc, tc, sched, train_rng);
  CHECK(s.updates == 0);
  auto after = m.mlp.tensors();
  for (size_t i = 0; i < after.size(); ++i) CHECK(max_abs_diff(*after[i], snapshot[i]) == 0.0);
}

TEST_CASE("adversarial training loss decreases in moving average (smoke)") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(97);
  EpsModel m = EpsModel::init(1, 32, 2, 8, 50, rng);
  Optimizer opt(OptimizerKind::kAdam, 2e-3);
  EmaPair ema = EmaPair::from(m.mlp, 0.999);
  ATConfig atc;
  atc.K = 3;
  atc.adv_lr = 0.05;
  TrainConfig tc;
  tc.batch_size = 32;
  tc.iterations = 1200;
  Rng train_rng(101);
  const Tensor data = Tensor::randn({2048, 1}, rng);
  const TrainSummary s =
      train_dpm(TrainMode::kAdversarial, m, opt, ema, data, atc, tc, sched, train_rng);
  REQUIRE(s.losses.size() >= 1200);
  auto avg = [&](size_t lo, size_t hi) {
    double acc = 0.0;
    for (size_t i = lo; i < hi; ++i) acc += s.losses[i];
    return acc / static_cast<double>(hi - lo);
  };
  const double head = avg(0, 100);
  const double tail = avg(s.losses.size() - 100, s.losses.size());
  CHECK(std::isfinite(head));
  CHECK(std::isfinite(tail));
  CHECK(tail < head);
}

TEST_CASE("per-example t control arm runs and stays finite") {
  const NoiseSchedule sched = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(103);
  EpsModel m = EpsModel::init(1, 8, 2, 4, 50, rng);
  Optimizer opt(OptimizerKind::kAdam, 1e-3);
  EmaPair ema = EmaPair::from(m.mlp, 0.999);
  ATConfig atc;
  atc.K = 2;
  TrainConfig tc;
  tc.batch_size = 8;
  tc.per_example_t = true;
  Rng train_rng(107);
  const Tensor batch = Tensor::randn({8, 1}, rng);
  const StepReport rep = at_train_step(m, opt, ema, batch, atc, tc, sched, train_rng);
  CHECK(rep.updates == 2);
  for (double l : rep.losses) CHECK(std::isfinite(l));
}
