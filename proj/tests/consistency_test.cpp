// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "adt/consistency.hpp"
#include "test_support.hpp"

using namespace adt;

namespace {

ConsistencyModel identity_cm(long data_dim, long T, std::uint64_t seed) {
  Rng rng(seed);
  return ConsistencyModel::init(data_dim, 8, 2, 4, T, rng, 1.0, /*s_max=*/0.0);
}

ConsistencyModel random_cm(long data_dim, long T, std::uint64_t seed) {
  Rng rng(seed);
  return ConsistencyModel::init(data_dim, 8, 2, 4, T, rng);
}

EpsFn zero_teacher() {
  return [](const Tensor& x, long) { return Tensor(x.shape()); };
}

}  // namespace

TEST_CASE("zero-length euler step is the identity (test hook)") {
  Rng rng(3);
  const Tensor x = Tensor::randn({4, 2}, rng);
  const Tensor eps = Tensor::randn({4, 2}, rng);
  const Tensor got = phi_hat_euler_raw(x, eps, 0.5, 0.0);
  CHECK(max_abs_diff(got, x) == 0.0);
}

TEST_CASE("ddim-solver phi with a zero teacher rescales the signal") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  Rng rng(5);
  const Tensor x = Tensor::randn({4, 1}, rng);
  const Tensor got = phi_hat(x, 21, 20, zero_teacher(), OdeSolverKind::kDdim, s);
  const double scale = std::sqrt(s.ab(20) / s.ab(21));
  for (long i = 0; i < x.size(); ++i) CHECK(got[i] == Catch::Approx(scale * x[i]).epsilon(1e-14));
  CHECK_THROWS_AS(phi_hat(x, 20, 20, zero_teacher(), OdeSolverKind::kDdim, s), ContractError);
}

TEST_CASE("euler phi with the exact score keeps the forward marginal") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const double mu = 0.3, sigma = 1.2;
  const EpsFn teacher = make_oracle_eps_fn(mu, sigma, s);
  const long n = 100000;
  Rng rng(7);
  for (long t : {10L, 25L, 40L}) {
    Tensor x_next({n, 1});
    std::vector<double> truth(n);
    for (long i = 0; i < n; ++i) {
      const double x0 = mu + sigma * rng.normal();
      x_next.at(i, 0) = std::sqrt(s.ab(t + 1)) * x0 + std::sqrt(1 - s.ab(t + 1)) * rng.normal();
      const double y0 = mu + sigma * rng.normal();
      truth[static_cast<size_t>(i)] =
          std::sqrt(s.ab(t)) * y0 + std::sqrt(1 - s.ab(t)) * rng.normal();
    }
    const Tensor phi = phi_hat(x_next, t + 1, t, teacher, OdeSolverKind::kEuler, s);
    INFO("t = " << t);
    CHECK(w1_1d(column(phi, 0), truth) < 0.03);
  }
}

TEST_CASE("cd loss with identity nets and zero teacher is computable by hand") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel id = identity_cm(1, 50, 11);
  Rng rng(13);
  const long t = 19;
  const Tensor x_next = Tensor::randn({64, 1}, rng);
  CdConfig cfg;
  cfg.solver = OdeSolverKind::kDdim;
  const double got = cd_loss(id, id, x_next, t + 1, t, zero_teacher(), cfg, s);
  const double scale = std::sqrt(s.ab(t) / s.ab(t + 1));
  double want = 0.0;
  for (long i = 0; i < x_next.size(); ++i) {
    const double r = x_next[i] - scale * x_next[i];
    want += r * r;
  }
  want /= static_cast<double>(x_next.rows());
  CHECK(got == Catch::Approx(want).epsilon(1e-13));
}

TEST_CASE("target branch passes through its input exactly at t = 0") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel student = random_cm(1, 50, 17);
  const ConsistencyModel target = random_cm(1, 50, 19);
  Rng rng(23);
  const Tensor x_next = Tensor::randn({16, 1}, rng);
  const Tensor delta = Tensor::uniform({16, 1}, rng, -0.1, 0.1);
  CdConfig cfg;
  const Tensor phi = phi_hat(x_next, 1, 0, zero_teacher(), cfg.solver, s);

  Tape tape;
  BoundMlp sb = bind_mlp(tape, student.mlp, false);
  BoundMlp tb = bind_mlp(tape, target.mlp, false);
  Var dvar = tape.leaf(delta, false);
  const double got =
      tape.val(cd_loss_graph(tape, student, sb, target, tb, x_next, 1, 0, phi, dvar, cfg))[0];

  // boundary: f_target(phi + delta, 0) == phi + delta regardless of parameters
  const Tensor student_out = cm_predict(student, x_next, 1);
  double want = 0.0;
  for (long i = 0; i < x_next.size(); ++i) {
    const double r = student_out[i] - (phi[i] + delta[i]);
    want += r * r;
  }
  want /= static_cast<double>(x_next.rows());
  CHECK(got == Catch::Approx(want).epsilon(1e-13));
}

TEST_CASE("stop-gradient: target parameters receive exactly zero gradient") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel student = random_cm(2, 50, 29);
  const ConsistencyModel target = random_cm(2, 50, 31);
  Rng rng(37);
  const Tensor x_next = Tensor::randn({8, 2}, rng);
  CdConfig cfg;
  const Tensor phi = phi_hat(x_next, 26, 25, zero_teacher(), cfg.solver, s);

  Tape tape;
  BoundMlp sb = bind_mlp(tape, student.mlp, true);
  BoundMlp tb = bind_mlp(tape, target.mlp, false);
  Var dvar = tape.leaf(Tensor({8, 2}), true);
  Var loss = cd_loss_graph(tape, student, sb, target, tb, x_next, 26, 25, phi, dvar, cfg);
  tape.backward(loss);

  for (Var p : tb.params()) {
    const Tensor g = tape.grad(p);
    for (long k = 0; k < g.size(); ++k) CHECK(g[k] == 0.0);
  }
  double student_grad_norm = 0.0;
  for (Var p : sb.params()) student_grad_norm += tape.grad(p).norm2();
  CHECK(student_grad_norm > 0.0);
  // the ascent direction is live: delta gradients flow through the target input
  CHECK(tape.grad(dvar).norm2() > 0.0);
}

TEST_CASE("the perturbation lands after the solver output, not on x_{t+1}") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel id = identity_cm(1, 50, 41);
  Rng rng(43);
  const long t = 12;
  const Tensor x_next = Tensor::randn({8, 1}, rng);
  Tensor delta({8, 1});
  delta[0] = 0.3;  // deliberately asymmetric
  CdConfig cfg;
  const Tensor phi = phi_hat(x_next, t + 1, t, zero_teacher(), cfg.solver, s);

  Tape tape;
  BoundMlp sb = bind_mlp(tape, id.mlp, false);
  BoundMlp tb = bind_mlp(tape, id.mlp, false);
  Var dvar = tape.leaf(delta, false);
  const double got =
      tape.val(cd_loss_graph(tape, id, sb, id, tb, x_next, t + 1, t, phi, dvar, cfg))[0];

  double want_phi_side = 0.0, want_xnext_side = 0.0;
  for (long i = 0; i < x_next.size(); ++i) {
    const double a = x_next[i] - (phi[i] + delta[i]);
    const double b = (x_next[i] + delta[i]) - phi[i];
    want_phi_side += a * a;
    want_xnext_side += b * b;
  }
  want_phi_side /= 8.0;
  want_xnext_side /= 8.0;
  CHECK(got == Catch::Approx(want_phi_side).epsilon(1e-13));
  CHECK(got != Catch::Approx(want_xnext_side).epsilon(1e-13));
}

TEST_CASE("student-branch ablation swaps the models across branches") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel student = random_cm(1, 50, 47);
  const ConsistencyModel target = identity_cm(1, 50, 53);
  Rng rng(59);
  const long t = 9;
  const Tensor x_next = Tensor::randn({8, 1}, rng);
  const Tensor delta = Tensor::uniform({8, 1}, rng, -0.1, 0.1);
  CdConfig cfg;
  cfg.perturb = PerturbBranch::kStudent;
  const Tensor phi = phi_hat(x_next, t + 1, t, zero_teacher(), cfg.solver, s);

  Tape tape;
  BoundMlp sb = bind_mlp(tape, student.mlp, false);
  BoundMlp tb = bind_mlp(tape, target.mlp, false);
  Var dvar = tape.leaf(delta, false);
  const double got =
      tape.val(cd_loss_graph(tape, student, sb, target, tb, x_next, t + 1, t, phi, dvar, cfg))[0];

  Tensor perturbed(phi.shape());
  for (long i = 0; i < phi.size(); ++i) perturbed[i] = phi[i] + delta[i];
  const Tensor student_out = cm_predict(student, perturbed, t);
  const Tensor target_out = cm_predict(target, x_next, t + 1);  // identity net
  double want = 0.0;
  for (long i = 0; i < phi.size(); ++i) {
    const double r = target_out[i] - student_out[i];
    want += r * r;
  }
  want /= 8.0;
  CHECK(got == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("l1 metric variant evaluates the absolute-difference loss") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel id = identity_cm(1, 50, 61);
  Rng rng(67);
  const long t = 15;
  const Tensor x_next = Tensor::randn({8, 1}, rng);
  CdConfig cfg;
  cfg.metric = CdMetric::kL1;
  const double got = cd_loss(id, id, x_next, t + 1, t, zero_teacher(), cfg, s);
  const double scale = std::sqrt(s.ab(t) / s.ab(t + 1));
  double want = 0.0;
  for (long i = 0; i < x_next.size(); ++i) want += std::fabs(x_next[i] - scale * x_next[i]);
  want /= 8.0;
  CHECK(got == Catch::Approx(want).epsilon(1e-13));
}

TEST_CASE("ct adversarial loss with identity nets follows the forward-process arithmetic") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel id = identity_cm(1, 50, 71);
  Rng rng(73);
  const Tensor x0 = Tensor::randn({32, 1}, rng);
  const Tensor eps = Tensor::randn({32, 1}, rng);
  CdConfig cfg;
  for (long t : {0L, 7L, 30L}) {
    const double got = ct_adv_loss(id, id, x0, t, eps, Tensor({32, 1}), cfg, s);
    double want = 0.0;
    for (long i = 0; i < x0.size(); ++i) {
      const double xt = std::sqrt(s.ab(t)) * x0[i] + std::sqrt(1.0 - s.ab(t)) * eps[i];
      const double xn = std::sqrt(s.ab(t + 1)) * x0[i] + std::sqrt(1.0 - s.ab(t + 1)) * eps[i];
      want += (xt - xn) * (xt - xn);
    }
    want /= 32.0;
    INFO("t = " << t);
    CHECK(got == Catch::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("ct loss shrinks as the schedule tightens (alpha -> 1 sweep)") {
  // averaged over all t, the identity-net CT loss tracks the schedule
  // roughness and decreases monotonically as min alpha -> 1
  Rng rng(79);
  const Tensor x0 = Tensor::randn({64, 1}, rng);
  const Tensor eps = Tensor::randn({64, 1}, rng);
  CdConfig cfg;
  double prev = 1e300;
  for (double alpha : {0.80, 0.90, 0.95, 0.99, 0.999}) {
    const NoiseSchedule s = NoiseSchedule::from_alphas(std::vector<double>(20, alpha));
    const ConsistencyModel id = identity_cm(1, 20, 83);
    double mean_loss = 0.0;
    for (long t = 0; t < s.T; ++t)
      mean_loss += ct_adv_loss(id, id, x0, t, eps, Tensor({64, 1}), cfg, s);
    mean_loss /= static_cast<double>(s.T);
    CHECK(mean_loss < prev);
    prev = mean_loss;
  }
}

TEST_CASE("cd_at_step with K = 1 matches a plain distillation step") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const EpsFn teacher = make_oracle_eps_fn(0.0, 1.0, s);
  auto init = [] {
    Rng rng(89);
    return ConsistencyModel::init(1, 16, 2, 8, 50, rng);
  };
  ConsistencyModel a = init(), b = init();
  Optimizer oa(OptimizerKind::kAdam, 1e-3), ob(OptimizerKind::kAdam, 1e-3);
  EmaPair ea = EmaPair::from(a.mlp, 0.95), eb = EmaPair::from(b.mlp, 0.95);
  CdConfig cfg;
  ATConfig atc;
  atc.K = 1;
  atc.adv_lr = 1e-12;
  TrainConfig tc;
  Rng ra(97), rb(97);
  Rng data_rng(101);
  const Tensor batch = Tensor::randn({16, 1}, data_rng);
  cd_at_step(a, oa, ea, batch, teacher, cfg, atc, tc, s, ra);

  // hand-written plain CD step: same draws, loss at delta = 0, one Adam update, EMA
  {
    const long t = rb.below(s.T);
    Tensor eps = Tensor::randn({16, 1}, rb);
    const Tensor x_next = q_sample(batch, t + 1, eps, s);
    const Tensor phi = phi_hat(x_next, t + 1, t, teacher, cfg.solver, s);
    Tape tape;
    BoundMlp sb = bind_mlp(tape, b.mlp, true);
    ConsistencyModel tgt = b;
    tgt.mlp = eb.snapshot(b.mlp);
    BoundMlp tb = bind_mlp(tape, tgt.mlp, false);
    Var dvar = tape.leaf(Tensor({16, 1}), true);
    Var loss = cd_loss_graph(tape, b, sb, tgt, tb, x_next, t + 1, t, phi, dvar, cfg);
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (Var p : sb.params()) grads.push_back(tape.grad(p));
    ob.step(b.mlp.tensors(), grads);
    eb.update(b.mlp);
  }

  double dist = 0.0;
  auto ta = a.mlp.tensors(), tb2 = b.mlp.tensors();
  for (size_t i = 0; i < ta.size(); ++i)
    for (long k = 0; k < ta[i]->size(); ++k) {
      const double diff = (*ta[i])[k] - (*tb2[i])[k];
      dist += diff * diff;
    }
  CHECK(std::sqrt(dist) < 1e-8);
}

TEST_CASE("cd training is bit-reproducible and bounds the perturbation") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 30);
  const EpsFn teacher = make_oracle_eps_fn(0.0, 1.0, s);
  auto run = [&] {
    Rng rng(103);
    ConsistencyModel m = ConsistencyModel::init(1, 8, 2, 4, 30, rng);
    Optimizer opt(OptimizerKind::kAdam, 1e-3);
    EmaPair ema = EmaPair::from(m.mlp, 0.95);
    CdConfig cfg;
    ATConfig atc;
    atc.K = 2;
    atc.adv_lr = 0.05;
    TrainConfig tc;
    Rng train_rng(107);
    Rng data_rng(109);
    for (int i = 0; i < 100; ++i) {
      const Tensor batch = Tensor::randn({8, 1}, data_rng);
      const StepReport rep = cd_at_step(m, opt, ema, batch, teacher, cfg, atc, tc, s, train_rng);
      if (rep.delta_norm > 2 * 0.05 + 1e-12) throw std::runtime_error("delta escaped the K*alpha ball");
    }
    return m;
  };
  const ConsistencyModel m1 = run();
  const ConsistencyModel m2 = run();
  auto t1 = m1.mlp.tensors(), t2 = m2.mlp.tensors();
  for (size_t i = 0; i < t1.size(); ++i)
    for (long k = 0; k < t1[i]->size(); ++k) CHECK((*t1[i])[k] == (*t2[i])[k]);
}

TEST_CASE("cm time ladder and sampling basics") {
  CHECK_THROWS_AS(cm_time_ladder(50, 0), ContractError);
  const auto one = cm_time_ladder(50, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 50);
  const auto four = cm_time_ladder(50, 4);
  REQUIRE(four.size() == 4);
  CHECK(four[0] == 50);
  for (size_t i = 1; i < four.size(); ++i) CHECK(four[i] < four[i - 1]);

  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel id = identity_cm(2, 50, 113);
  // identity model: 1-step samples are exactly the raw Gaussians from the chain streams
  const Tensor got = cm_sample(id, 1, 64, s, 31);
  Tensor want({64, 2});
  for (long i = 0; i < 64; ++i) {
    Rng stream(31 ^ static_cast<std::uint64_t>(i));
    want.at(i, 0) = stream.normal();
    want.at(i, 1) = stream.normal();
  }
  CHECK(max_abs_diff(got, want) == 0.0);

  const ConsistencyModel m = random_cm(2, 50, 127);
  const Tensor a = cm_sample(m, 3, 32, s, 7);
  const Tensor b = cm_sample(m, 3, 32, s, 7);
  CHECK(max_abs_diff(a, b) == 0.0);
  CHECK_THROWS_AS(cm_sample(m, 0, 8, s, 7), ContractError);
}

TEST_CASE("cd bound harness stays finite on an untrained identity model") {
  const NoiseSchedule s = build_schedule(ScheduleKind::kCosine, 50);
  const ConsistencyModel id = identity_cm(1, 50, 131);
  Rng rng(137);
  Tensor data({5000, 1});
  for (long i = 0; i < 5000; ++i) data.at(i, 0) = rng.normal();
  const BoundCheck chk = verify_cd_bound(id, s, data, /*final_cd_loss=*/0.7, 5000, 2026);
  CHECK(std::isfinite(chk.lhs));
  CHECK(chk.rhs == Catch::Approx(std::sqrt(50.0 * 0.7)).epsilon(1e-15));
  // rhs = 0 limit: pass iff lhs <= slack
  const BoundCheck zero = verify_cd_bound(id, s, data, 0.0, 5000, 2026);
  CHECK(zero.rhs == 0.0);
  CHECK(zero.pass == (zero.lhs <= 0.1));
  CHECK_THROWS_AS(verify_cd_bound(id, s, Tensor({4, 2}), 0.1, 100, 1), ContractError);
}
