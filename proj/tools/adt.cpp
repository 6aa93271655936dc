// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
//
// Operator surface: train / distill / sample / eval / verify over the
// library. Exit codes: 0 success, 1 usage or config error, 2 numeric
// failure, 3 verification FAIL.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adt/checkpoint.hpp"
#include "adt/config.hpp"
#include "adt/consistency.hpp"
#include "adt/data.hpp"
#include "adt/dpm_train.hpp"
#include "adt/metrics.hpp"
#include "adt/runio.hpp"
#include "adt/samplers.hpp"
#include "adt/verify.hpp"

namespace fs = std::filesystem;
using namespace adt;

namespace {

constexpr std::uint64_t kTrainStreamSalt = 0xd1b54a32d192ed03ULL;

struct Teacher {
  EpsFn fn;
  std::uint64_t hash = 0;
};

// "oracle:gaussian(mu,sigma)" pseudo-teacher or a trained eps checkpoint.
Teacher load_teacher(const std::string& spec, const NoiseSchedule& sched) {
  Teacher t;
  if (spec.empty()) throw ConfigError("cd.teacher is required for distillation");
  if (spec.rfind("oracle:gaussian(", 0) == 0 && spec.back() == ')') {
    const std::string args = spec.substr(16, spec.size() - 17);
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw ConfigError("oracle teacher expects oracle:gaussian(mu,sigma)");
    double mu = 0.0, sigma = 1.0;
    try {
      mu = std::stod(args.substr(0, comma));
      sigma = std::stod(args.substr(comma + 1));
    } catch (const std::exception&) {
      throw ConfigError("oracle teacher: bad numeric arguments in '" + spec + "'");
    }
    t.fn = make_oracle_eps_fn(mu, sigma, sched);
    t.hash = fnv1a64(spec);
    return t;
  }
  const std::string bytes = read_text_file(spec);
  const Checkpoint ckpt = checkpoint_deserialize(bytes);
  if (ckpt.kind != Checkpoint::Kind::kEps)
    throw ConfigError("teacher checkpoint must hold a noise-prediction model: " + spec);
  if (ckpt.sched.T != sched.T)
    throw ConfigError("teacher schedule mismatch: teacher T=" + std::to_string(ckpt.sched.T) +
                      " but run schedule has T=" + std::to_string(sched.T));
  for (long i = 0; i < sched.T; ++i)
    if (ckpt.sched.alpha[static_cast<size_t>(i)] != sched.alpha[static_cast<size_t>(i)])
      throw ConfigError("teacher schedule mismatch: alpha arrays differ at t=" + std::to_string(i + 1));
  auto model = std::make_shared<EpsModel>(ckpt.to_eps_model());
  t.fn = [model](const Tensor& x, long step) { return eps_predict(*model, x, step); };
  t.hash = fnv1a64(bytes);
  return t;
}

std::vector<Tensor> clone_tensors(const std::vector<Tensor*>& src) {
  std::vector<Tensor> out;
  out.reserve(src.size());
  for (const Tensor* t : src) out.push_back(*t);
  return out;
}

std::vector<double> loss_tail_of(const std::vector<double>& warm, const std::vector<double>& fresh) {
  std::vector<double> all = warm;
  all.insert(all.end(), fresh.begin(), fresh.end());
  if (all.size() > 500) all.erase(all.begin(), all.end() - 500);
  return all;
}

double tail_mean(const std::vector<double>& tail) {
  if (tail.empty()) return 0.0;
  double acc = 0.0;
  for (double v : tail) acc += v;
  return acc / static_cast<double>(tail.size());
}

Checkpoint build_checkpoint(Checkpoint::Kind kind, const RunConfig& cfg, const NoiseSchedule& sched,
                            MlpParams& mlp, long data_dim, const Optimizer& opt, const EmaPair& ema,
                            std::uint64_t rng_state, long step, const Dataset& ds,
                            std::uint64_t teacher_hash, std::vector<double> loss_tail) {
  Checkpoint c;
  c.kind = kind;
  c.sched = sched;
  c.data_dim = data_dim;
  c.hidden = cfg.hidden;
  c.depth = cfg.depth;
  c.time_embed = cfg.time_embed;
  c.sigma_data = cfg.sigma_data;
  c.s_max = cfg.s_max;
  c.params = clone_tensors(mlp.tensors());
  c.opt_kind = opt.kind();
  c.opt_lr = opt.lr();
  c.opt_step = opt.step_count();
  c.opt_m = opt.moment1();
  c.opt_v = opt.moment2();
  c.ema_mu = ema.mu;
  c.ema_target = ema.target;
  c.rng_state = rng_state;
  c.step = step;
  c.data_shift = ds.shift;
  c.data_scale = ds.scale;
  c.teacher_hash = teacher_hash;
  c.final_loss = tail_mean(loss_tail);
  c.loss_tail = std::move(loss_tail);
  c.config_echo = cfg.serialize();
  return c;
}

void check_resume_config(const Checkpoint& ckpt, const RunConfig& cfg) {
  if (fnv1a64(ckpt.config_echo) != cfg.hash())
    throw ConfigError("resume: checkpoint was written by a different config (hash mismatch)");
}

// Shared train/distill scaffolding: out dir, dataset, metrics.
struct RunContext {
  RunConfig cfg;
  NoiseSchedule sched;
  Dataset ds;
  MetricsReport metrics;

  explicit RunContext(const std::string& config_path) {
    cfg = RunConfig::parse_file(config_path);
    sched = build_schedule(cfg.schedule_kind, cfg.T);
    ds = make_dataset(cfg.data_kind, cfg.data_n, cfg.data_seed);
    metrics.config_hash = cfg.hash();
    metrics.seed = cfg.train.seed;
    fs::create_directories(cfg.out_dir);
  }

  void write_run_files(const std::string& command) const {
    write_text_file(cfg.out_dir + "/config_resolved.ini", cfg.serialize());
    write_text_file(cfg.out_dir + "/run_manifest.json", run_manifest_json(cfg, command));
    write_text_file(cfg.out_dir + "/metrics.csv", metrics_csv(metrics));
  }
};

int cmd_train(const std::string& config_path, const std::string& resume_path) {
  RunContext ctx(config_path);
  const RunConfig& cfg = ctx.cfg;

  EpsModel model;
  Optimizer opt(cfg.train.optimizer, cfg.train.lr);
  EmaPair ema;
  Rng train_rng(cfg.train.seed ^ kTrainStreamSalt);
  long start_step = 0;
  std::vector<double> warm_losses;
  if (!resume_path.empty()) {
    const Checkpoint ckpt = checkpoint_load(resume_path);
    check_resume_config(ckpt, cfg);
    if (ckpt.kind != Checkpoint::Kind::kEps) throw ConfigError("resume: not an eps checkpoint");
    model = ckpt.to_eps_model();
    opt = ckpt.to_optimizer();
    ema = ckpt.to_ema(model.mlp);
    train_rng.set_state(ckpt.rng_state);
    start_step = ckpt.step;
    warm_losses = ckpt.loss_tail;
  } else {
    Rng init_rng(cfg.train.seed);
    model = EpsModel::init(ctx.ds.dim(), cfg.hidden, cfg.depth, cfg.time_embed, cfg.T, init_rng);
    ema = EmaPair::from(model.mlp, cfg.train.ema_mu);
  }

  const Dataset eval_ds = cfg.eval_samples > 0
                              ? make_dataset(cfg.data_kind, cfg.eval_samples, cfg.data_seed ^ 0x5eedULL)
                              : Dataset{};
  TrainHooks hooks;
  hooks.eval_every = cfg.eval_every;
  hooks.on_eval = [&](long step, double loss) {
    ctx.metrics.add(step, "train_loss", loss);
    if (cfg.eval_samples > 0) {
      SamplerConfig sc;
      sc.kind = sampler_kind_from(cfg.sampler_kind);
      sc.nfe = cfg.resolved_nfe();
      sc.solver_order = cfg.solver_order;
      sc.es_lambda = cfg.es_lambda;
      sc.seed = cfg.eval_seed;
      sc.clip_x0 = cfg.clip_x0;
      const Trajectory traj =
          sample(make_eps_fn(model), sc, cfg.eval_samples, model.data_dim, ctx.sched);
      ctx.metrics.add(step, "sw_eval",
                      sliced_wasserstein(traj.final_samples(), eval_ds.samples, cfg.eval_n_proj,
                                         cfg.eval_seed));
    }
  };
  hooks.checkpoint_every = cfg.checkpoint_every;
  hooks.on_checkpoint = [&](long step, const TrainSummary& so_far) {
    const Checkpoint c = build_checkpoint(Checkpoint::Kind::kEps, cfg, ctx.sched, model.mlp,
                                          model.data_dim, opt, ema, train_rng.state(), step,
                                          ctx.ds, 0, loss_tail_of(warm_losses, so_far.losses));
    checkpoint_save(c, cfg.out_dir + "/ckpt_" + std::to_string(step) + ".ckpt");
  };

  const TrainMode mode = cfg.at_enabled ? TrainMode::kAdversarial : TrainMode::kStandard;
  const TrainSummary summary = train_dpm(mode, model, opt, ema, ctx.ds.samples, cfg.at, cfg.train,
                                         ctx.sched, train_rng, hooks, start_step);

  if (!summary.losses.empty() && (cfg.eval_every == 0 || summary.updates % cfg.eval_every != 0))
    ctx.metrics.add(summary.updates, "train_loss", summary.losses.back());

  const Checkpoint final_ckpt = build_checkpoint(
      Checkpoint::Kind::kEps, cfg, ctx.sched, model.mlp, model.data_dim, opt, ema,
      train_rng.state(), std::max(start_step, summary.updates), ctx.ds, 0,
      loss_tail_of(warm_losses, summary.losses));
  checkpoint_save(final_ckpt, cfg.out_dir + "/model.ckpt");
  ctx.write_run_files("train");
  std::cout << "trained " << (cfg.at_enabled ? "adversarial" : "standard") << " model for "
            << std::max(start_step, summary.updates) << " updates; checkpoint at " << cfg.out_dir
            << "/model.ckpt\n";
  return 0;
}

int cmd_distill(const std::string& config_path, const std::string& resume_path) {
  RunContext ctx(config_path);
  const RunConfig& cfg = ctx.cfg;
  const Teacher teacher = load_teacher(cfg.cd_teacher, ctx.sched);

  CdConfig cd;
  cd.solver = ode_solver_from(cfg.cd_solver);
  cd.metric = cd_metric_from(cfg.cd_metric);
  cd.perturb = perturb_branch_from(cfg.cd_perturb);

  ConsistencyModel student;
  Optimizer opt(cfg.train.optimizer, cfg.train.lr);
  EmaPair ema;
  Rng train_rng(cfg.train.seed ^ kTrainStreamSalt);
  long start_step = 0;
  std::vector<double> warm_losses;
  if (!resume_path.empty()) {
    const Checkpoint ckpt = checkpoint_load(resume_path);
    check_resume_config(ckpt, cfg);
    if (ckpt.kind != Checkpoint::Kind::kCm) throw ConfigError("resume: not a consistency checkpoint");
    student = ckpt.to_cm_model();
    opt = ckpt.to_optimizer();
    ema = ckpt.to_ema(student.mlp);
    train_rng.set_state(ckpt.rng_state);
    start_step = ckpt.step;
    warm_losses = ckpt.loss_tail;
  } else {
    Rng init_rng(cfg.train.seed);
    student = ConsistencyModel::init(ctx.ds.dim(), cfg.hidden, cfg.depth, cfg.time_embed, cfg.T,
                                     init_rng, cfg.sigma_data, cfg.s_max);
    ema = EmaPair::from(student.mlp, cfg.train.ema_mu);
  }

  TrainHooks hooks;
  hooks.eval_every = cfg.eval_every;
  hooks.on_eval = [&](long step, double loss) { ctx.metrics.add(step, "cd_loss", loss); };
  hooks.checkpoint_every = cfg.checkpoint_every;
  hooks.on_checkpoint = [&](long step, const TrainSummary& so_far) {
    const Checkpoint c = build_checkpoint(
        Checkpoint::Kind::kCm, cfg, ctx.sched, student.mlp, student.data_dim, opt, ema,
        train_rng.state(), step, ctx.ds, teacher.hash, loss_tail_of(warm_losses, so_far.losses));
    checkpoint_save(c, cfg.out_dir + "/ckpt_" + std::to_string(step) + ".ckpt");
  };

  const TrainSummary summary = train_cd(student, opt, ema, ctx.ds.samples, teacher.fn, cd, cfg.at,
                                        cfg.train, ctx.sched, train_rng, hooks, start_step);
  if (!summary.losses.empty() && (cfg.eval_every == 0 || summary.updates % cfg.eval_every != 0))
    ctx.metrics.add(summary.updates, "cd_loss", summary.losses.back());

  const std::vector<double> tail = loss_tail_of(warm_losses, summary.losses);
  const double final_loss = tail_mean(tail);
  const Checkpoint final_ckpt = build_checkpoint(
      Checkpoint::Kind::kCm, cfg, ctx.sched, student.mlp, student.data_dim, opt, ema,
      train_rng.state(), std::max(start_step, summary.updates), ctx.ds, teacher.hash, tail);
  checkpoint_save(final_ckpt, cfg.out_dir + "/student.ckpt");
  ctx.write_run_files("distill");

  // record the transport-bound check for 1D runs
  if (ctx.ds.dim() == 1 && summary.updates > 0) {
    const BoundCheck chk = verify_cd_bound(student, ctx.sched, ctx.ds.samples, final_loss,
                                           std::min<long>(100000, cfg.data_n), cfg.eval_seed);
    std::cout << "cd_bound: lhs=" << fmt_f64(chk.lhs) << " rhs=" << fmt_f64(chk.rhs)
              << (chk.pass ? " PASS" : " FAIL") << "\n";
  }
  std::cout << "distilled consistency model for " << std::max(start_step, summary.updates)
            << " updates; checkpoint at " << cfg.out_dir << "/student.ckpt\n";
  return 0;
}

struct SampleArgs {
  std::string checkpoint;
  std::string out;
  std::string sampler = "ancestral";
  long nfe = 0;
  long order = 1;
  long steps = 1;
  long n = 1000;
  std::uint64_t seed = 0;
  double es_lambda = 0.99;
  std::string es_lambda_file;
  double clip_x0 = 0.0;  // 0 = off
  bool use_ema = false;
  bool nfe_given = false, steps_given = false, sampler_given = false;
};

int cmd_sample(const SampleArgs& args) {
  const Checkpoint ckpt = checkpoint_load(args.checkpoint);
  nlohmann::json sidecar;
  sidecar["artifact_version"] = kVersion;
  sidecar["checkpoint"] = args.checkpoint;
  sidecar["checkpoint_config_hash"] = hash_hex(fnv1a64(ckpt.config_echo));
  sidecar["seed"] = args.seed;
  sidecar["n"] = args.n;
  sidecar["data_shift"] = ckpt.data_shift;
  sidecar["data_scale"] = ckpt.data_scale;

  Tensor samples;
  if (ckpt.kind == Checkpoint::Kind::kCm) {
    if (args.nfe_given || args.sampler_given)
      throw ContractError("consistency checkpoints sample with --steps, not --sampler/--nfe");
    ConsistencyModel model = ckpt.to_cm_model();
    if (args.use_ema) model.mlp = ckpt.ema_model_params();
    samples = cm_sample(model, args.steps, args.n, ckpt.sched, args.seed);
    sidecar["kind"] = "cm";
    sidecar["steps"] = args.steps;
    sidecar["use_ema"] = args.use_ema;
  } else {
    if (args.steps_given)
      throw ContractError("--steps applies to consistency checkpoints; use --nfe for DPM sampling");
    EpsModel model = ckpt.to_eps_model();
    if (args.use_ema) model.mlp = ckpt.ema_model_params();
    SamplerConfig sc;
    sc.kind = sampler_kind_from(args.sampler);
    sc.nfe = args.nfe == 0 ? ckpt.sched.T : args.nfe;
    sc.solver_order = args.order;
    sc.seed = args.seed;
    sc.es_lambda = args.es_lambda;
    if (args.clip_x0 > 0.0) sc.clip_x0 = args.clip_x0;
    if (!args.es_lambda_file.empty()) {
      const std::string text = read_text_file(args.es_lambda_file);
      std::istringstream in(text);
      double v;
      while (in >> v) sc.es_lambda_schedule.push_back(v);
      sidecar["es_lambda_file_content"] = text;  // echoed verbatim
    }
    sc.validate(ckpt.sched.T);
    const Trajectory traj = sample(make_eps_fn(model), sc, args.n, ckpt.data_dim, ckpt.sched);
    samples = traj.final_samples();
    sidecar["kind"] = "eps";
    sidecar["sampler"] = args.sampler;
    sidecar["nfe"] = sc.nfe;
    sidecar["order"] = args.order;
    sidecar["use_ema"] = args.use_ema;
    if (sc.clip_x0) sidecar["clip_x0"] = *sc.clip_x0;
    if (sc.es_lambda_schedule.empty())
      sidecar["es_lambda"] = args.es_lambda;
    else
      sidecar["es_lambda"] = sc.es_lambda_schedule;
  }
  write_text_file(args.out, samples_text(samples));
  write_text_file(args.out + ".json", sidecar.dump(2) + "\n");
  std::cout << "wrote " << samples.rows() << " samples to " << args.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string samples;
  std::string data;
  long data_n = 0;
  std::uint64_t data_seed = 1;
  long n_proj = 64;
  std::uint64_t seed = 1234;
  std::string append;
  long step = 0;
};

int cmd_eval(const EvalArgs& args) {
  const Tensor samples = load_samples(args.samples);
  const long n = args.data_n == 0 ? samples.rows() : args.data_n;
  const Dataset ds = make_dataset(args.data, n, args.data_seed);
  if (ds.dim() != samples.cols())
    throw ContractError("dimension mismatch: samples are " + std::to_string(samples.cols()) +
                        "-dimensional, dataset '" + args.data + "' is " + std::to_string(ds.dim()));
  MetricsReport rep;
  rep.seed = args.seed;
  rep.add(args.step, "sliced_wasserstein",
          sliced_wasserstein(samples, ds.samples, args.n_proj, args.seed));
  if (samples.cols() == 1) rep.add(args.step, "w1", w1_1d(samples, ds.samples, args.seed));
  for (const MetricEntry& e : rep.entries)
    std::cout << e.name << " = " << fmt_f64(e.value) << "\n";
  if (!args.append.empty()) {
    std::string existing;
    if (fs::exists(args.append)) existing = read_text_file(args.append);
    if (existing.empty()) existing = "step,name,value\n";
    std::ostringstream rows;
    for (const MetricEntry& e : rep.entries)
      rows << e.step << ',' << e.name << ',' << fmt_f64(e.value) << '\n';
    write_text_file(args.append, existing + rows.str());
  }
  return 0;
}

int cmd_verify(const std::string& suite, const std::string& checkpoint_path, long n) {
  if (suite == "talagrand") {
    const SuiteResult r = talagrand_suite(100);
    std::cout << "talagrand: " << r.detail << " -> " << (r.pass ? "PASS" : "FAIL") << "\n";
    return r.pass ? 0 : 3;
  }
  if (suite == "gradcheck") {
    const SuiteResult r = gradcheck_suite(100);
    std::cout << "gradcheck: " << r.detail << " -> " << (r.pass ? "PASS" : "FAIL") << "\n";
    return r.pass ? 0 : 3;
  }
  if (suite == "sampler_equiv") {
    const SuiteResult r = sampler_equiv_suite(100);
    std::cout << "sampler_equiv: " << r.detail << " -> " << (r.pass ? "PASS" : "FAIL") << "\n";
    return r.pass ? 0 : 3;
  }
  if (suite == "cd_bound") {
    if (checkpoint_path.empty())
      throw ConfigError("cd_bound requires --checkpoint with a distilled consistency model");
    const Checkpoint ckpt = checkpoint_load(checkpoint_path);
    if (ckpt.kind != Checkpoint::Kind::kCm)
      throw ConfigError("cd_bound: checkpoint does not hold a consistency model");
    const RunConfig cfg = RunConfig::parse(ckpt.config_echo);
    const Dataset ds = make_dataset(cfg.data_kind, cfg.data_n, cfg.data_seed);
    if (ds.dim() != 1) throw ConfigError("cd_bound requires 1D data");
    const ConsistencyModel model = ckpt.to_cm_model();
    const BoundCheck chk =
        verify_cd_bound(model, ckpt.sched, ds.samples, ckpt.final_loss, n, cfg.eval_seed);
    std::cout << "cd_bound: lhs=" << fmt_f64(chk.lhs) << " rhs=" << fmt_f64(chk.rhs)
              << " slack=0.1 -> " << (chk.pass ? "PASS" : "FAIL") << "\n";
    return chk.pass ? 0 : 3;
  }
  throw ConfigError("unknown verify suite '" + suite +
                    "' (expected talagrand, cd_bound, gradcheck, or sampler_equiv)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale diffusion training and consistency distillation with adversarial training"};
  app.require_subcommand(1);

  std::string config_path, resume_path;
  auto* train = app.add_subcommand("train", "train a noise-prediction model (standard or adversarial)");
  train->add_option("--config", config_path, "run configuration file")->required();
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  std::string d_config, d_resume;
  auto* distill = app.add_subcommand("distill", "consistency distillation from a frozen teacher");
  distill->add_option("--config", d_config, "run configuration file")->required();
  distill->add_option("--resume", d_resume, "checkpoint to resume from");

  SampleArgs sargs;
  auto* samp = app.add_subcommand("sample", "generate samples from a checkpoint");
  samp->add_option("--checkpoint", sargs.checkpoint, "model checkpoint")->required();
  samp->add_option("--out", sargs.out, "output samples file")->required();
  auto* opt_sampler = samp->add_option("--sampler", sargs.sampler, "ancestral|ddim|dpm_solver|es");
  auto* opt_nfe = samp->add_option("--nfe", sargs.nfe, "number of function evaluations (<= T)");
  samp->add_option("--order", sargs.order, "dpm_solver order (1 or 2)");
  auto* opt_steps = samp->add_option("--steps", sargs.steps, "consistency sampling steps");
  samp->add_option("-n,--n", sargs.n, "number of samples");
  samp->add_option("--seed", sargs.seed, "sampling seed");
  samp->add_option("--es-lambda", sargs.es_lambda, "constant epsilon-scaling factor");
  samp->add_option("--es-lambda-file", sargs.es_lambda_file, "per-step lambda schedule file");
  samp->add_option("--clip-x0", sargs.clip_x0, "clamp the implied x0 prediction to +-value");
  samp->add_flag("--use-ema", sargs.use_ema, "sample from the EMA parameters");

  EvalArgs eargs;
  auto* eval = app.add_subcommand("eval", "distribution metrics between samples and a dataset");
  eval->add_option("--samples", eargs.samples, "samples file")->required();
  eval->add_option("--data", eargs.data, "dataset spec, e.g. gaussian_1d(0,1)")->required();
  eval->add_option("--data-n", eargs.data_n, "dataset size (default: sample count)");
  eval->add_option("--data-seed", eargs.data_seed, "dataset seed");
  eval->add_option("--n-proj", eargs.n_proj, "sliced Wasserstein projections");
  eval->add_option("--seed", eargs.seed, "projection seed");
  eval->add_option("--append", eargs.append, "append metric rows to this CSV");
  eval->add_option("--step", eargs.step, "step column for appended rows");

  std::string suite, v_ckpt;
  long v_n = 100000;
  auto* verify = app.add_subcommand("verify", "numerical checks of the theory-facing claims");
  verify->add_option("--suite", suite, "talagrand|cd_bound|gradcheck|sampler_equiv")->required();
  verify->add_option("--checkpoint", v_ckpt, "distilled checkpoint (cd_bound)");
  verify->add_option("-n", v_n, "sample count for cd_bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(config_path, resume_path);
    if (*distill) return cmd_distill(d_config, d_resume);
    if (*samp) {
      sargs.sampler_given = opt_sampler->count() > 0;
      sargs.nfe_given = opt_nfe->count() > 0;
      sargs.steps_given = opt_steps->count() > 0;
      return cmd_sample(sargs);
    }
    if (*eval) return cmd_eval(eargs);
    if (*verify) return cmd_verify(suite, v_ckpt, v_n);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
