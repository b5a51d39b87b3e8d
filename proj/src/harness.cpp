#include "rllab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rllab/buffers.hpp"
#include "rllab/errors.hpp"

namespace rllab {

double evaluate(const PolicyFn& policy, const EnvSpec& spec, std::size_t n_episodes,
                std::uint64_t seed, std::vector<double>* returns) {
  if (n_episodes == 0) throw ConfigError("evaluate: n_episodes must be >= 1");
  if (returns) returns->clear();
  double total = 0.0;
  for (std::size_t k = 0; k < n_episodes; ++k) {
    EnvState st = env_reset(spec, episode_seed(seed, k));
    double ep = 0.0;
    while (true) {
      const std::vector<double> action = policy(st.x);
      StepOut so = env_step(spec, st, action);
      ep += so.reward;
      st = std::move(so.next);
      if (so.done) break;
    }
    total += ep;
    if (returns) returns->push_back(ep);
  }
  return total / static_cast<double>(n_episodes);
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct VariantTraits {
  bool needs_demos = false;
  bool use_be = false;      // mix B_e rows into batches at alpha
  bool admissions = false;  // episode ends feed be_maybe_admit
  bool demos_to_bm = false;
  bool bc = false;           // pretrain the actor on the demos
  bool constraint = false;   // policy-constraint schedule active
  bool random_warmup = true;  // pretrained variants act with the policy at once
  std::optional<std::size_t> force_ensemble;  // td3 pins N = M = 2
};

VariantTraits variant_traits(Variant v) {
  VariantTraits t;
  switch (v) {
    case Variant::asilfd:
      t.needs_demos = t.use_be = t.admissions = t.constraint = true;
      break;
    case Variant::asilfd_noconstraint:
      t.needs_demos = t.use_be = t.admissions = true;
      break;
    case Variant::td3:
      t.force_ensemble = 2;
      break;
    case Variant::redq:
      break;
    case Variant::redq_bc:
      t.needs_demos = t.bc = true;
      t.random_warmup = false;
      break;
    case Variant::redq_lfd:
      t.needs_demos = t.bc = t.demos_to_bm = t.use_be = true;
      t.random_warmup = false;
      break;
  }
  return t;
}

std::string wallclock(std::chrono::steady_clock::time_point start) {
  const auto dt = std::chrono::steady_clock::now() - start;
  const double sec = std::chrono::duration<double>(dt).count();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", sec);
  return buf;
}

std::string rng_blob(const Rng& env, const Rng& agent, const Rng& sampler) {
  std::ostringstream os;
  for (const Rng* r : {&env, &agent, &sampler}) {
    const std::string s = r->serialize();
    const std::uint64_t n = s.size();
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(s.data(), static_cast<std::streamsize>(n));
  }
  return os.str();
}

template <typename T>
TrainResult train_impl(const TrainConfig& cfg) {
  validate_config(cfg);
  const VariantTraits traits = variant_traits(cfg.variant);
  const EnvSpec spec = env_spec(cfg.env);
  const auto t_start = std::chrono::steady_clock::now();

  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/run.log");
  if (!log) throw ValidationError("cannot open " + cfg.out_dir + "/run.log");
  {
    std::ofstream cfg_out(cfg.out_dir + "/config.txt");
    cfg_out << dump_config(cfg);
  }
  log << "[start] env=" << to_string(cfg.env) << " variant=" << to_string(cfg.variant)
      << " seed=" << cfg.seed << " steps=" << cfg.total_steps << "\n";

  // Demonstrations: only variants that declare a need ever open the file.
  std::vector<Trajectory> demos;
  if (traits.needs_demos) {
    if (cfg.demo_path.empty())
      throw ConfigError(to_string(cfg.variant) + " requires demo_path");
    DemoFile df = load_trajectories(cfg.demo_path);
    if (df.env_id != cfg.env)
      throw ConfigError("demo file is for env " + to_string(df.env_id) + ", config wants " +
                        to_string(cfg.env));
    if (df.state_dim != spec.state_dim || df.action_dim != spec.action_dim)
      throw ConfigError("demo file dimensions do not match the environment");
    demos = std::move(df.trajectories);
    log << "[demos] n=" << demos.size() << " from " << cfg.demo_path << "\n";
  }

  const AgentConfig acfg = make_agent_config(cfg);
  Agent<T> ag = agent_init<T>(acfg, cfg.seed);

  TrainResult result;
  result.out_dir = cfg.out_dir;
  if (traits.bc) {
    const BcReport bc = bc_pretrain(ag, demos, cfg.bc_epochs, cfg.bc_lr);
    result.bc = bc;
    log << "[bc] epochs=" << cfg.bc_epochs << " mse " << format_metric(bc.initial_mse) << " -> "
        << format_metric(bc.final_mse) << "\n";
  }

  std::optional<ExperienceBuffer> be;
  if (traits.use_be || traits.admissions) {
    be.emplace(demos, cfg.be_capacity);
    log << "[be] trajs=" << be->trajectories().size() << " r_min=" << format_metric(be->r_min())
        << "\n";
  }
  SampleBuffer bm(cfg.bm_capacity, spec.state_dim, spec.action_dim);
  if (traits.demos_to_bm)
    for (const Trajectory& d : demos)
      for (const Transition& t : d.transitions) bm.push(t);

  const double alpha_eff = traits.use_be ? cfg.alpha : 0.0;
  Rng env_rng = Rng::sub(cfg.seed, "env");
  Rng agent_rng = Rng::sub(cfg.seed, "agent");
  Rng sampler_rng = Rng::sub(cfg.seed, "sampler");
  const std::uint64_t eval_seed = Rng::derive_seed(cfg.seed, "eval");
  Rng eval_dummy(0);  // sigma = 0 evaluation never draws from it
  const ExplorationNoise quiet{0.0, 0.0};

  MetricsWriter metrics(cfg.out_dir + "/metrics.csv");
  double critic_acc = 0.0, actor_acc = 0.0;
  std::uint64_t n_updates_acc = 0;
  const auto do_eval = [&](std::uint64_t step) {
    const double ret = evaluate(
        [&](std::span<const double> s) { return select_action(ag, s, quiet, eval_dummy); }, spec,
        cfg.eval_episodes, eval_seed);
    MetricsRow row;
    row.step = step;
    row.eval_return = ret;
    const double denom = static_cast<double>(n_updates_acc);
    row.critic_loss = n_updates_acc ? critic_acc / denom : std::nan("");
    row.actor_loss = n_updates_acc ? actor_acc / denom : std::nan("");
    row.lambda = lambda_value(acfg.lambda, step);
    row.r_min = be ? be->r_min() : std::nan("");
    row.be_trajs = be ? be->trajectories().size() : 0;
    metrics.write(row);
    result.rows.push_back(row);
    critic_acc = actor_acc = 0.0;
    n_updates_acc = 0;
    log << "[eval] step=" << step << " return=" << format_metric(ret) << " elapsed="
        << wallclock(t_start) << "s\n";
  };

  do_eval(0);
  EnvState st;
  TrajectoryAccumulator acc;
  bool episode_active = false;
  std::uint64_t step = 0;
  try {
    for (step = 1; step <= cfg.total_steps; ++step) {
      if (!episode_active) {
        st = env_reset(spec, env_rng.next_u64());
        acc.start();
        episode_active = true;
      }
      std::vector<double> action;
      if (traits.random_warmup && step <= cfg.warmup_steps) {
        action.resize(spec.action_dim);
        for (double& a : action) a = agent_rng.uniform(-spec.action_bound, spec.action_bound);
      } else {
        action = select_action(ag, st.x, acfg.noise, agent_rng);
      }
      StepOut so = env_step(spec, st, action);
      Transition tr{st.x, std::move(action), so.reward, so.next.x, so.done};
      bm.push(tr);
      acc.push(std::move(tr));
      st = std::move(so.next);
      if (so.done) {
        Trajectory traj = acc.finish();
        episode_active = false;
        if (traits.admissions) {
          const double r_sum = traj.r_sum;
          if (be->maybe_admit(std::move(traj)))
            log << "[admit] step=" << step << " r_sum=" << format_metric(r_sum)
                << " r_min=" << format_metric(be->r_min()) << " trajs="
                << be->trajectories().size() << "\n";
        }
      }
      if (bm.size() > cfg.batch_size) {
        const std::optional<Batch> batch =
            mixed_sample(be ? &*be : nullptr, bm, cfg.batch_size, alpha_eff, sampler_rng);
        const UpdateMetrics um = update_step(ag, *batch, step, agent_rng);
        critic_acc += um.critic_loss_mean;
        actor_acc += um.actor_loss;
        n_updates_acc += 1;
      }
      if (step % cfg.eval_interval == 0) do_eval(step);
    }
  } catch (const NumericError& e) {
    log << "[abort] step=" << step << " " << e.what() << "\n";
    throw NumericError("numeric abort at step " + std::to_string(step) + ": " + e.what());
  }
  if (cfg.total_steps % cfg.eval_interval != 0) do_eval(cfg.total_steps);

  {
    std::ofstream os(cfg.out_dir + "/agent.bin", std::ios::binary);
    save_agent(ag, rng_blob(env_rng, agent_rng, sampler_rng), os);
  }
  {
    std::ofstream os(cfg.out_dir + "/actor.bin", std::ios::binary);
    mlp_save(ag.actor, os);
  }
  result.final_eval = result.rows.back().eval_return;
  log << "[done] final_return=" << format_metric(result.final_eval) << " elapsed="
      << wallclock(t_start) << "s\n";
  return result;
}

}  // namespace

AgentConfig make_agent_config(const TrainConfig& cfg) {
  const VariantTraits traits = variant_traits(cfg.variant);
  const EnvSpec spec = env_spec(cfg.env);
  AgentConfig acfg;
  acfg.state_dim = spec.state_dim;
  acfg.action_dim = spec.action_dim;
  acfg.hidden = cfg.hidden;
  acfg.n_critics = traits.force_ensemble.value_or(cfg.n_critics);
  acfg.subset_m = traits.force_ensemble.value_or(cfg.subset_m);
  acfg.lr = cfg.lr;
  acfg.gamma = cfg.gamma;
  acfg.tau = cfg.tau;
  acfg.action_bound = spec.action_bound;
  acfg.noise = ExplorationNoise{cfg.sigma, cfg.noise_clip};
  if (traits.constraint) {
    const std::uint64_t horizon =
        cfg.lambda_horizon != 0 ? cfg.lambda_horizon
                                : std::max<std::uint64_t>(1, cfg.total_steps / 2);
    acfg.lambda = LambdaSchedule{cfg.lambda_init, cfg.lambda_min, horizon, cfg.lambda_mode};
  } else {
    acfg.lambda = LambdaSchedule{0.0, 0.0, 1, LambdaMode::linear};
  }
  acfg.online_actor_targets = cfg.online_actor_targets;
  acfg.parallel_critics = cfg.parallel_critics;
  return acfg;
}

TrainResult train(const TrainConfig& cfg) {
  if (cfg.precision == Precision::f32) return train_impl<float>(cfg);
  return train_impl<double>(cfg);
}

// ---------------------------------------------------------------------------
// Q-error diagnostic

double mc_return(const DiagModel& model, const std::vector<double>& s0, double gamma,
                 std::size_t horizon, double* r_max) {
  std::vector<double> s = s0;
  double discount = 1.0, total = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    auto [next, r] = model.step(s);
    total += discount * r;
    discount *= gamma;
    if (r_max) *r_max = std::max(*r_max, std::abs(r));
    s = std::move(next);
  }
  return total;
}

QErrorReport q_error_mean(const DiagModel& model, const std::vector<std::vector<double>>& states,
                          double gamma, std::size_t horizon) {
  if (states.empty()) throw ConfigError("q_error_mean: need at least one state");
  QErrorReport report;
  report.n_states = states.size();
  double err = 0.0;
  for (const std::vector<double>& s : states) {
    const double g = mc_return(model, s, gamma, horizon, &report.r_max);
    err += std::abs(model.qvalue(s) - g);
  }
  report.mean_abs_error = err / static_cast<double>(states.size());
  report.tail_bound = std::pow(gamma, static_cast<double>(horizon)) * report.r_max;
  return report;
}

// ---------------------------------------------------------------------------
// Run comparison

std::optional<std::uint64_t> surpass_step(const std::vector<MetricsRow>& rows, double threshold) {
  if (rows.empty()) return std::nullopt;
  const std::size_t w = std::min<std::size_t>(3, rows.size());
  for (std::size_t i = 0; i + w <= rows.size(); ++i) {
    bool ok = true;
    for (std::size_t j = i; j < i + w; ++j)
      if (!(rows[j].eval_return > threshold)) {
        ok = false;
        break;
      }
    if (ok) return rows[i].step;
  }
  return std::nullopt;
}

namespace {

// Type-7 quantile (linear interpolation), matching common numeric packages.
double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace

CompareRow summarize_runs(const std::string& label,
                          const std::vector<std::vector<MetricsRow>>& histories,
                          std::optional<double> threshold, std::size_t failures) {
  CompareRow row;
  row.label = label;
  row.n_seeds = histories.size() + failures;
  row.failures = failures;
  std::vector<double> finals;
  for (const auto& h : histories)
    if (!h.empty()) finals.push_back(h.back().eval_return);
  row.median_final = quantile(finals, 0.5);
  row.iqr_lo = quantile(finals, 0.25);
  row.iqr_hi = quantile(finals, 0.75);
  if (threshold) {
    // Lower median over seeds, with "never" sorting last; an odd seed count
    // gives the true median. Majority-never yields "No".
    constexpr std::uint64_t kNever = UINT64_MAX;
    std::vector<std::uint64_t> steps;
    for (const auto& h : histories) {
      const auto s = surpass_step(h, *threshold);
      steps.push_back(s ? *s : kNever);
    }
    if (!steps.empty()) {
      std::sort(steps.begin(), steps.end());
      const std::uint64_t med = steps[(steps.size() - 1) / 2];
      if (med != kNever) row.surpass = med;
    }
  }
  return row;
}

std::vector<CompareRow> compare(const std::vector<TrainConfig>& configs,
                                const std::vector<std::uint64_t>& seeds,
                                std::optional<double> threshold) {
  if (configs.empty()) throw ConfigError("compare: need at least one config");
  if (seeds.empty()) throw ConfigError("compare: need at least one seed");
  std::vector<CompareRow> rows;
  for (const TrainConfig& base : configs) {
    std::vector<std::vector<MetricsRow>> histories;
    std::size_t failures = 0;
    for (const std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.out_dir = base.out_dir + "/seed" + std::to_string(seed);
      try {
        histories.push_back(train(cfg).rows);
      } catch (const std::exception&) {
        failures += 1;
      }
    }
    const std::string label = std::filesystem::path(base.out_dir).filename().string();
    rows.push_back(summarize_runs(label.empty() ? to_string(base.variant) : label, histories,
                                  threshold, failures));
  }
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s %5s %5s %14s %14s %14s %10s\n", "run", "seeds", "fail",
                "median_final", "iqr25", "iqr75", "surpass");
  os << buf;
  for (const CompareRow& r : rows) {
    const std::string surpass = r.surpass ? std::to_string(*r.surpass) : "No";
    std::snprintf(buf, sizeof(buf), "%-24s %5zu %5zu %14.6g %14.6g %14.6g %10s\n", r.label.c_str(),
                  r.n_seeds, r.failures, r.median_final, r.iqr_lo, r.iqr_hi, surpass.c_str());
    os << buf;
  }
  return os.str();
}

}  // namespace rllab
