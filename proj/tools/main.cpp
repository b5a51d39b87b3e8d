#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rllab/harness.hpp"
#include "rllab/plot.hpp"

using namespace rllab;

namespace {

// Exit codes are a stable contract: 0 success, 2 usage/config/validation
// failure, 3 numeric failure during training or checking.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

ControllerKind parse_quality(const std::string& q) {
  if (q == "expert") return ControllerKind::expert;
  if (q == "imperfect") return ControllerKind::imperfect;
  throw ConfigError("quality must be expert or imperfect, got '" + q + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw ConfigError("need at least one seed");
  return seeds;
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

TrainConfig config_from_flags(const std::string& config_path,
                              const std::vector<std::string>& sets) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  if (!sets.empty()) cfg = parse_config(parse_overrides(sets), cfg);
  return cfg;
}

int cmd_gen_demos(const std::string& env_name, const std::string& quality, std::size_t n,
                  std::uint64_t seed, const std::string& out) {
  const EnvId env = env_id_from_string(env_name);
  const EnvSpec spec = env_spec(env);
  const ControllerSpec ctrl = default_controller(env, parse_quality(quality));
  const std::vector<Trajectory> demos = collect_demos(spec, ctrl, n, seed);
  save_trajectories(out, {env, spec.state_dim, spec.action_dim, demos});
  double sum = 0.0;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    std::printf("trajectory %zu: return %.6f, %zu steps\n", i, demos[i].r_sum, demos[i].size());
    sum += demos[i].r_sum;
  }
  std::printf("mean return %.6f over %zu trajectories -> %s\n",
              sum / static_cast<double>(demos.size()), demos.size(), out.c_str());
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets) {
  const TrainConfig cfg = config_from_flags(config_path, sets);
  const TrainResult res = train(cfg);
  if (res.bc)
    std::printf("bc pretrain: mse %.6g -> %.6g\n", res.bc->initial_mse, res.bc->final_mse);
  std::printf("final evaluation return %.6f after %llu steps\n", res.final_eval,
              static_cast<unsigned long long>(cfg.total_steps));
  std::printf("artifacts in %s: metrics.csv agent.bin actor.bin run.log config.txt\n",
              res.out_dir.c_str());
  return kExitOk;
}

// The actor file records its own precision; load at whichever width it was
// trained and evaluate through a double-facing policy.
PolicyFn load_actor_policy(const std::string& path, const EnvSpec& spec) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw ValidationError("cannot open actor file: " + path);
  char head[5] = {};
  probe.read(head, sizeof head);
  if (!probe) throw ValidationError("actor file truncated: " + path);
  const bool f64 = head[4] == 8;
  std::ifstream is(path, std::ios::binary);
  if (f64) {
    auto net = std::make_shared<Mlp<double>>(mlp_load<double>(is));
    return [net, spec](std::span<const double> s) {
      Mat<double> m(1, s.size());
      std::copy(s.begin(), s.end(), m.v.begin());
      Mat<double> a = detail::actor_forward(*net, m, spec.action_bound);
      return std::vector<double>(a.v.begin(), a.v.end());
    };
  }
  auto net = std::make_shared<Mlp<float>>(mlp_load<float>(is));
  return [net, spec](std::span<const double> s) {
    Mat<float> m(1, s.size());
    for (std::size_t i = 0; i < s.size(); ++i) m.v[i] = static_cast<float>(s[i]);
    Mat<float> a = detail::actor_forward(*net, m, spec.action_bound);
    return std::vector<double>(a.v.begin(), a.v.end());
  };
}

int cmd_eval(const std::string& actor_path, const std::string& env_name, std::size_t episodes,
             std::uint64_t seed) {
  const EnvSpec spec = env_spec(env_id_from_string(env_name));
  const PolicyFn policy = load_actor_policy(actor_path, spec);
  std::vector<double> returns;
  const double mean = evaluate(policy, spec, episodes, seed, &returns);
  for (std::size_t k = 0; k < returns.size(); ++k)
    std::printf("episode %zu: return %.6f\n", k, returns[k]);
  std::printf("mean return %.6f over %zu episodes\n", mean, returns.size());
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& seed_csv,
                std::optional<double> threshold) {
  std::vector<TrainConfig> configs;
  for (const std::string& p : config_paths) configs.push_back(load_config(p));
  const std::vector<CompareRow> rows = compare(configs, parse_seed_list(seed_csv), threshold);
  std::fputs(format_compare_table(rows).c_str(), stdout);
  return kExitOk;
}

int cmd_plot(const std::vector<std::string>& series_flags, const std::string& out,
             const std::string& title) {
  std::vector<PlotSeries> series;
  for (const std::string& flag : series_flags) {
    const auto eq = flag.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("series must look like label=metrics.csv[,more.csv], got '" + flag + "'");
    PlotSeries s;
    s.label = flag.substr(0, eq);
    std::stringstream ss(flag.substr(eq + 1));
    std::string path;
    while (std::getline(ss, path, ','))
      if (!path.empty()) s.runs.push_back(load_metrics(path));
    series.push_back(std::move(s));
  }
  write_svg(out, render_reward_svg(series, title));
  std::printf("wrote %s (%zu series)\n", out.c_str(), series.size());
  return kExitOk;
}

// Hidden layers are relu, so an instance whose pre-activation sits within the
// FD step of a kink would produce a spurious mismatch. Instances are redrawn
// until every hidden unit clears this margin (>> the 1e-5 step).
constexpr double kKinkMargin = 1e-3;

int cmd_grad_check(std::uint64_t seed, double tol) {
  double worst = 0.0;
  const auto report = [&](const char* name, double err) {
    std::printf("%-28s worst relative error %.3e\n", name, err);
    worst = std::max(worst, err);
  };

  // network backward pass against central differences, a few shapes
  {
    Rng rng(Rng::derive_seed(seed, "net"));
    const std::vector<std::vector<std::size_t>> shapes{{3, 8, 2}, {6, 16, 1}, {4, 12, 12, 3}};
    double err = 0.0;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      Mlp<double> net;
      Mat<double> x(5, shapes[k].front());
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 256) throw NumericError("grad-check: no kink-free instance found");
        net = mlp_init<double>(shapes[k], k % 2 ? Activation::identity : Activation::tanh,
                               rng.next_u64());
        for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);
        if (relu_kink_margin(net, x) > kKinkMargin) break;
      }
      ForwardCache<double> cache;
      const Mat<double> out = mlp_forward(net, x, &cache);
      Mat<double> gout(out.rows, out.cols);
      for (std::size_t i = 0; i < out.v.size(); ++i) gout.v[i] = 2.0 * out.v[i];
      MlpGrads<double> grads;
      mlp_backward(net, cache, gout, &grads);
      const auto loss = [&](const Mlp<double>& m) {
        const Mat<double> o = mlp_forward(m, x);
        double l = 0.0;
        for (const double v : o.v) l += v * v;
        return l;
      };
      err = std::max(err, grad_check<double>(loss, net, grads, 1e-5));
    }
    report("network backward", err);
  }

  // critic loss gradient (value regression against fixed targets)
  AgentConfig acfg;
  acfg.state_dim = 4;
  acfg.action_dim = 2;
  acfg.hidden = 12;
  acfg.n_critics = 3;
  acfg.subset_m = 2;
  acfg.action_bound = 1.5;
  Rng rng(Rng::derive_seed(seed, "loss"));
  Agent<double> ag = agent_init<double>(acfg, seed);
  Batch batch;
  Mat<double> sa;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 256) throw NumericError("grad-check: no kink-free instance found");
    if (attempt > 0) ag = agent_init<double>(acfg, rng.next_u64());
    batch = Batch{};
    batch.b = 6;
    batch.state_dim = acfg.state_dim;
    batch.action_dim = acfg.action_dim;
    for (std::size_t i = 0; i < batch.b * acfg.state_dim; ++i)
      batch.s.push_back(rng.uniform(-1.0, 1.0));
    for (std::size_t i = 0; i < batch.b * acfg.action_dim; ++i)
      batch.a.push_back(rng.uniform(-1.5, 1.5));
    for (std::size_t i = 0; i < batch.b; ++i) {
      batch.r.push_back(rng.uniform(-1.0, 1.0));
      batch.done.push_back(0);
      batch.prov.push_back(Provenance::sample);
    }
    batch.s_next = batch.s;
    Mat<double> s = detail::to_mat<double>(batch.s, batch.b, acfg.state_dim);
    Mat<double> a = detail::to_mat<double>(batch.a, batch.b, acfg.action_dim);
    sa = detail::concat_cols(s, a);

    // actor loss feeds pi(s) into every critic; its FD perturbations must not
    // cross a kink in the actor or in any critic
    const Mat<double> a_hat = detail::actor_forward(ag.actor, s, acfg.action_bound);
    const Mat<double> sa_pi = detail::concat_cols(s, a_hat);
    double m = std::min(relu_kink_margin(ag.actor, s), relu_kink_margin(ag.critics[0], sa));
    for (const auto& c : ag.critics) m = std::min(m, relu_kink_margin(c, sa_pi));
    if (m > kKinkMargin) break;
  }
  {
    std::vector<double> y(batch.b);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    const auto [loss0, grads] = critic_loss_and_grads(ag, 0, sa, y);
    (void)loss0;
    Agent<double> shadow = ag;
    const auto loss = [&](const Mlp<double>& m) {
      shadow.critics[0] = m;
      return critic_loss_and_grads(shadow, 0, sa, y).first;
    };
    report("critic loss gradient", grad_check<double>(loss, ag.critics[0], grads, 1e-5));
  }

  // policy loss gradient (ensemble mean plus constraint penalty)
  {
    const double lambda = 0.7;
    const auto [loss0, grads] = actor_loss_and_grads(ag, batch, lambda);
    (void)loss0;
    Agent<double> shadow = ag;
    const auto loss = [&](const Mlp<double>& m) {
      shadow.actor = m;
      return actor_loss_and_grads(shadow, batch, lambda).first;
    };
    report("policy loss gradient", grad_check<double>(loss, ag.actor, grads, 1e-5));
  }

  std::printf("worst overall %.3e (tolerance %.1e)\n", worst, tol);
  if (worst > tol) {
    std::fprintf(stderr, "gradient check FAILED\n");
    return kExitNumeric;
  }
  return kExitOk;
}

int cmd_diagnose(const std::string& run_dir, std::size_t n_states, std::size_t horizon,
                 std::uint64_t seed) {
  const TrainConfig cfg = load_config(run_dir + "/config.txt");
  const EnvSpec spec = env_spec(cfg.env);
  std::ifstream is(run_dir + "/agent.bin", std::ios::binary);
  if (!is) throw ValidationError("cannot open " + run_dir + "/agent.bin");

  QErrorReport rep;
  Rng rng(seed);
  if (cfg.precision == Precision::f32) {
    Agent<float> ag = agent_init<float>(make_agent_config(cfg), cfg.seed);
    load_agent(ag, is);
    rep = q_error_diagnostic(ag, spec, n_states, horizon, rng);
  } else {
    Agent<double> ag = agent_init<double>(make_agent_config(cfg), cfg.seed);
    load_agent(ag, is);
    rep = q_error_diagnostic(ag, spec, n_states, horizon, rng);
  }
  std::printf("mean |Q - G| over %zu states: %.6f\n", rep.n_states, rep.mean_abs_error);
  std::printf("largest |reward| seen: %.6f\n", rep.r_max);
  std::printf("truncation slack gamma^%zu * r_max: %.6g\n", horizon, rep.tail_bound);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"off-policy actor-critic laboratory with demonstration-seeded replay"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-demos", "roll out a scripted controller to a demo file");
  std::string gen_env, gen_quality = "expert", gen_out;
  std::size_t gen_n = 4;
  std::uint64_t gen_seed = 1;
  gen->add_option("--env", gen_env, "pointmass or pendulum")->required();
  gen->add_option("--quality", gen_quality, "expert or imperfect");
  gen->add_option("--n", gen_n, "number of trajectories");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output trajectory file")->required();

  auto* tr = app.add_subcommand("train", "run one training job");
  std::string tr_config;
  std::vector<std::string> tr_sets;
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--set", tr_sets, "override, key=value (repeatable)");

  auto* ev = app.add_subcommand("eval", "evaluate a saved actor deterministically");
  std::string ev_actor, ev_env;
  std::size_t ev_episodes = 10;
  std::uint64_t ev_seed = 1;
  ev->add_option("--actor", ev_actor, "actor.bin from a run directory")->required();
  ev->add_option("--env", ev_env, "pointmass or pendulum")->required();
  ev->add_option("--episodes", ev_episodes, "episode count");
  ev->add_option("--seed", ev_seed, "evaluation seed");

  auto* cp = app.add_subcommand("compare", "train variants over seeds, print a summary table");
  std::vector<std::string> cp_configs;
  std::string cp_seeds = "1";
  double cp_threshold = 0.0;
  cp->add_option("--config", cp_configs, "config file (repeatable)")->required();
  cp->add_option("--seeds", cp_seeds, "comma-separated seed list");
  auto* cp_thr = cp->add_option("--threshold", cp_threshold, "surpass threshold return");

  auto* pl = app.add_subcommand("plot", "render reward curves from metrics files");
  std::vector<std::string> pl_series;
  std::string pl_out, pl_title = "evaluation return";
  pl->add_option("--series", pl_series, "label=metrics.csv[,more.csv] (repeatable)")->required();
  pl->add_option("--out", pl_out, "output .svg path")->required();
  pl->add_option("--title", pl_title, "plot title");

  auto* gc = app.add_subcommand("grad-check", "finite-difference audit of every gradient path");
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-6;
  gc->add_option("--seed", gc_seed, "randomization seed");
  gc->add_option("--tol", gc_tol, "worst relative error allowed");

  auto* dg = app.add_subcommand("diagnose", "Monte-Carlo audit of a trained run's Q-estimates");
  std::string dg_run;
  std::size_t dg_states = 32, dg_horizon = 200;
  std::uint64_t dg_seed = 1;
  dg->add_option("--run", dg_run, "run directory with config.txt and agent.bin")->required();
  dg->add_option("--n-states", dg_states, "visited states to score");
  dg->add_option("--horizon", dg_horizon, "Monte-Carlo rollout length");
  dg->add_option("--seed", dg_seed, "state-sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_demos(gen_env, gen_quality, gen_n, gen_seed, gen_out);
    if (tr->parsed()) return cmd_train(tr_config, tr_sets);
    if (ev->parsed()) return cmd_eval(ev_actor, ev_env, ev_episodes, ev_seed);
    if (cp->parsed())
      return cmd_compare(cp_configs, cp_seeds,
                         cp_thr->count() ? std::optional<double>(cp_threshold) : std::nullopt);
    if (pl->parsed()) return cmd_plot(pl_series, pl_out, pl_title);
    if (gc->parsed()) return cmd_grad_check(gc_seed, gc_tol);
    if (dg->parsed()) return cmd_diagnose(dg_run, dg_states, dg_horizon, dg_seed);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
