#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rllab/agent.hpp"
#include "rllab/config.hpp"
#include "rllab/env.hpp"
#include "rllab/metrics.hpp"
#include "rllab/trajectory.hpp"

namespace rllab {

// Deterministic state -> action map used by evaluation and diagnostics.
using PolicyFn = std::function<std::vector<double>(std::span<const double>)>;

// Mean return of `n_episodes` deterministic rollouts. Episode k resets with
// episode_seed(seed, k), the same derivation collect_demos uses, so a scripted
// controller wrapped as a PolicyFn reproduces its demo returns. Optionally
// reports the per-episode returns.
double evaluate(const PolicyFn& policy, const EnvSpec& spec, std::size_t n_episodes,
                std::uint64_t seed, std::vector<double>* returns = nullptr);

struct BcReport {
  double initial_mse = 0.0;  // mean squared action error before training
  double final_mse = 0.0;    // and after the last epoch
};

// Full-batch Adam on the mean squared action error over all demo transitions.
// Zero epochs leaves the agent untouched; otherwise the actor target is
// re-synced to the pretrained actor afterwards. The agent's own optimizer
// state is not disturbed.
template <typename T>
BcReport bc_pretrain(Agent<T>& ag, const std::vector<Trajectory>& demos, std::uint64_t epochs,
                     double lr) {
  if (demos.empty()) throw ConfigError("bc_pretrain: need at least one demonstration");
  if (!(lr > 0.0)) throw ConfigError("bc_pretrain: lr must be > 0");
  std::size_t n = 0;
  for (const Trajectory& d : demos) n += d.size();
  const std::size_t sd = ag.cfg.state_dim, ad = ag.cfg.action_dim;
  Mat<T> s(n, sd);
  Mat<T> a(n, ad);
  std::size_t row = 0;
  for (const Trajectory& d : demos)
    for (const Transition& t : d.transitions) {
      if (t.s.size() != sd || t.a.size() != ad)
        throw ShapeError("bc_pretrain: demo dimensions do not match the agent");
      for (std::size_t j = 0; j < sd; ++j) s.at(row, j) = static_cast<T>(t.s[j]);
      for (std::size_t j = 0; j < ad; ++j) a.at(row, j) = static_cast<T>(t.a[j]);
      row += 1;
    }

  const double denom = static_cast<double>(n * ad);
  auto mse = [&](const Mat<T>& pred) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
      const double diff = static_cast<double>(pred.v[i]) - static_cast<double>(a.v[i]);
      sum += diff * diff;
    }
    return sum / denom;
  };

  BcReport report;
  report.initial_mse = mse(detail::actor_forward(ag.actor, s, ag.cfg.action_bound));
  report.final_mse = report.initial_mse;
  if (epochs == 0) return report;

  AdamState<T> opt = adam_init(ag.actor, static_cast<T>(lr));
  for (std::uint64_t e = 0; e < epochs; ++e) {
    ForwardCache<T> cache;
    Mat<T> pred = detail::actor_forward(ag.actor, s, ag.cfg.action_bound, &cache);
    Mat<T> gout(n, ad);
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
      const double diff = static_cast<double>(pred.v[i]) - static_cast<double>(a.v[i]);
      // d mse / d pred, then through the bound scaling of actor_forward
      gout.v[i] = static_cast<T>(2.0 * diff / denom * ag.cfg.action_bound);
    }
    MlpGrads<T> grads;
    mlp_backward(ag.actor, cache, gout, &grads);
    adam_step(opt, ag.actor, grads);
  }
  report.final_mse = mse(detail::actor_forward(ag.actor, s, ag.cfg.action_bound));
  ag.actor_target = ag.actor;
  return report;
}

struct TrainResult {
  std::vector<MetricsRow> rows;
  double final_eval = 0.0;
  std::string out_dir;
  std::optional<BcReport> bc;  // present for variants that pretrain
};

// Effective agent configuration for a training config, with the variant's
// coercions applied (td3 pins the ensemble to N = M = 2; variants without the
// policy constraint get a disabled lambda schedule). Checkpoint consumers use
// this to rebuild the exact agent a run trained.
AgentConfig make_agent_config(const TrainConfig& cfg);

// Runs one training job per the config, writing metrics.csv, run.log,
// config.txt, agent.bin, and actor.bin under cfg.out_dir. Deterministic given
// the config (sequential critic mode); wall-clock timings go to run.log only,
// never into metrics.csv.
TrainResult train(const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Q-error diagnostic

// Dynamics + value oracle pair the diagnostic rolls against. `step` advances
// the diagnosed policy one step from a state (time limits are not its
// concern); `qvalue` scores Q(s, pi(s)) for the same policy.
struct DiagModel {
  std::function<std::pair<std::vector<double>, double>(const std::vector<double>&)> step;
  std::function<double(const std::vector<double>&)> qvalue;
};

// Discounted Monte-Carlo return of the model's policy from s0, truncated
// after `horizon` steps. Tracks the largest |reward| seen when asked.
double mc_return(const DiagModel& model, const std::vector<double>& s0, double gamma,
                 std::size_t horizon, double* r_max = nullptr);

struct QErrorReport {
  double mean_abs_error = 0.0;  // mean |qvalue(s) - G(s)|
  double r_max = 0.0;           // largest |reward| seen in the MC rollouts
  double tail_bound = 0.0;      // gamma^horizon * r_max, the truncation slack
  std::size_t n_states = 0;
};

QErrorReport q_error_mean(const DiagModel& model, const std::vector<std::vector<double>>& states,
                          double gamma, std::size_t horizon);

// Samples n_states states visited by the agent's deterministic policy, then
// compares actor_q_mean(s, pi(s)) against the truncated Monte-Carlo return of
// that policy. Rollouts ignore the environment time limit (the critics are
// trained to bootstrap through it), so returns reflect the stationary policy.
template <typename T>
QErrorReport q_error_diagnostic(const Agent<T>& ag, const EnvSpec& spec, std::size_t n_states,
                                std::size_t horizon, Rng& rng) {
  if (n_states == 0) throw ConfigError("q_error_diagnostic: n_states must be >= 1");
  if (horizon == 0) throw ConfigError("q_error_diagnostic: horizon must be >= 1");
  if (spec.state_dim != ag.cfg.state_dim || spec.action_dim != ag.cfg.action_dim)
    throw ShapeError("q_error_diagnostic: env does not match the agent");

  Rng dummy(0);
  const ExplorationNoise quiet{0.0, 0.0};
  std::vector<std::vector<double>> visited;
  while (visited.size() < n_states) {
    EnvState st = env_reset(spec, rng.next_u64());
    for (std::size_t t = 0; t < spec.max_episode_steps; ++t) {
      visited.push_back(st.x);
      const std::vector<double> act = select_action(ag, st.x, quiet, dummy);
      StepOut so = env_step(spec, st, act);
      st = std::move(so.next);
      if (so.done) break;
    }
  }
  std::vector<std::vector<double>> states(n_states);
  for (auto& s : states) s = visited[rng.uniform_int(visited.size())];

  DiagModel model;
  model.step = [&ag, &spec, &dummy, &quiet](const std::vector<double>& s) {
    EnvState st;
    st.x = s;
    st.t = 0;  // never trips the time limit
    const std::vector<double> act = select_action(ag, st.x, quiet, dummy);
    StepOut so = env_step(spec, st, act);
    return std::make_pair(std::move(so.next.x), so.reward);
  };
  model.qvalue = [&ag, &dummy, &quiet](const std::vector<double>& s) {
    const std::vector<double> act = select_action(ag, s, quiet, dummy);
    return actor_q_mean(ag, s, act);
  };
  return q_error_mean(model, states, ag.cfg.gamma, horizon);
}

// ---------------------------------------------------------------------------
// Run comparison (per-variant medians and the "surpass" statistic)

// First eval step of a window of evals all strictly above the threshold; the
// window is 3 consecutive evals ("stably exceeds"), shrinking to the history
// length for very short runs. nullopt when the return never stays above.
std::optional<std::uint64_t> surpass_step(const std::vector<MetricsRow>& rows, double threshold);

struct CompareRow {
  std::string label;
  std::size_t n_seeds = 0;
  std::size_t failures = 0;                    // runs that threw; excluded below
  double median_final = 0.0;                   // median of final eval returns
  double iqr_lo = 0.0, iqr_hi = 0.0;           // 25th / 75th percentile
  std::optional<std::uint64_t> surpass;        // lower-median across seeds; nullopt = "No"
};

// Summarizes already-run histories (one per seed) into a table row.
CompareRow summarize_runs(const std::string& label,
                          const std::vector<std::vector<MetricsRow>>& histories,
                          std::optional<double> threshold, std::size_t failures = 0);

// Runs every (config, seed) pair sequentially; pair (i, k) trains under
// configs[i] with seed seeds[k] and out_dir <configs[i].out_dir>/seed<k>.
// Failed runs are counted per row instead of aborting the sweep.
std::vector<CompareRow> compare(const std::vector<TrainConfig>& configs,
                                const std::vector<std::uint64_t>& seeds,
                                std::optional<double> threshold);

std::string format_compare_table(const std::vector<CompareRow>& rows);

}  // namespace rllab
