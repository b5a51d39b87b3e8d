#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "rllab/buffers.hpp"
#include "rllab/errors.hpp"
#include "rllab/numerics.hpp"
#include "rllab/rng.hpp"

namespace rllab {

// Noise used both for exploration and for target-action smoothing:
// eps = clip(N(0, sigma), -clip, clip).
struct ExplorationNoise {
  double sigma = 0.1;
  double clip = 0.5;
};

enum class LambdaMode : std::uint8_t { linear, exponential };

// Monotone non-increasing schedule for the policy-constraint weight.
struct LambdaSchedule {
  double lambda_init = 1.0;
  double lambda_min = 0.05;
  std::uint64_t decay_horizon = 1;
  LambdaMode mode = LambdaMode::linear;
};

inline double lambda_value(const LambdaSchedule& sched, std::uint64_t step) {
  if (sched.lambda_init <= 0.0) return 0.0;  // constraint disabled
  const double h = static_cast<double>(std::max<std::uint64_t>(1, sched.decay_horizon));
  double v;
  if (sched.mode == LambdaMode::linear) {
    v = sched.lambda_init * (1.0 - static_cast<double>(step) / h);
  } else {
    const double floor_ratio = std::max(sched.lambda_min, 1e-12) / sched.lambda_init;
    const double rho = std::pow(floor_ratio, 1.0 / h);
    v = sched.lambda_init * std::pow(rho, static_cast<double>(step));
  }
  return std::max(sched.lambda_min, v);
}

struct AgentConfig {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t hidden = 64;
  std::size_t n_critics = 10;
  std::size_t subset_m = 2;
  double lr = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  double action_bound = 1.0;
  ExplorationNoise noise;          // exploration and target smoothing
  LambdaSchedule lambda;
  bool online_actor_targets = false;  // use the online actor for a' (ablation)
  bool parallel_critics = false;
};

template <typename T>
struct Agent {
  AgentConfig cfg;
  Mlp<T> actor, actor_target;
  std::vector<Mlp<T>> critics, critic_targets_;
  AdamState<T> actor_opt;
  std::vector<AdamState<T>> critic_opts;
  std::uint64_t updates_done = 0;
};

template <typename T>
Agent<T> agent_init(const AgentConfig& cfg, std::uint64_t seed) {
  if (cfg.state_dim == 0 || cfg.action_dim == 0) throw ConfigError("agent: zero dimension");
  if (cfg.n_critics < 2) throw ConfigError("agent: need at least 2 critics");
  if (cfg.subset_m < 1 || cfg.subset_m > cfg.n_critics)
    throw ConfigError("agent: subset size must be in [1, N]");
  if (!(cfg.action_bound > 0.0)) throw ConfigError("agent: action bound must be positive");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("agent: gamma must be in [0, 1]");
  // tau = 0 is the frozen-target diagnostic: Polyak updates are skipped
  if (cfg.tau < 0.0 || cfg.tau > 1.0) throw ConfigError("agent: tau must be in [0, 1]");
  if (cfg.noise.sigma < 0.0 || cfg.noise.clip < 0.0)
    throw ConfigError("agent: noise parameters must be >= 0");

  Agent<T> ag;
  ag.cfg = cfg;
  const std::vector<std::size_t> pi_sizes{cfg.state_dim, cfg.hidden, cfg.action_dim};
  const std::vector<std::size_t> q_sizes{cfg.state_dim + cfg.action_dim, cfg.hidden, 1};
  ag.actor = mlp_init<T>(pi_sizes, Activation::tanh, Rng::derive_seed(seed, "actor"));
  ag.actor_target = ag.actor;
  ag.actor_opt = adam_init(ag.actor, static_cast<T>(cfg.lr));
  for (std::size_t i = 0; i < cfg.n_critics; ++i) {
    ag.critics.push_back(
        mlp_init<T>(q_sizes, Activation::identity, Rng::derive_seed(seed, "critic-" + std::to_string(i))));
    ag.critic_targets_.push_back(ag.critics.back());
    ag.critic_opts.push_back(adam_init(ag.critics.back(), static_cast<T>(cfg.lr)));
  }
  return ag;
}

namespace detail {

template <typename T>
Mat<T> to_mat(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) throw ShapeError("batch: flat array size mismatch");
  Mat<T> m(rows, cols);
  for (std::size_t i = 0; i < v.size(); ++i) m.v[i] = static_cast<T>(v[i]);
  return m;
}

// Actor net emits tanh in [-1, 1]; the wrapper scales by the action bound.
template <typename T>
Mat<T> actor_forward(const Mlp<T>& net, const Mat<T>& s, double bound,
                     ForwardCache<T>* cache = nullptr) {
  Mat<T> out = mlp_forward(net, s, cache);
  for (auto& v : out.v) v *= static_cast<T>(bound);
  return out;
}

template <typename T>
Mat<T> concat_cols(const Mat<T>& a, const Mat<T>& b) {
  if (a.rows != b.rows) throw ShapeError("concat: row mismatch");
  Mat<T> out(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    std::copy(a.row(i), a.row(i) + a.cols, out.row(i));
    std::copy(b.row(i), b.row(i) + b.cols, out.row(i) + a.cols);
  }
  return out;
}

}  // namespace detail

// Draws M distinct indices from [0, N) by partial Fisher–Yates; the first M
// slots of the shuffled index array, in shuffle order. One uniform_int draw
// per slot. This draw-order contract is relied on by determinism tests.
inline std::vector<std::size_t> draw_subset(std::size_t n, std::size_t m, Rng& rng) {
  if (m > n) throw ConfigError("draw_subset: m > n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.uniform_int(n - k));
    std::swap(idx[k], idx[j]);
  }
  idx.resize(m);
  return idx;
}

// action = clip(pi(s) + clip(N(0, sigma), -c, c), +-bound). sigma = 0 draws
// nothing from rng and gives the deterministic evaluation policy.
template <typename T>
std::vector<double> select_action(const Agent<T>& ag, std::span<const double> state,
                                  const ExplorationNoise& noise, Rng& rng) {
  if (state.size() != ag.cfg.state_dim) throw ShapeError("select_action: state dim mismatch");
  for (double v : state)
    if (!std::isfinite(v)) throw NumericError("select_action: non-finite state");
  Mat<T> s(1, state.size());
  for (std::size_t i = 0; i < state.size(); ++i) s.v[i] = static_cast<T>(state[i]);
  Mat<T> a = detail::actor_forward(ag.actor, s, ag.cfg.action_bound);
  std::vector<double> out(ag.cfg.action_dim);
  const double bound = ag.cfg.action_bound;
  for (std::size_t j = 0; j < out.size(); ++j) {
    double v = static_cast<double>(a.v[j]);
    if (noise.sigma > 0.0) {
      const double eps =
          std::clamp(rng.normal(0.0, noise.sigma), -noise.clip, noise.clip);
      v += eps;
    }
    out[j] = std::clamp(v, -bound, bound);
  }
  return out;
}

// Min over a caller-drawn subset of target critics, for one (s', a') pair.
template <typename T>
double target_q(const Agent<T>& ag, std::span<const double> s_next, std::span<const double> a_next,
                const std::vector<std::size_t>& subset) {
  if (subset.empty()) throw ValidationError("target_q: empty subset");
  std::vector<bool> seen(ag.cfg.n_critics, false);
  for (std::size_t i : subset) {
    if (i >= ag.cfg.n_critics) throw ValidationError("target_q: subset index out of range");
    if (seen[i]) throw ValidationError("target_q: duplicate subset index");
    seen[i] = true;
  }
  if (s_next.size() != ag.cfg.state_dim || a_next.size() != ag.cfg.action_dim)
    throw ShapeError("target_q: dim mismatch");
  Mat<T> sa(1, s_next.size() + a_next.size());
  for (std::size_t i = 0; i < s_next.size(); ++i) sa.v[i] = static_cast<T>(s_next[i]);
  for (std::size_t i = 0; i < a_next.size(); ++i)
    sa.v[s_next.size() + i] = static_cast<T>(a_next[i]);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : subset) {
    Mat<T> q = mlp_forward(ag.critic_targets_[i], sa);
    best = std::min(best, static_cast<double>(q.v[0]));
  }
  return best;
}

// Per-row TD targets: a' = clip(actor'(s') + clipped noise, +-bound),
// y = r + gamma * min over one fresh subset of target critics. The done flag
// is deliberately ignored: all terminations are time limits, so bootstrapping
// continues through them. Draw order from rng: subset first, then smoothing
// noise row-major over (row, action dim).
template <typename T>
std::vector<double> critic_targets(const Agent<T>& ag, const Batch& batch, Rng& rng) {
  const std::size_t b = batch.b;
  Mat<T> s_next = detail::to_mat<T>(batch.s_next, b, batch.state_dim);
  const std::vector<std::size_t> subset = draw_subset(ag.cfg.n_critics, ag.cfg.subset_m, rng);

  const Mlp<T>& pi = ag.cfg.online_actor_targets ? ag.actor : ag.actor_target;
  Mat<T> a_next = detail::actor_forward(pi, s_next, ag.cfg.action_bound);
  const ExplorationNoise& nz = ag.cfg.noise;
  const T bound = static_cast<T>(ag.cfg.action_bound);
  for (std::size_t i = 0; i < b; ++i) {
    T* row = a_next.row(i);
    for (std::size_t j = 0; j < batch.action_dim; ++j) {
      double v = static_cast<double>(row[j]);
      if (nz.sigma > 0.0)
        v += std::clamp(rng.normal(0.0, nz.sigma), -nz.clip, nz.clip);
      row[j] = std::clamp(static_cast<T>(v), -bound, bound);
    }
  }

  Mat<T> sa = detail::concat_cols(s_next, a_next);
  std::vector<double> y(b);
  std::vector<Mat<T>> qs;
  qs.reserve(subset.size());
  for (std::size_t k : subset) qs.push_back(mlp_forward(ag.critic_targets_[k], sa));
  for (std::size_t i = 0; i < b; ++i) {
    double mn = std::numeric_limits<double>::infinity();
    for (const Mat<T>& q : qs) mn = std::min(mn, static_cast<double>(q.at(i, 0)));
    y[i] = batch.r[i] + ag.cfg.gamma * mn;
    if (!std::isfinite(y[i])) throw NumericError("critic_targets: non-finite target");
  }
  return y;
}

// Loss of critic i against fixed targets: sum over the batch of
// (Q_i(s, a) - y)^2. Adam absorbs the sum-vs-mean scale.
template <typename T>
std::pair<double, MlpGrads<T>> critic_loss_and_grads(const Agent<T>& ag, std::size_t i,
                                                     const Mat<T>& sa,
                                                     const std::vector<double>& y) {
  if (i >= ag.cfg.n_critics) throw ValidationError("critic_loss_and_grads: index out of range");
  if (sa.rows != y.size()) throw ShapeError("critic_loss_and_grads: batch size mismatch");
  for (double v : y)
    if (!std::isfinite(v)) throw NumericError("critic_loss_and_grads: non-finite target");

  ForwardCache<T> cache;
  Mat<T> q = mlp_forward(ag.critics[i], sa, &cache);
  double loss = 0.0;
  Mat<T> gout(q.rows, 1);
  for (std::size_t r = 0; r < q.rows; ++r) {
    const double diff = static_cast<double>(q.at(r, 0)) - y[r];
    loss += diff * diff;
    gout.at(r, 0) = static_cast<T>(2.0 * diff);
  }
  MlpGrads<T> grads;
  mlp_backward(ag.critics[i], cache, gout, &grads);
  return {loss, std::move(grads)};
}

// Mean over the online ensemble for one (s, a) pair.
template <typename T>
double actor_q_mean(const Agent<T>& ag, std::span<const double> s, std::span<const double> a) {
  if (s.size() != ag.cfg.state_dim || a.size() != ag.cfg.action_dim)
    throw ShapeError("actor_q_mean: dim mismatch");
  Mat<T> sa(1, s.size() + a.size());
  for (std::size_t i = 0; i < s.size(); ++i) sa.v[i] = static_cast<T>(s[i]);
  for (std::size_t i = 0; i < a.size(); ++i) sa.v[s.size() + i] = static_cast<T>(a[i]);
  double sum = 0.0;
  for (const Mlp<T>& c : ag.critics) sum += static_cast<double>(mlp_forward(c, sa).v[0]);
  return sum / static_cast<double>(ag.cfg.n_critics);
}

// Policy loss over a batch:
//   sum_rows [ -(1/N) sum_i Q_i(s, pi(s)) + lambda * ||a - pi(s)||^2 ]
// Gradient flows through pi into the critics' action inputs (critic
// parameters frozen) and through the behavior-cloning penalty.
template <typename T>
std::pair<double, MlpGrads<T>> actor_loss_and_grads(const Agent<T>& ag, const Batch& batch,
                                                    double lambda) {
  if (lambda < 0.0) throw ConfigError("actor_loss_and_grads: lambda must be >= 0");
  const std::size_t b = batch.b;
  Mat<T> s = detail::to_mat<T>(batch.s, b, batch.state_dim);
  Mat<T> a_data = detail::to_mat<T>(batch.a, b, batch.action_dim);

  ForwardCache<T> pi_cache;
  Mat<T> a_hat = detail::actor_forward(ag.actor, s, ag.cfg.action_bound, &pi_cache);
  Mat<T> sa = detail::concat_cols(s, a_hat);

  const double inv_n = 1.0 / static_cast<double>(ag.cfg.n_critics);
  double loss = 0.0;
  Mat<T> d_ahat(b, batch.action_dim);  // dL/d a_hat

  Mat<T> gout(b, 1);
  for (auto& v : gout.v) v = static_cast<T>(-inv_n);
  for (const Mlp<T>& critic : ag.critics) {
    ForwardCache<T> qc;
    Mat<T> q = mlp_forward(critic, sa, &qc);
    for (std::size_t r = 0; r < b; ++r) loss -= inv_n * static_cast<double>(q.at(r, 0));
    Mat<T> din;
    mlp_backward<T>(critic, qc, gout, nullptr, &din);
    for (std::size_t r = 0; r < b; ++r) {
      const T* src = din.row(r) + batch.state_dim;  // action part of d/d(s,a)
      T* dst = d_ahat.row(r);
      for (std::size_t j = 0; j < batch.action_dim; ++j) dst[j] += src[j];
    }
  }

  if (lambda > 0.0) {
    for (std::size_t r = 0; r < b; ++r) {
      const T* ad = a_data.row(r);
      const T* ah = a_hat.row(r);
      T* dst = d_ahat.row(r);
      for (std::size_t j = 0; j < batch.action_dim; ++j) {
        const double diff = static_cast<double>(ah[j]) - static_cast<double>(ad[j]);
        loss += lambda * diff * diff;
        dst[j] += static_cast<T>(2.0 * lambda * diff);
      }
    }
  }

  // chain through the output scaling a_hat = bound * tanh_out
  for (auto& v : d_ahat.v) v *= static_cast<T>(ag.cfg.action_bound);
  MlpGrads<T> grads;
  mlp_backward(ag.actor, pi_cache, d_ahat, &grads);
  return {loss, std::move(grads)};
}

struct UpdateMetrics {
  double critic_loss_mean = 0.0;  // mean over critics of the summed batch loss
  double actor_loss = 0.0;
  double lambda = 0.0;
  double y_mean = 0.0;
};

// One full learner step at environment step `step`:
//   targets -> N critic Adam updates -> actor Adam update -> Polyak updates.
template <typename T>
UpdateMetrics update_step(Agent<T>& ag, const Batch& batch, std::uint64_t step, Rng& rng) {
  if (batch.state_dim != ag.cfg.state_dim || batch.action_dim != ag.cfg.action_dim)
    throw ShapeError("update_step: batch dims do not match the agent");

  UpdateMetrics out;
  const std::vector<double> y = critic_targets(ag, batch, rng);
  out.y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

  Mat<T> s = detail::to_mat<T>(batch.s, batch.b, batch.state_dim);
  Mat<T> a = detail::to_mat<T>(batch.a, batch.b, batch.action_dim);
  Mat<T> sa = detail::concat_cols(s, a);

  const std::size_t n = ag.cfg.n_critics;
  std::vector<double> losses(n, 0.0);
  auto critic_update = [&](std::size_t i) {
    auto [loss, grads] = critic_loss_and_grads(ag, i, sa, y);
    losses[i] = loss;
    adam_step(ag.critic_opts[i], ag.critics[i], grads);
  };
  if (ag.cfg.parallel_critics && n > 1) {
    const std::size_t n_threads = std::min<std::size_t>(
        n, std::max<std::size_t>(1, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += n_threads) critic_update(i);
      });
    for (auto& th : pool) th.join();
  } else {
    for (std::size_t i = 0; i < n; ++i) critic_update(i);
  }
  out.critic_loss_mean =
      std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);

  out.lambda = lambda_value(ag.cfg.lambda, step);
  auto [aloss, agrads] = actor_loss_and_grads(ag, batch, out.lambda);
  out.actor_loss = aloss;
  adam_step(ag.actor_opt, ag.actor, agrads);

  if (ag.cfg.tau > 0.0) {
    const T tau = static_cast<T>(ag.cfg.tau);
    polyak_update(ag.actor_target, ag.actor, tau);
    for (std::size_t i = 0; i < n; ++i) polyak_update(ag.critic_targets_[i], ag.critics[i], tau);
  }
  ag.updates_done += 1;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpointing

inline constexpr std::uint32_t kAgentMagic = 0x31544741;  // "AGT1"

template <typename T>
void adam_save(const AdamState<T>& st, std::ostream& os) {
  detail::write_pod(os, st.step);
  detail::write_pod(os, st.lr);
  detail::write_pod(os, st.beta1);
  detail::write_pod(os, st.beta2);
  detail::write_pod(os, st.eps);
  detail::write_pod(os, static_cast<std::uint32_t>(st.m_w.size()));
  for (std::size_t l = 0; l < st.m_w.size(); ++l) {
    detail::write_bytes(os, st.m_w[l].v.data(), st.m_w[l].size() * sizeof(T));
    detail::write_bytes(os, st.v_w[l].v.data(), st.v_w[l].size() * sizeof(T));
    detail::write_bytes(os, st.m_b[l].data(), st.m_b[l].size() * sizeof(T));
    detail::write_bytes(os, st.v_b[l].data(), st.v_b[l].size() * sizeof(T));
  }
}

template <typename T>
void adam_load(AdamState<T>& st, std::istream& is) {
  st.step = detail::read_pod<std::uint64_t>(is);
  st.lr = detail::read_pod<T>(is);
  st.beta1 = detail::read_pod<T>(is);
  st.beta2 = detail::read_pod<T>(is);
  st.eps = detail::read_pod<T>(is);
  const auto layers = detail::read_pod<std::uint32_t>(is);
  if (layers != st.m_w.size()) throw ValidationError("agent checkpoint: optimizer layout mismatch");
  for (std::size_t l = 0; l < st.m_w.size(); ++l) {
    detail::read_bytes(is, st.m_w[l].v.data(), st.m_w[l].size() * sizeof(T));
    detail::read_bytes(is, st.v_w[l].v.data(), st.v_w[l].size() * sizeof(T));
    detail::read_bytes(is, st.m_b[l].data(), st.m_b[l].size() * sizeof(T));
    detail::read_bytes(is, st.v_b[l].data(), st.v_b[l].size() * sizeof(T));
  }
}

// The rng blob is owned by the caller (the training loop serializes its
// streams into it); it rides along so a restore resumes bit-identically.
template <typename T>
void save_agent(const Agent<T>& ag, const std::string& rng_blob, std::ostream& os) {
  detail::write_pod(os, kAgentMagic);
  detail::write_pod(os, static_cast<std::uint8_t>(sizeof(T)));
  detail::write_pod(os, static_cast<std::uint64_t>(ag.cfg.n_critics));
  detail::write_pod(os, static_cast<std::uint64_t>(ag.cfg.subset_m));
  detail::write_pod(os, ag.updates_done);
  mlp_save(ag.actor, os);
  mlp_save(ag.actor_target, os);
  for (const auto& c : ag.critics) mlp_save(c, os);
  for (const auto& c : ag.critic_targets_) mlp_save(c, os);
  adam_save(ag.actor_opt, os);
  for (const auto& o : ag.critic_opts) adam_save(o, os);
  detail::write_pod(os, static_cast<std::uint64_t>(rng_blob.size()));
  detail::write_bytes(os, rng_blob.data(), rng_blob.size());
}

template <typename T>
std::string load_agent(Agent<T>& ag, std::istream& is) {
  if (detail::read_pod<std::uint32_t>(is) != kAgentMagic)
    throw ValidationError("agent checkpoint: bad magic");
  if (detail::read_pod<std::uint8_t>(is) != sizeof(T))
    throw ValidationError("agent checkpoint: precision mismatch");
  if (detail::read_pod<std::uint64_t>(is) != ag.cfg.n_critics)
    throw ValidationError("agent checkpoint: critic count mismatch");
  if (detail::read_pod<std::uint64_t>(is) != ag.cfg.subset_m)
    throw ValidationError("agent checkpoint: subset size mismatch");
  ag.updates_done = detail::read_pod<std::uint64_t>(is);
  ag.actor = mlp_load<T>(is);
  ag.actor_target = mlp_load<T>(is);
  for (auto& c : ag.critics) c = mlp_load<T>(is);
  for (auto& c : ag.critic_targets_) c = mlp_load<T>(is);
  adam_load(ag.actor_opt, is);
  for (auto& o : ag.critic_opts) adam_load(o, is);
  const auto blob_len = detail::read_pod<std::uint64_t>(is);
  if (blob_len > (1u << 20)) throw ValidationError("agent checkpoint: implausible rng blob");
  std::string blob(blob_len, '\0');
  detail::read_bytes(is, blob.data(), blob.size());
  return blob;
}

}  // namespace rllab
