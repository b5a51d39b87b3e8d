#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rllab/numerics.hpp"
#include "rllab/trajectory.hpp"

namespace testutil {

// Chained single-dim trajectory with a prescribed return: the first step
// carries all the reward.
inline rllab::Trajectory make_traj(double r_total, std::size_t len = 3) {
  std::vector<rllab::Transition> ts;
  for (std::size_t i = 0; i < len; ++i) {
    rllab::Transition t;
    t.s = {static_cast<double>(i)};
    t.a = {0.0};
    t.r = i == 0 ? r_total : 0.0;
    t.s_next = {static_cast<double>(i + 1)};
    t.done = i + 1 == len;
    ts.push_back(std::move(t));
  }
  return rllab::make_trajectory(std::move(ts));
}

// 99th percentile of the chi-square distribution via the Wilson–Hilferty
// transform; accurate to a few percent for df >= 10, ample for test gates.
inline double chi2_quantile_99(std::size_t df) {
  const double d = static_cast<double>(df);
  const double z99 = 2.3263478740408408;
  const double c = 2.0 / (9.0 * d);
  const double t = 1.0 - c + z99 * std::sqrt(c);
  return d * t * t * t;
}

// Pearson statistic for observed counts against a uniform expectation.
inline double chi2_uniform_stat(const std::vector<std::size_t>& counts, std::size_t n_draws) {
  const double expected = static_cast<double>(n_draws) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Independent oracle: per-element forward pass with plain loops.
inline std::vector<double> naive_forward(const rllab::Mlp<double>& net,
                                         const std::vector<double>& x) {
  std::vector<double> cur = x;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    std::vector<double> next(net.layer_sizes[l + 1], 0.0);
    for (std::size_t o = 0; o < next.size(); ++o) {
      double acc = net.biases[l][o];
      for (std::size_t k = 0; k < cur.size(); ++k) acc += net.weights[l].at(o, k) * cur[k];
      next[o] = acc;
    }
    const bool last = l + 1 == net.n_layers();
    for (auto& v : next) {
      if (!last)
        v = v > 0 ? v : 0;
      else if (net.output_act == rllab::Activation::tanh)
        v = std::tanh(v);
      else if (net.output_act == rllab::Activation::relu)
        v = v > 0 ? v : 0;
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace testutil
