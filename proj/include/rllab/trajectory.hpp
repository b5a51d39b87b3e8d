#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rllab/env.hpp"

namespace rllab {

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> transitions;
  double r_sum = 0.0;  // cumulative undiscounted reward, kept in sync

  std::size_t size() const { return transitions.size(); }
};

// Builds a trajectory, computing r_sum by a left fold over rewards, and
// validates consistency (non-empty, finite, chained s_next -> s, done only on
// the last transition). Throws ValidationError on violations.
Trajectory make_trajectory(std::vector<Transition> transitions);

// Re-checks the Trajectory invariants (including the cached r_sum).
void validate_trajectory(const Trajectory& traj, std::size_t state_dim, std::size_t action_dim);

struct DemoFile {
  EnvId env_id = EnvId::point_mass;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<Trajectory> trajectories;
};

// Delimited-text trajectory format. Header "env state_dim action_dim n_traj",
// then one line per transition: s a r s_next done traj_index. Values are
// written with %.17g so doubles round-trip exactly.
void save_trajectories(const std::string& path, const DemoFile& file);
DemoFile load_trajectories(const std::string& path);

// Reset seed for rollout k of a rollout batch. Demo collection and policy
// evaluation share this derivation, so evaluating a deterministic controller
// wrapped as a policy reproduces collect_demos' episodes exactly.
inline std::uint64_t episode_seed(std::uint64_t seed, std::size_t k) {
  return Rng::derive_seed(seed, "episode-" + std::to_string(k));
}

// Rolls out n_traj full episodes of the controller. Deterministic given seed.
std::vector<Trajectory> collect_demos(const EnvSpec& spec, const ControllerSpec& ctrl,
                                      std::size_t n_traj, std::uint64_t seed);

}  // namespace rllab
