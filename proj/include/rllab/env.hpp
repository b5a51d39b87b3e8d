#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rllab/rng.hpp"

namespace rllab {

enum class EnvId : std::uint8_t { point_mass, pendulum };

std::string to_string(EnvId id);
EnvId env_id_from_string(const std::string& s);

struct EnvSpec {
  EnvId id = EnvId::point_mass;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  double action_bound = 1.0;
  std::size_t max_episode_steps = 200;
  double dt = 0.05;
};

EnvSpec env_spec(EnvId id);

// The state vector doubles as the observation.
//   point_mass: [px, py, vx, vy, gx, gy]
//   pendulum:   [cos th, sin th, omega], th = 0 upright
struct EnvState {
  std::vector<double> x;
  std::size_t t = 0;
  std::uint64_t episode_seed = 0;
};

struct StepOut {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed);
StepOut env_step(const EnvSpec& spec, const EnvState& state, std::span<const double> action);

enum class ControllerKind : std::uint8_t { expert, imperfect };

struct ControllerSpec {
  ControllerKind kind = ControllerKind::expert;
  double gain = 1.0;
  std::vector<double> bias;  // empty means zero
  double noise_std = 0.0;
};

// Expert controller (gain 1, no bias, no noise).
ControllerSpec expert_controller();
// Imperfect controller; defaults give roughly half-strength, noisy actions.
ControllerSpec imperfect_controller(double gain = 0.5, double noise_std = 0.1);
// Demo-regime default for an environment: expert as-is; imperfect with a
// per-env action bias so its returns land well below the expert's.
ControllerSpec default_controller(EnvId id, ControllerKind kind);

std::vector<double> controller_act(const ControllerSpec& ctrl, const EnvSpec& spec,
                                   const EnvState& state, Rng& rng);

}  // namespace rllab
