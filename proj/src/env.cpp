#include "rllab/env.hpp"

#include <algorithm>
#include <cmath>

#include "rllab/errors.hpp"

namespace rllab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// point mass
constexpr double kPmVelMax = 5.0;
constexpr double kPmKp = 4.0;
constexpr double kPmKd = 4.0;

// pendulum (th = 0 upright)
constexpr double kPdGravity = 10.0;
constexpr double kPdOmegaMax = 8.0;
constexpr double kPdKp = 10.0;
constexpr double kPdKd = 2.0;

double wrap_angle(double th) {
  th = std::fmod(th + kPi, 2 * kPi);
  if (th < 0) th += 2 * kPi;
  return th - kPi;
}

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

void check_action(const EnvSpec& spec, std::span<const double> a) {
  if (a.size() != spec.action_dim)
    throw ShapeError("env_step: action dim " + std::to_string(a.size()) + ", expected " +
                     std::to_string(spec.action_dim));
  for (double v : a)
    if (!std::isfinite(v)) throw NumericError("env_step: non-finite action");
}

}  // namespace

std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::point_mass: return "pointmass";
    case EnvId::pendulum: return "pendulum";
  }
  throw ConfigError("unknown env id");
}

EnvId env_id_from_string(const std::string& s) {
  if (s == "pointmass") return EnvId::point_mass;
  if (s == "pendulum") return EnvId::pendulum;
  throw ConfigError("unknown environment '" + s + "' (expected pointmass or pendulum)");
}

EnvSpec env_spec(EnvId id) {
  EnvSpec s;
  s.id = id;
  s.dt = 0.05;
  switch (id) {
    case EnvId::point_mass:
      s.state_dim = 6;
      s.action_dim = 2;
      s.action_bound = 1.0;
      s.max_episode_steps = 100;
      break;
    case EnvId::pendulum:
      s.state_dim = 3;
      s.action_dim = 1;
      s.action_bound = 8.0;
      s.max_episode_steps = 200;
      break;
  }
  return s;
}

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed) {
  EnvState st;
  st.t = 0;
  st.episode_seed = seed;
  Rng rng = Rng::sub(seed, "reset");
  switch (spec.id) {
    case EnvId::point_mass: {
      st.x.resize(6);
      st.x[0] = rng.uniform(-1.0, 1.0);  // position
      st.x[1] = rng.uniform(-1.0, 1.0);
      st.x[2] = 0.0;  // velocity
      st.x[3] = 0.0;
      // goal kept away from the start so every episode requires motion
      for (int tries = 0; tries < 100; ++tries) {
        st.x[4] = rng.uniform(-1.0, 1.0);
        st.x[5] = rng.uniform(-1.0, 1.0);
        const double dx = st.x[4] - st.x[0], dy = st.x[5] - st.x[1];
        if (dx * dx + dy * dy >= 0.25) break;
      }
      break;
    }
    case EnvId::pendulum: {
      st.x.resize(3);
      const double th = rng.uniform(-kPi, kPi);
      st.x[0] = std::cos(th);
      st.x[1] = std::sin(th);
      st.x[2] = rng.uniform(-1.0, 1.0);
      break;
    }
  }
  return st;
}

StepOut env_step(const EnvSpec& spec, const EnvState& state, std::span<const double> action) {
  check_action(spec, action);
  if (state.t >= spec.max_episode_steps)
    throw ValidationError("env_step: episode already finished");

  StepOut out;
  out.next.t = state.t + 1;
  out.next.episode_seed = state.episode_seed;
  out.done = out.next.t >= spec.max_episode_steps;

  switch (spec.id) {
    case EnvId::point_mass: {
      const double ax = clip(action[0], -spec.action_bound, spec.action_bound);
      const double ay = clip(action[1], -spec.action_bound, spec.action_bound);
      const double px = state.x[0], py = state.x[1];
      const double vx = state.x[2], vy = state.x[3];
      const double gx = state.x[4], gy = state.x[5];
      const double dist = std::hypot(px - gx, py - gy);
      out.reward = -dist - 0.01 * (ax * ax + ay * ay);
      out.next.x = {px + spec.dt * vx,
                    py + spec.dt * vy,
                    clip(vx + spec.dt * ax, -kPmVelMax, kPmVelMax),
                    clip(vy + spec.dt * ay, -kPmVelMax, kPmVelMax),
                    gx,
                    gy};
      break;
    }
    case EnvId::pendulum: {
      const double u = clip(action[0], -spec.action_bound, spec.action_bound);
      const double th = std::atan2(state.x[1], state.x[0]);
      const double om = state.x[2];
      out.reward = -(th * th + 0.1 * om * om + 0.001 * u * u);
      // unit mass and length: th_dd = 3g/2 sin(th) + 3u
      const double om2 = clip(om + spec.dt * (1.5 * kPdGravity * std::sin(th) + 3.0 * u),
                              -kPdOmegaMax, kPdOmegaMax);
      const double th2 = wrap_angle(th + spec.dt * om);
      out.next.x = {std::cos(th2), std::sin(th2), om2};
      break;
    }
  }
  return out;
}

ControllerSpec expert_controller() { return ControllerSpec{}; }

ControllerSpec imperfect_controller(double gain, double noise_std) {
  ControllerSpec c;
  c.kind = ControllerKind::imperfect;
  c.gain = gain;
  c.noise_std = noise_std;
  return c;
}

ControllerSpec default_controller(EnvId id, ControllerKind kind) {
  if (kind == ControllerKind::expert) return expert_controller();
  ControllerSpec c = imperfect_controller();
  // A constant action bias gives the imperfect regime a systematic error the
  // gain scale alone cannot: a stabilizing PD still parks on the goal at half
  // gain, while the bias leaves a steady-state offset.
  if (id == EnvId::point_mass) c.bias = {0.8, 0.8};
  return c;
}

std::vector<double> controller_act(const ControllerSpec& ctrl, const EnvSpec& spec,
                                   const EnvState& state, Rng& rng) {
  if (ctrl.kind == ControllerKind::expert &&
      (ctrl.gain != 1.0 || ctrl.noise_std != 0.0 || !ctrl.bias.empty()))
    throw ConfigError("controller_act: expert controller must have gain 1, no bias, no noise");
  if (!(ctrl.gain > 0.0) || ctrl.gain > 1.0)
    throw ConfigError("controller_act: gain must be in (0, 1]");
  if (ctrl.noise_std < 0.0) throw ConfigError("controller_act: noise std must be >= 0");
  if (!ctrl.bias.empty() && ctrl.bias.size() != spec.action_dim)
    throw ShapeError("controller_act: bias dim mismatch");

  std::vector<double> pd(spec.action_dim, 0.0);
  switch (spec.id) {
    case EnvId::point_mass:
      pd[0] = kPmKp * (state.x[4] - state.x[0]) - kPmKd * state.x[2];
      pd[1] = kPmKp * (state.x[5] - state.x[1]) - kPmKd * state.x[3];
      break;
    case EnvId::pendulum: {
      const double th = std::atan2(state.x[1], state.x[0]);
      pd[0] = -kPdKp * th - kPdKd * state.x[2];
      break;
    }
  }

  std::vector<double> a(spec.action_dim);
  for (std::size_t i = 0; i < spec.action_dim; ++i) {
    double v = ctrl.gain * pd[i];
    if (!ctrl.bias.empty()) v += ctrl.bias[i];
    if (ctrl.noise_std > 0.0) v += rng.normal(0.0, ctrl.noise_std);
    a[i] = clip(v, -spec.action_bound, spec.action_bound);
  }
  return a;
}

}  // namespace rllab
