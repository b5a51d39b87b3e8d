#include "rllab/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rllab/errors.hpp"

namespace rllab {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError(std::string("trajectory: non-finite ") + what);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Trajectory make_trajectory(std::vector<Transition> transitions) {
  Trajectory t;
  t.transitions = std::move(transitions);
  if (t.transitions.empty()) throw ValidationError("trajectory: empty");
  t.r_sum = 0.0;
  for (const Transition& tr : t.transitions) t.r_sum += tr.r;
  validate_trajectory(t, t.transitions.front().s.size(), t.transitions.front().a.size());
  return t;
}

void validate_trajectory(const Trajectory& traj, std::size_t state_dim, std::size_t action_dim) {
  if (traj.transitions.empty()) throw ValidationError("trajectory: empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < traj.transitions.size(); ++i) {
    const Transition& tr = traj.transitions[i];
    if (tr.s.size() != state_dim || tr.s_next.size() != state_dim)
      throw ValidationError("trajectory: state dim mismatch at step " + std::to_string(i));
    if (tr.a.size() != action_dim)
      throw ValidationError("trajectory: action dim mismatch at step " + std::to_string(i));
    check_finite(tr.s, "state");
    check_finite(tr.a, "action");
    check_finite(tr.s_next, "next state");
    if (!std::isfinite(tr.r)) throw ValidationError("trajectory: non-finite reward");
    if (i + 1 < traj.transitions.size()) {
      if (tr.done) throw ValidationError("trajectory: done before the last transition");
      if (tr.s_next != traj.transitions[i + 1].s)
        throw ValidationError("trajectory: broken chain at step " + std::to_string(i));
    }
    sum += tr.r;
  }
  if (std::abs(sum - traj.r_sum) > 1e-9 * std::max(1.0, std::abs(sum)))
    throw ValidationError("trajectory: cached return does not match the reward sum");
}

void save_trajectories(const std::string& path, const DemoFile& file) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path);
  os << to_string(file.env_id) << ' ' << file.state_dim << ' ' << file.action_dim << ' '
     << file.trajectories.size() << '\n';
  for (std::size_t k = 0; k < file.trajectories.size(); ++k) {
    const Trajectory& traj = file.trajectories[k];
    validate_trajectory(traj, file.state_dim, file.action_dim);
    for (const Transition& t : traj.transitions) {
      for (double v : t.s) os << fmt17(v) << ' ';
      for (double v : t.a) os << fmt17(v) << ' ';
      os << fmt17(t.r) << ' ';
      for (double v : t.s_next) os << fmt17(v) << ' ';
      os << (t.done ? 1 : 0) << ' ' << k << '\n';
    }
  }
  if (!os) throw ValidationError("write failed: " + path);
}

DemoFile load_trajectories(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open: " + path);
  std::string env_name;
  std::size_t n_traj = 0;
  DemoFile file;
  if (!(is >> env_name >> file.state_dim >> file.action_dim >> n_traj))
    throw ValidationError("trajectory file: bad header in " + path);
  file.env_id = env_id_from_string(env_name);
  if (file.state_dim == 0 || file.action_dim == 0 || n_traj == 0)
    throw ValidationError("trajectory file: degenerate header in " + path);

  std::vector<std::vector<Transition>> groups(n_traj);
  while (true) {
    Transition t;
    t.s.resize(file.state_dim);
    t.a.resize(file.action_dim);
    t.s_next.resize(file.state_dim);
    if (!(is >> t.s[0])) break;  // clean EOF before a record
    for (std::size_t i = 1; i < file.state_dim; ++i)
      if (!(is >> t.s[i])) throw ValidationError("trajectory file: truncated record");
    for (std::size_t i = 0; i < file.action_dim; ++i)
      if (!(is >> t.a[i])) throw ValidationError("trajectory file: truncated record");
    if (!(is >> t.r)) throw ValidationError("trajectory file: truncated record");
    for (std::size_t i = 0; i < file.state_dim; ++i)
      if (!(is >> t.s_next[i])) throw ValidationError("trajectory file: truncated record");
    int done_flag = 0;
    std::size_t traj_idx = 0;
    if (!(is >> done_flag >> traj_idx)) throw ValidationError("trajectory file: truncated record");
    if (done_flag != 0 && done_flag != 1)
      throw ValidationError("trajectory file: done flag must be 0 or 1");
    if (traj_idx >= n_traj) throw ValidationError("trajectory file: trajectory index out of range");
    t.done = done_flag == 1;
    groups[traj_idx].push_back(std::move(t));
  }

  for (std::size_t k = 0; k < n_traj; ++k) {
    if (groups[k].empty())
      throw ValidationError("trajectory file: trajectory " + std::to_string(k) + " is empty");
    file.trajectories.push_back(make_trajectory(std::move(groups[k])));
  }
  return file;
}

std::vector<Trajectory> collect_demos(const EnvSpec& spec, const ControllerSpec& ctrl,
                                      std::size_t n_traj, std::uint64_t seed) {
  if (n_traj == 0) throw ConfigError("collect_demos: n_traj must be >= 1");
  Rng noise_rng = Rng::sub(seed, "demo-noise");
  std::vector<Trajectory> out;
  out.reserve(n_traj);
  for (std::size_t k = 0; k < n_traj; ++k) {
    EnvState st = env_reset(spec, episode_seed(seed, k));
    std::vector<Transition> steps;
    steps.reserve(spec.max_episode_steps);
    while (true) {
      Transition t;
      t.s = st.x;
      t.a = controller_act(ctrl, spec, st, noise_rng);
      StepOut so = env_step(spec, st, t.a);
      t.r = so.reward;
      t.s_next = so.next.x;
      t.done = so.done;
      steps.push_back(std::move(t));
      st = std::move(so.next);
      if (steps.back().done) break;
    }
    out.push_back(make_trajectory(std::move(steps)));
  }
  return out;
}

}  // namespace rllab
