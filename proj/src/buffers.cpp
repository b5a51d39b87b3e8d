#include "rllab/buffers.hpp"

#include <algorithm>
#include <cmath>

#include "rllab/errors.hpp"

namespace rllab {

ExperienceBuffer::ExperienceBuffer(std::vector<Trajectory> demos, std::size_t capacity_traj) {
  if (demos.empty()) throw ConfigError("experience buffer: need at least one demonstration");
  if (capacity_traj < demos.size())
    throw ConfigError("experience buffer: capacity below demonstration count");
  capacity_ = capacity_traj;
  state_dim_ = demos.front().transitions.front().s.size();
  action_dim_ = demos.front().transitions.front().a.size();
  for (Trajectory& d : demos) {
    validate_trajectory(d, state_dim_, action_dim_);
    r_sums_.push_back(d.r_sum);
    trajs_.push_back(std::move(d));
  }
  rebuild_index();
}

bool ExperienceBuffer::maybe_admit(Trajectory traj) {
  validate_trajectory(traj, state_dim_, action_dim_);
  if (!(traj.r_sum > r_min())) return false;

  r_sums_.push_back(traj.r_sum);
  trajs_.push_back(std::move(traj));
  if (trajs_.size() > capacity_) {
    // evict the minimum-return trajectory; ties broken oldest-first
    std::size_t victim = 0;
    for (std::size_t i = 1; i < r_sums_.size(); ++i)
      if (r_sums_[i] < r_sums_[victim]) victim = i;
    trajs_.erase(trajs_.begin() + static_cast<std::ptrdiff_t>(victim));
    r_sums_.erase(r_sums_.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  rebuild_index();
  return true;
}

double ExperienceBuffer::r_min() const {
  return *std::min_element(r_sums_.begin(), r_sums_.end());
}

const Transition& ExperienceBuffer::flat(std::size_t index) const {
  if (index >= n_transitions_) throw ShapeError("experience buffer: flat index out of range");
  const auto it = std::upper_bound(cum_len_.begin(), cum_len_.end(), index);
  const std::size_t traj = static_cast<std::size_t>(it - cum_len_.begin());
  const std::size_t base = traj == 0 ? 0 : cum_len_[traj - 1];
  return trajs_[traj].transitions[index - base];
}

void ExperienceBuffer::rebuild_index() {
  cum_len_.clear();
  std::size_t total = 0;
  for (const Trajectory& t : trajs_) {
    total += t.size();
    cum_len_.push_back(total);
  }
  n_transitions_ = total;
}

void ExperienceBuffer::save(const std::string& path, EnvId env_id) const {
  DemoFile file;
  file.env_id = env_id;
  file.state_dim = state_dim_;
  file.action_dim = action_dim_;
  file.trajectories = trajs_;
  save_trajectories(path, file);
}

ExperienceBuffer ExperienceBuffer::load(const std::string& path, std::size_t capacity_traj) {
  DemoFile file = load_trajectories(path);
  return ExperienceBuffer(std::move(file.trajectories), capacity_traj);
}

SampleBuffer::SampleBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw ConfigError("sample buffer: capacity must be >= 1");
  if (state_dim == 0 || action_dim == 0) throw ConfigError("sample buffer: zero dimension");
}

void SampleBuffer::push(const Transition& t) {
  if (t.s.size() != state_dim_ || t.s_next.size() != state_dim_ || t.a.size() != action_dim_)
    throw ShapeError("sample buffer: transition dim mismatch");

  std::size_t slot_idx;
  if (size_ < capacity_) {
    // grow lazily toward capacity
    slot_idx = (head_ + size_) % capacity_;
    const std::size_t need = slot_idx + 1;
    if (r_.size() < need) {
      const std::size_t slots = std::min(capacity_, std::max<std::size_t>(need * 2, 1024));
      s_.resize(slots * state_dim_);
      s_next_.resize(slots * state_dim_);
      a_.resize(slots * action_dim_);
      r_.resize(slots);
      done_.resize(slots);
    }
    size_ += 1;
  } else {
    slot_idx = head_;
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(t.s.begin(), t.s.end(), s_.begin() + static_cast<std::ptrdiff_t>(slot_idx * state_dim_));
  std::copy(t.s_next.begin(), t.s_next.end(),
            s_next_.begin() + static_cast<std::ptrdiff_t>(slot_idx * state_dim_));
  std::copy(t.a.begin(), t.a.end(), a_.begin() + static_cast<std::ptrdiff_t>(slot_idx * action_dim_));
  r_[slot_idx] = t.r;
  done_[slot_idx] = t.done ? 1 : 0;
}

Trajectory TrajectoryAccumulator::finish() {
  if (steps_.empty()) throw ValidationError("trajectory accumulator: empty episode");
  Trajectory t = make_trajectory(std::move(steps_));
  steps_.clear();
  return t;
}

std::optional<Batch> mixed_sample(const ExperienceBuffer* be, const SampleBuffer& bm,
                                  std::size_t b, double alpha, Rng& rng) {
  if (b == 0) throw ConfigError("mixed_sample: batch size must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("mixed_sample: alpha must be in [0, 1]");
  const std::size_t n_e = static_cast<std::size_t>(std::llround(alpha * static_cast<double>(b)));
  if (n_e > 0 && (be == nullptr || be->n_transitions() == 0))
    throw ConfigError("mixed_sample: alpha > 0 requires a non-empty experience buffer");
  if (bm.size() <= b) return std::nullopt;  // not ready yet

  Batch batch;
  batch.b = b;
  batch.state_dim = bm.state_dim();
  batch.action_dim = bm.action_dim();
  batch.s.reserve(b * batch.state_dim);
  batch.s_next.reserve(b * batch.state_dim);
  batch.a.reserve(b * batch.action_dim);
  batch.r.reserve(b);
  batch.done.reserve(b);
  batch.prov.reserve(b);

  for (std::size_t k = 0; k < n_e; ++k) {
    const Transition& t = be->flat(rng.uniform_int(be->n_transitions()));
    batch.s.insert(batch.s.end(), t.s.begin(), t.s.end());
    batch.a.insert(batch.a.end(), t.a.begin(), t.a.end());
    batch.r.push_back(t.r);
    batch.s_next.insert(batch.s_next.end(), t.s_next.begin(), t.s_next.end());
    batch.done.push_back(t.done ? 1 : 0);
    batch.prov.push_back(Provenance::experience);
  }
  for (std::size_t k = n_e; k < b; ++k) {
    const std::size_t i = rng.uniform_int(bm.size());
    batch.s.insert(batch.s.end(), bm.s(i), bm.s(i) + batch.state_dim);
    batch.a.insert(batch.a.end(), bm.a(i), bm.a(i) + batch.action_dim);
    batch.r.push_back(bm.r(i));
    batch.s_next.insert(batch.s_next.end(), bm.s_next(i), bm.s_next(i) + batch.state_dim);
    batch.done.push_back(bm.done(i) ? 1 : 0);
    batch.prov.push_back(Provenance::sample);
  }
  return batch;
}

}  // namespace rllab
