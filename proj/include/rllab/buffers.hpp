#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rllab/rng.hpp"
#include "rllab/trajectory.hpp"

namespace rllab {

// Trajectory-level experience buffer B_e. Seeded from demonstrations; later
// admits only trajectories whose return strictly exceeds the current minimum,
// evicting the minimum-return trajectory when over capacity. The admission
// threshold r_min therefore never decreases.
class ExperienceBuffer {
 public:
  ExperienceBuffer(std::vector<Trajectory> demos, std::size_t capacity_traj);

  bool maybe_admit(Trajectory traj);

  double r_min() const;
  const std::vector<double>& r_sum_list() const { return r_sums_; }
  const std::vector<Trajectory>& trajectories() const { return trajs_; }
  std::size_t capacity() const { return capacity_; }

  std::size_t n_transitions() const { return n_transitions_; }
  // Uniform addressing over all stored transitions, flattened across
  // trajectories in storage order.
  const Transition& flat(std::size_t index) const;

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  void save(const std::string& path, EnvId env_id) const;
  static ExperienceBuffer load(const std::string& path, std::size_t capacity_traj);

 private:
  void rebuild_index();

  std::vector<Trajectory> trajs_;
  std::vector<double> r_sums_;
  std::vector<std::size_t> cum_len_;  // cum_len_[i] = transitions in trajs_[0..i]
  std::size_t capacity_ = 0;
  std::size_t n_transitions_ = 0;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
};

// Transition-level FIFO sample buffer B_m, stored as flat parallel arrays.
class SampleBuffer {
 public:
  SampleBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  // Row accessors; index 0 is the oldest stored transition.
  const double* s(std::size_t i) const { return s_.data() + slot(i) * state_dim_; }
  const double* a(std::size_t i) const { return a_.data() + slot(i) * action_dim_; }
  double r(std::size_t i) const { return r_[slot(i)]; }
  const double* s_next(std::size_t i) const { return s_next_.data() + slot(i) * state_dim_; }
  bool done(std::size_t i) const { return done_[slot(i)] != 0; }

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

 private:
  std::size_t slot(std::size_t i) const { return (head_ + i) % capacity_; }

  std::size_t capacity_, state_dim_, action_dim_;
  std::size_t head_ = 0, size_ = 0;
  std::vector<double> s_, a_, r_, s_next_;
  std::vector<std::uint8_t> done_;
};

// Per-episode transition accumulator B_ς.
class TrajectoryAccumulator {
 public:
  void start() { steps_.clear(); }
  void push(const Transition& t) { steps_.push_back(t); }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  // Validates and hands back the finished episode, leaving the accumulator
  // ready for the next one.
  Trajectory finish();

 private:
  std::vector<Transition> steps_;
};

enum class Provenance : std::uint8_t { experience, sample };

struct Batch {
  std::size_t b = 0;
  std::size_t state_dim = 0, action_dim = 0;
  std::vector<double> s, a, r, s_next;  // row-major, b rows
  std::vector<std::uint8_t> done;
  std::vector<Provenance> prov;
};

// Draws round(alpha*b) rows uniformly (with replacement) over B_e's flattened
// transitions and the rest over B_m. Returns nullopt when B_m cannot yet
// supply a batch (size <= b), mirroring the training loop's readiness guard.
std::optional<Batch> mixed_sample(const ExperienceBuffer* be, const SampleBuffer& bm,
                                  std::size_t b, double alpha, Rng& rng);

}  // namespace rllab
