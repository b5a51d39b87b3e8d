#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rllab/agent.hpp"
#include "rllab/env.hpp"

namespace rllab {

enum class Variant : std::uint8_t {
  asilfd,
  td3,
  redq,
  redq_bc,
  redq_lfd,
  asilfd_noconstraint,
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

enum class Precision : std::uint8_t { f64, f32 };

struct TrainConfig {
  EnvId env = EnvId::point_mass;
  Variant variant = Variant::asilfd;
  std::uint64_t total_steps = 50000;
  std::size_t batch_size = 256;
  double alpha = 0.25;
  std::size_t n_critics = 10;
  std::size_t subset_m = 2;
  double gamma = 0.99;
  double tau = 0.005;
  double sigma = 0.1;
  double noise_clip = 0.5;
  double lambda_init = 1.0;
  double lambda_min = 0.05;
  std::uint64_t lambda_horizon = 0;  // 0: decay over the first half of training
  LambdaMode lambda_mode = LambdaMode::linear;
  std::uint64_t warmup_steps = 1000;
  std::uint64_t eval_interval = 1000;
  std::size_t eval_episodes = 10;
  std::uint64_t seed = 1;
  std::string demo_path;
  std::size_t bm_capacity = 1000000;
  std::size_t be_capacity = 16;
  std::uint64_t bc_epochs = 2000;
  double bc_lr = 1e-3;
  Precision precision = Precision::f64;
  bool parallel_critics = false;
  std::size_t hidden = 64;
  double lr = 3e-4;
  bool online_actor_targets = false;
  std::string out_dir = "run";
};

// Parses "key = value" lines ('#' comments, blank lines ignored). Unknown
// keys and out-of-range values raise ConfigError.
TrainConfig parse_config(const std::map<std::string, std::string>& kv,
                         const TrainConfig& base = TrainConfig{});
TrainConfig load_config(const std::string& path, const TrainConfig& base = TrainConfig{});
std::map<std::string, std::string> read_key_values(const std::string& path);

// Range checks shared by every entry point.
void validate_config(const TrainConfig& cfg);

// One "key = value" line per field, parseable by load_config.
std::string dump_config(const TrainConfig& cfg);

}  // namespace rllab
