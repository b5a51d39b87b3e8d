#include "rllab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rllab/errors.hpp"

namespace rllab {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::asilfd: return "asilfd";
    case Variant::td3: return "td3";
    case Variant::redq: return "redq";
    case Variant::redq_bc: return "redq_bc";
    case Variant::redq_lfd: return "redq_lfd";
    case Variant::asilfd_noconstraint: return "asilfd_noconstraint";
  }
  throw ConfigError("unknown variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "asilfd") return Variant::asilfd;
  if (s == "td3") return Variant::td3;
  if (s == "redq") return Variant::redq;
  if (s == "redq_bc") return Variant::redq_bc;
  if (s == "redq_lfd") return Variant::redq_lfd;
  if (s == "asilfd_noconstraint") return Variant::asilfd_noconstraint;
  throw ConfigError("unknown variant '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TrainConfig parse_config(const std::map<std::string, std::string>& kv, const TrainConfig& base) {
  TrainConfig cfg = base;
  for (const auto& [key, raw] : kv) {
    const std::string v = trim(raw);
    if (key == "env") cfg.env = env_id_from_string(v);
    else if (key == "variant") cfg.variant = variant_from_string(v);
    else if (key == "total_steps") cfg.total_steps = parse_u64(key, v);
    else if (key == "batch_size") cfg.batch_size = parse_u64(key, v);
    else if (key == "alpha") cfg.alpha = parse_double(key, v);
    else if (key == "n_critics") cfg.n_critics = parse_u64(key, v);
    else if (key == "subset_m") cfg.subset_m = parse_u64(key, v);
    else if (key == "gamma") cfg.gamma = parse_double(key, v);
    else if (key == "tau") cfg.tau = parse_double(key, v);
    else if (key == "sigma") cfg.sigma = parse_double(key, v);
    else if (key == "noise_clip") cfg.noise_clip = parse_double(key, v);
    else if (key == "lambda_init") cfg.lambda_init = parse_double(key, v);
    else if (key == "lambda_min") cfg.lambda_min = parse_double(key, v);
    else if (key == "lambda_horizon") cfg.lambda_horizon = parse_u64(key, v);
    else if (key == "lambda_mode") {
      if (v == "linear") cfg.lambda_mode = LambdaMode::linear;
      else if (v == "exponential") cfg.lambda_mode = LambdaMode::exponential;
      else throw ConfigError("config: lambda_mode must be linear or exponential");
    } else if (key == "warmup_steps") cfg.warmup_steps = parse_u64(key, v);
    else if (key == "eval_interval") cfg.eval_interval = parse_u64(key, v);
    else if (key == "eval_episodes") cfg.eval_episodes = parse_u64(key, v);
    else if (key == "seed") cfg.seed = parse_u64(key, v);
    else if (key == "demo_path") cfg.demo_path = v;
    else if (key == "bm_capacity") cfg.bm_capacity = parse_u64(key, v);
    else if (key == "be_capacity") cfg.be_capacity = parse_u64(key, v);
    else if (key == "bc_epochs") cfg.bc_epochs = parse_u64(key, v);
    else if (key == "bc_lr") cfg.bc_lr = parse_double(key, v);
    else if (key == "precision") {
      if (v == "f64" || v == "double") cfg.precision = Precision::f64;
      else if (v == "f32" || v == "float") cfg.precision = Precision::f32;
      else throw ConfigError("config: precision must be f64 or f32");
    } else if (key == "parallel_critics") cfg.parallel_critics = parse_bool(key, v);
    else if (key == "hidden") cfg.hidden = parse_u64(key, v);
    else if (key == "lr") cfg.lr = parse_double(key, v);
    else if (key == "online_actor_targets") cfg.online_actor_targets = parse_bool(key, v);
    else if (key == "out_dir") cfg.out_dir = v;
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  validate_config(cfg);
  return cfg;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    lineno += 1;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
    if (kv.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
    kv[key] = val;
  }
  return kv;
}

TrainConfig load_config(const std::string& path, const TrainConfig& base) {
  return parse_config(read_key_values(path), base);
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ConfigError("config: batch_size must be >= 1");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("config: alpha must be in [0, 1]");
  if (cfg.n_critics < 2) throw ConfigError("config: n_critics must be >= 2");
  if (cfg.subset_m < 1 || cfg.subset_m > cfg.n_critics)
    throw ConfigError("config: subset_m must be in [1, n_critics]");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("config: gamma must be in [0, 1]");
  if (cfg.tau < 0.0 || cfg.tau > 1.0) throw ConfigError("config: tau must be in [0, 1]");
  if (cfg.sigma < 0.0) throw ConfigError("config: sigma must be >= 0");
  if (cfg.noise_clip < 0.0) throw ConfigError("config: noise_clip must be >= 0");
  if (cfg.lambda_init < 0.0) throw ConfigError("config: lambda_init must be >= 0");
  if (cfg.lambda_min < 0.0) throw ConfigError("config: lambda_min must be >= 0");
  if (cfg.lambda_min > cfg.lambda_init && cfg.lambda_init > 0.0)
    throw ConfigError("config: lambda_min must not exceed lambda_init");
  if (cfg.eval_interval == 0) throw ConfigError("config: eval_interval must be >= 1");
  if (cfg.eval_episodes == 0) throw ConfigError("config: eval_episodes must be >= 1");
  if (cfg.bm_capacity == 0) throw ConfigError("config: bm_capacity must be >= 1");
  if (cfg.be_capacity == 0) throw ConfigError("config: be_capacity must be >= 1");
  if (cfg.hidden == 0) throw ConfigError("config: hidden must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("config: lr must be > 0");
  if (!(cfg.bc_lr > 0.0)) throw ConfigError("config: bc_lr must be > 0");
  if (cfg.out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
}

std::string dump_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "env = " << to_string(cfg.env) << '\n';
  os << "variant = " << to_string(cfg.variant) << '\n';
  os << "total_steps = " << cfg.total_steps << '\n';
  os << "batch_size = " << cfg.batch_size << '\n';
  os << "alpha = " << fmt(cfg.alpha) << '\n';
  os << "n_critics = " << cfg.n_critics << '\n';
  os << "subset_m = " << cfg.subset_m << '\n';
  os << "gamma = " << fmt(cfg.gamma) << '\n';
  os << "tau = " << fmt(cfg.tau) << '\n';
  os << "sigma = " << fmt(cfg.sigma) << '\n';
  os << "noise_clip = " << fmt(cfg.noise_clip) << '\n';
  os << "lambda_init = " << fmt(cfg.lambda_init) << '\n';
  os << "lambda_min = " << fmt(cfg.lambda_min) << '\n';
  os << "lambda_horizon = " << cfg.lambda_horizon << '\n';
  os << "lambda_mode = " << (cfg.lambda_mode == LambdaMode::linear ? "linear" : "exponential")
     << '\n';
  os << "warmup_steps = " << cfg.warmup_steps << '\n';
  os << "eval_interval = " << cfg.eval_interval << '\n';
  os << "eval_episodes = " << cfg.eval_episodes << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "demo_path = " << cfg.demo_path << '\n';
  os << "bm_capacity = " << cfg.bm_capacity << '\n';
  os << "be_capacity = " << cfg.be_capacity << '\n';
  os << "bc_epochs = " << cfg.bc_epochs << '\n';
  os << "bc_lr = " << fmt(cfg.bc_lr) << '\n';
  os << "precision = " << (cfg.precision == Precision::f64 ? "f64" : "f32") << '\n';
  os << "parallel_critics = " << (cfg.parallel_critics ? "true" : "false") << '\n';
  os << "hidden = " << cfg.hidden << '\n';
  os << "lr = " << fmt(cfg.lr) << '\n';
  os << "online_actor_targets = " << (cfg.online_actor_targets ? "true" : "false") << '\n';
  os << "out_dir = " << cfg.out_dir << '\n';
  return os.str();
}

}  // namespace rllab
