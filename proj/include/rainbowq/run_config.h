#pragma once

// Flat run configuration: every tunable of the engine as one `key = value`
// entry with the published defaults baked in.  Files, environment variables
// (RAINBOWQ_<KEY>) and command-line overrides all funnel through the same
// key table, so unknown keys fail identically everywhere.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rainbowq/agent.h"
#include "rainbowq/preprocess.h"
#include "rainbowq/qnet.h"
#include "rainbowq/replay.h"
#include "rainbowq/vector_env.h"

namespace rainbowq {

// The e/k/b interleave and run length.  k may be fractional (0.25 trains
// once per four vector steps, accumulator semantics); with integral k the
// counter algebra train_steps = k * post_warmup_vector_steps holds exactly.
struct Schedule {
  int batch_size = 256;
  int num_envs = 64;
  double train_steps_per_vector_step = 2.0;  // k
  int64_t warmup_frames = 80'000;
  int64_t total_frames = 10'000'000;
  int64_t snapshot_period_frames = 1'000'000;

  double replay_ratio() const {
    return static_cast<double>(batch_size) * train_steps_per_vector_step / num_envs;
  }
  void validate() const;
};

struct RunConfig {
  // run
  std::string env = "chain";
  int64_t chain_states = 8;
  int64_t seed = 1;
  std::string out_dir = "runs/out";
  std::string mode = "serial";  // serial | overlap

  // schedule
  int64_t batch_size = 256;
  int64_t num_envs = 64;
  double train_steps_per_vector_step = 2.0;
  int64_t warmup_frames = 80'000;
  int64_t total_frames = 10'000'000;
  int64_t snapshot_period_frames = 1'000'000;

  // learner
  double gamma = 0.99;
  double learning_rate = 0.00025;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps_scale = 0.005;
  double grad_clip_norm = 10.0;
  int64_t target_sync_frames = 32'000;
  double eps_initial = 1.0;
  double eps_final = 0.01;
  int64_t eps_decay_frames = 500'000;
  std::string loss = "huber";  // huber | mse

  // network
  int64_t multiplier = 2;
  std::string sn = "none";  // none | all | last
  double sigma0 = 0.5;
  int64_t hidden = 256;
  int64_t pool_grid = 6;

  // replay
  int64_t replay_capacity = int64_t{1} << 20;
  int64_t n_step = 3;
  double priority_exponent = 0.5;
  double priority_floor = 1e-6;
  double beta0 = 0.45;
  int64_t beta_frames = 10'000'000;
  bool store_u8 = true;

  // pixel preprocessing
  bool grayscale = true;
  int64_t frame_skip = 4;
  int64_t frame_stack = 4;
  int64_t frame_height = 84;
  int64_t frame_width = 84;
  bool max_pool_consecutive = true;
  int64_t noop_max = 30;
  int64_t time_limit_frames = 108'000;
};

// All known keys in declaration order.
const std::vector<std::string>& config_keys();

// Single-key access; ConfigError on unknown key or malformed value.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const RunConfig& cfg, const std::string& key);

// File format: one `key = value` per line, `#` starts a comment.
RunConfig load_config_file(const std::string& path);
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);

// Layered assembly: defaults, then file (if any), then RAINBOWQ_<KEY>
// environment variables, then explicit overrides, then validation.
RunConfig parse_config(const std::string& file_path,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

// Every key, grouped, round-trips through the parser to an identical config.
std::string serialize_config(const RunConfig& cfg);
void write_config_file(const RunConfig& cfg, const std::string& path);

// Component extraction (each result re-validated by its own type).
Schedule schedule_of(const RunConfig& cfg);
AgentConfig agent_config_of(const RunConfig& cfg);
ReplayConfig replay_config_of(const RunConfig& cfg);
PreprocessConfig preprocess_of(const RunConfig& cfg);
EnvSpec env_spec_of(const RunConfig& cfg);
NetConfig net_config_of(const RunConfig& cfg, const std::vector<int>& obs_shape,
                        int num_actions);

// Cross-field validation of the whole config.
void validate(const RunConfig& cfg);

}  // namespace rainbowq
