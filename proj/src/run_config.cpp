#include "rainbowq/run_config.h"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rainbowq/errors.h"

namespace rainbowq {

void Schedule::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (num_envs < 1) throw ConfigError("num_envs must be positive");
  if (!(train_steps_per_vector_step > 0.0))
    throw ConfigError("train_steps_per_vector_step must be positive");
  if (warmup_frames < 0) throw ConfigError("warmup_frames must be >= 0");
  if (total_frames < 1) throw ConfigError("total_frames must be positive");
  if (snapshot_period_frames < 1) throw ConfigError("snapshot_period_frames must be positive");
}

namespace {

enum class Kind { i64, f64, boolean, text };

struct Field {
  const char* key;
  const char* section;
  Kind kind;
  union {
    int64_t RunConfig::* i;
    double RunConfig::* f;
    bool RunConfig::* b;
    std::string RunConfig::* s;
  };
  Field(const char* k, const char* sec, int64_t RunConfig::* p)
      : key(k), section(sec), kind(Kind::i64), i(p) {}
  Field(const char* k, const char* sec, double RunConfig::* p)
      : key(k), section(sec), kind(Kind::f64), f(p) {}
  Field(const char* k, const char* sec, bool RunConfig::* p)
      : key(k), section(sec), kind(Kind::boolean), b(p) {}
  Field(const char* k, const char* sec, std::string RunConfig::* p)
      : key(k), section(sec), kind(Kind::text), s(p) {}
};

const std::vector<Field>& fields() {
  static const std::vector<Field> t = {
      {"env", "run", &RunConfig::env},
      {"chain_states", "run", &RunConfig::chain_states},
      {"seed", "run", &RunConfig::seed},
      {"out_dir", "run", &RunConfig::out_dir},
      {"mode", "run", &RunConfig::mode},

      {"batch_size", "schedule", &RunConfig::batch_size},
      {"num_envs", "schedule", &RunConfig::num_envs},
      {"train_steps_per_vector_step", "schedule", &RunConfig::train_steps_per_vector_step},
      {"warmup_frames", "schedule", &RunConfig::warmup_frames},
      {"total_frames", "schedule", &RunConfig::total_frames},
      {"snapshot_period_frames", "schedule", &RunConfig::snapshot_period_frames},

      {"gamma", "learner", &RunConfig::gamma},
      {"learning_rate", "learner", &RunConfig::learning_rate},
      {"adam_beta1", "learner", &RunConfig::adam_beta1},
      {"adam_beta2", "learner", &RunConfig::adam_beta2},
      {"adam_eps_scale", "learner", &RunConfig::adam_eps_scale},
      {"grad_clip_norm", "learner", &RunConfig::grad_clip_norm},
      {"target_sync_frames", "learner", &RunConfig::target_sync_frames},
      {"eps_initial", "learner", &RunConfig::eps_initial},
      {"eps_final", "learner", &RunConfig::eps_final},
      {"eps_decay_frames", "learner", &RunConfig::eps_decay_frames},
      {"loss", "learner", &RunConfig::loss},

      {"multiplier", "network", &RunConfig::multiplier},
      {"sn", "network", &RunConfig::sn},
      {"sigma0", "network", &RunConfig::sigma0},
      {"hidden", "network", &RunConfig::hidden},
      {"pool_grid", "network", &RunConfig::pool_grid},

      {"replay_capacity", "replay", &RunConfig::replay_capacity},
      {"n_step", "replay", &RunConfig::n_step},
      {"priority_exponent", "replay", &RunConfig::priority_exponent},
      {"priority_floor", "replay", &RunConfig::priority_floor},
      {"beta0", "replay", &RunConfig::beta0},
      {"beta_frames", "replay", &RunConfig::beta_frames},
      {"store_u8", "replay", &RunConfig::store_u8},

      {"grayscale", "preprocess", &RunConfig::grayscale},
      {"frame_skip", "preprocess", &RunConfig::frame_skip},
      {"frame_stack", "preprocess", &RunConfig::frame_stack},
      {"frame_height", "preprocess", &RunConfig::frame_height},
      {"frame_width", "preprocess", &RunConfig::frame_width},
      {"max_pool_consecutive", "preprocess", &RunConfig::max_pool_consecutive},
      {"noop_max", "preprocess", &RunConfig::noop_max},
      {"time_limit_frames", "preprocess", &RunConfig::time_limit_frames},
  };
  return t;
}

const Field& field_of(const std::string& key) {
  for (const Field& f : fields())
    if (key == f.key) return f;
  throw ConfigError("unknown config key: " + key);
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int64_t parse_i64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw ConfigError("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw ConfigError("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::string format_f64(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Field& f = field_of(key);
  switch (f.kind) {
    case Kind::i64: cfg.*(f.i) = parse_i64(key, value); break;
    case Kind::f64: cfg.*(f.f) = parse_f64(key, value); break;
    case Kind::boolean: cfg.*(f.b) = parse_bool(key, value); break;
    case Kind::text: cfg.*(f.s) = value; break;
  }
}

std::string get_key(const RunConfig& cfg, const std::string& key) {
  const Field& f = field_of(key);
  switch (f.kind) {
    case Kind::i64: return std::to_string(cfg.*(f.i));
    case Kind::f64: return format_f64(cfg.*(f.f));
    case Kind::boolean: return (cfg.*(f.b)) ? "true" : "false";
    case Kind::text: return cfg.*(f.s);
  }
  return "";
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    set_key(cfg, key, value);
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, text.str(), path);
  return cfg;
}

RunConfig parse_config(const std::string& file_path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!file_path.empty()) {
    std::ifstream in(file_path);
    if (!in) throw IoError("cannot read config file: " + file_path);
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str(), file_path);
  }
  for (const std::string& key : config_keys()) {
    std::string var = "RAINBOWQ_";
    for (char c : key) var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(var.c_str())) set_key(cfg, key, v);
  }
  for (const auto& [key, value] : overrides) set_key(cfg, key, value);
  validate(cfg);
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  const char* section = "";
  for (const Field& f : fields()) {
    if (std::string(section) != f.section) {
      section = f.section;
      out << "# " << section << "\n";
    }
    out << f.key << " = " << get_key(cfg, f.key) << "\n";
  }
  return out.str();
}

void write_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << serialize_config(cfg);
  if (!out) throw IoError("failed writing config file: " + path);
}

Schedule schedule_of(const RunConfig& cfg) {
  Schedule s;
  s.batch_size = static_cast<int>(cfg.batch_size);
  s.num_envs = static_cast<int>(cfg.num_envs);
  s.train_steps_per_vector_step = cfg.train_steps_per_vector_step;
  s.warmup_frames = cfg.warmup_frames;
  s.total_frames = cfg.total_frames;
  s.snapshot_period_frames = cfg.snapshot_period_frames;
  s.validate();
  return s;
}

AgentConfig agent_config_of(const RunConfig& cfg) {
  AgentConfig a;
  a.gamma = cfg.gamma;
  a.learning_rate = cfg.learning_rate;
  a.adam_beta1 = cfg.adam_beta1;
  a.adam_beta2 = cfg.adam_beta2;
  a.adam_eps_scale = cfg.adam_eps_scale;
  a.grad_clip_norm = cfg.grad_clip_norm;
  a.target_sync_frames = cfg.target_sync_frames;
  a.eps_initial = cfg.eps_initial;
  a.eps_final = cfg.eps_final;
  a.eps_decay_frames = cfg.eps_decay_frames;
  a.loss = parse_loss_kind(cfg.loss);
  a.batch_size = static_cast<int>(cfg.batch_size);
  a.validate();
  return a;
}

ReplayConfig replay_config_of(const RunConfig& cfg) {
  ReplayConfig r;
  r.capacity = cfg.replay_capacity;
  r.n_step = static_cast<int>(cfg.n_step);
  r.gamma = cfg.gamma;
  r.priority_exponent = cfg.priority_exponent;
  r.priority_floor = cfg.priority_floor;
  r.beta0 = cfg.beta0;
  r.beta_frames = cfg.beta_frames;
  r.num_envs = static_cast<int>(cfg.num_envs);
  r.store_u8 = cfg.store_u8;
  r.validate();
  return r;
}

PreprocessConfig preprocess_of(const RunConfig& cfg) {
  PreprocessConfig p;
  p.grayscale = cfg.grayscale;
  p.frame_skip = static_cast<int>(cfg.frame_skip);
  p.frame_stack = static_cast<int>(cfg.frame_stack);
  p.out_h = static_cast<int>(cfg.frame_height);
  p.out_w = static_cast<int>(cfg.frame_width);
  p.max_pool_consecutive = cfg.max_pool_consecutive;
  p.noop_max = static_cast<int>(cfg.noop_max);
  p.time_limit_frames = cfg.time_limit_frames;
  p.validate();
  return p;
}

EnvSpec env_spec_of(const RunConfig& cfg) {
  EnvSpec spec;
  spec.name = cfg.env;
  spec.chain_states = static_cast<int>(cfg.chain_states);
  spec.pixel = preprocess_of(cfg);
  return spec;
}

NetConfig net_config_of(const RunConfig& cfg, const std::vector<int>& obs_shape,
                        int num_actions) {
  NetConfig n;
  n.in_channels = obs_shape.at(0);
  n.in_h = obs_shape.at(1);
  n.in_w = obs_shape.at(2);
  n.num_actions = num_actions;
  n.multiplier = static_cast<int>(cfg.multiplier);
  n.sn = parse_sn_mode(cfg.sn);
  n.sigma0 = cfg.sigma0;
  n.hidden = static_cast<int>(cfg.hidden);
  n.pool_grid = static_cast<int>(cfg.pool_grid);
  n.validate();
  return n;
}

void validate(const RunConfig& cfg) {
  if (cfg.env != "chain" && cfg.env != "minicatch")
    throw ConfigError("unknown env: " + cfg.env);
  if (cfg.mode != "serial" && cfg.mode != "overlap")
    throw ConfigError("mode must be 'serial' or 'overlap', got '" + cfg.mode + "'");
  if (cfg.chain_states < 2) throw ConfigError("chain_states must be >= 2");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
  parse_loss_kind(cfg.loss);
  parse_sn_mode(cfg.sn);
  schedule_of(cfg);
  agent_config_of(cfg);
  replay_config_of(cfg);
  preprocess_of(cfg);
  // network input dims come from the env at run time; check the rest here
  NetConfig n;
  n.num_actions = 2;
  n.multiplier = static_cast<int>(cfg.multiplier);
  n.sn = parse_sn_mode(cfg.sn);
  n.sigma0 = cfg.sigma0;
  n.hidden = static_cast<int>(cfg.hidden);
  n.pool_grid = static_cast<int>(cfg.pool_grid);
  n.validate();
}

}  // namespace rainbowq
