#include "rainbowq/vector_env.h"

#include <cstring>

#include "rainbowq/chain_mdp.h"
#include "rainbowq/minicatch.h"

namespace rainbowq {

VectorEnv::VectorEnv(std::vector<std::unique_ptr<Env>> envs) : envs_(std::move(envs)) {
  if (envs_.empty()) throw ConfigError("vector env needs at least one instance");
  const auto shape = envs_[0]->obs_shape();
  for (const auto& e : envs_) {
    if (e->obs_shape() != shape || e->num_actions() != envs_[0]->num_actions())
      throw ConfigError("vector env instances must agree on spec");
  }
}

Tensor VectorEnv::reset_all() {
  const auto s = obs_shape();
  Tensor out({size(), s[0], s[1], s[2]});
  const int64_t plane = static_cast<int64_t>(s[0]) * s[1] * s[2];
  for (int i = 0; i < size(); ++i) {
    const Tensor obs = envs_[static_cast<size_t>(i)]->reset();
    std::memcpy(out.data() + i * plane, obs.data(), sizeof(float) * static_cast<size_t>(plane));
  }
  return out;
}

VecStep VectorEnv::step(const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != size())
    throw InputError("vector env: expected " + std::to_string(size()) + " actions, got " +
                     std::to_string(actions.size()));
  const int e = size();
  const auto s = obs_shape();
  const int64_t plane = static_cast<int64_t>(s[0]) * s[1] * s[2];
  VecStep out;
  out.obs = Tensor({e, s[0], s[1], s[2]});
  out.reward.resize(static_cast<size_t>(e));
  out.done.resize(static_cast<size_t>(e));
  out.timeout.resize(static_cast<size_t>(e));
  out.final_obs.resize(static_cast<size_t>(e));
  out.episode_return.resize(static_cast<size_t>(e), 0.0);
  out.episode_frames.resize(static_cast<size_t>(e), 0);
  for (int i = 0; i < e; ++i) {
    const int a = actions[static_cast<size_t>(i)];
    if (a < 0 || a >= num_actions())
      throw InputError("vector env: invalid action " + std::to_string(a) + " for env " +
                       std::to_string(i));
    StepResult r = envs_[static_cast<size_t>(i)]->step(a);
    std::memcpy(out.obs.data() + i * plane, r.obs.data(),
                sizeof(float) * static_cast<size_t>(plane));
    out.reward[static_cast<size_t>(i)] = r.reward;
    out.done[static_cast<size_t>(i)] = r.done ? 1 : 0;
    out.timeout[static_cast<size_t>(i)] = r.timeout ? 1 : 0;
    out.final_obs[static_cast<size_t>(i)] = std::move(r.final_obs);
    out.episode_return[static_cast<size_t>(i)] = r.episode_return;
    out.episode_frames[static_cast<size_t>(i)] = r.episode_frames;
    frames_ += envs_[static_cast<size_t>(i)]->frames_per_step();
  }
  return out;
}

PreprocessConfig minicatch_profile() {
  PreprocessConfig cfg;
  cfg.grayscale = false;
  cfg.frame_skip = 1;
  cfg.frame_stack = 1;
  cfg.out_h = 84;
  cfg.out_w = 84;
  cfg.max_pool_consecutive = false;  // no raw pooling when skip is 1
  cfg.noop_max = 0;
  return cfg;
}

std::unique_ptr<Env> make_env(const EnvSpec& spec, uint64_t seed) {
  if (spec.name == "chain") return std::make_unique<ChainMDP>(spec.chain_states);
  if (spec.name == "minicatch")
    return std::make_unique<PreprocessedEnv>(std::make_unique<MiniCatch>(), spec.pixel, seed);
  throw ConfigError("unknown environment: " + spec.name);
}

std::unique_ptr<VectorEnv> make_vector_env(const EnvSpec& spec, int num_envs, uint64_t seed) {
  if (num_envs < 1) throw ConfigError("num_envs must be >= 1");
  std::vector<std::unique_ptr<Env>> envs;
  envs.reserve(static_cast<size_t>(num_envs));
  for (int i = 0; i < num_envs; ++i)
    envs.push_back(make_env(spec, Rng::derive(seed, static_cast<uint64_t>(i))));
  return std::make_unique<VectorEnv>(std::move(envs));
}

}  // namespace rainbowq
