#pragma once

// A fixed-width vector of independent environment instances.  Stepping is
// slot-ordered and sequential; instances share nothing, so slot order can
// never change any single env's trajectory.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rainbowq/env.h"
#include "rainbowq/errors.h"
#include "rainbowq/preprocess.h"

namespace rainbowq {

struct VecStep {
  Tensor obs;  // {e, c, h, w}
  std::vector<float> reward;
  std::vector<uint8_t> done;
  std::vector<uint8_t> timeout;
  std::vector<Tensor> final_obs;       // per-slot; empty tensor unless ended
  std::vector<double> episode_return;  // valid where done|timeout
  std::vector<int64_t> episode_frames;
};

class VectorEnv {
 public:
  explicit VectorEnv(std::vector<std::unique_ptr<Env>> envs);

  int size() const { return static_cast<int>(envs_.size()); }
  int num_actions() const { return envs_[0]->num_actions(); }
  std::vector<int> obs_shape() const { return envs_[0]->obs_shape(); }
  int frames_per_step() const { return envs_[0]->frames_per_step(); }

  // Raw frames consumed so far, across all slots (frame-skip included).
  int64_t frames() const { return frames_; }

  Tensor reset_all();
  VecStep step(const std::vector<int>& actions);

  Env& env(int i) { return *envs_[static_cast<size_t>(i)]; }

 private:
  std::vector<std::unique_ptr<Env>> envs_;
  int64_t frames_ = 0;
};

// Environment factory.  Names: "chain" (one-hot line MDP, no preprocessing)
// and "minicatch" (pixel game through the frame pipeline).  Each slot gets
// its own rng stream derived from the base seed.
struct EnvSpec {
  std::string name = "chain";
  int chain_states = 8;
  PreprocessConfig pixel;  // used by pixel envs
};

std::unique_ptr<Env> make_env(const EnvSpec& spec, uint64_t seed);
std::unique_ptr<VectorEnv> make_vector_env(const EnvSpec& spec, int num_envs, uint64_t seed);

// The preprocessing profile minicatch runs with: single channel, no skip
// pooling or stacking needed (the ball moves one row per step and the frame
// already carries full state), no noop starts so the catch oracle stays
// exact.
PreprocessConfig minicatch_profile();

}  // namespace rainbowq
