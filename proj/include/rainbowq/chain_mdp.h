#pragma once

// A deterministic line of states with a single rewarded terminal at the far
// end.  Observations are one-hot over channels on a 1x1 spatial grid so the
// conv trunk consumes them unchanged.  Exact value-iteration oracles make
// this the fast learning-soundness environment.

#include <cstdint>

#include "rainbowq/env.h"
#include "rainbowq/errors.h"

namespace rainbowq {

class ChainMDP final : public Env {
 public:
  explicit ChainMDP(int n = 8) : n_(n) {
    if (n < 2) throw ConfigError("chain needs at least two states");
  }

  int num_actions() const override { return 2; }  // 0 left, 1 right
  std::vector<int> obs_shape() const override { return {n_, 1, 1}; }
  int frames_per_step() const override { return 1; }
  int states() const { return n_; }
  int64_t step_cap() const { return 4 * static_cast<int64_t>(n_); }

  Tensor reset() override {
    state_ = 0;
    steps_ = 0;
    ret_ = 0.0;
    return one_hot(state_);
  }

  StepResult step(int action) override {
    if (action != 0 && action != 1)
      throw InputError("chain: invalid action " + std::to_string(action));
    state_ = action == 1 ? state_ + 1 : (state_ > 0 ? state_ - 1 : 0);
    ++steps_;
    StepResult out;
    out.done = state_ == n_ - 1;
    out.reward = out.done ? 1.0f : 0.0f;
    out.timeout = !out.done && steps_ >= step_cap();
    ret_ += out.reward;
    if (out.done || out.timeout) {
      out.final_obs = one_hot(state_);
      out.episode_return = ret_;
      out.episode_frames = steps_;
      out.obs = reset();
    } else {
      out.obs = one_hot(state_);
    }
    return out;
  }

 private:
  Tensor one_hot(int s) const {
    Tensor t({n_, 1, 1});
    t.v[static_cast<size_t>(s)] = 1.0f;
    return t;
  }

  int n_;
  int state_ = 0;
  int64_t steps_ = 0;
  double ret_ = 0.0;
};

}  // namespace rainbowq
