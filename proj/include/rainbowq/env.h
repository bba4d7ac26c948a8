#pragma once

// Environment contracts.  RawEnv is the adapter surface an emulator binding
// implements: single raw frames, no preprocessing, no bookkeeping.  Env is
// what the trainer consumes: preprocessed observations, auto-reset, frame
// accounting.  Built-in non-pixel environments implement Env directly.

#include <cstdint>
#include <vector>

#include "rainbowq/rng.h"
#include "rainbowq/tensor.h"

namespace rainbowq {

struct RawStep {
  Tensor frame;  // {c, h, w}, values in [0, 1]
  float reward = 0.0f;
  bool done = false;
};

class RawEnv {
 public:
  virtual ~RawEnv() = default;
  virtual int num_actions() const = 0;
  virtual std::vector<int> frame_shape() const = 0;  // {c, h, w}
  virtual int noop_action() const { return 0; }
  // The rng is the owning wrapper's per-env stream.
  virtual Tensor reset(Rng& rng) = 0;
  virtual RawStep step(int action, Rng& rng) = 0;
};

struct StepResult {
  // Observation after the step.  When the episode ended this is already the
  // first observation of the next episode (auto-reset).
  Tensor obs;
  float reward = 0.0f;  // summed over skipped raw frames
  bool done = false;    // reached a terminal state
  bool timeout = false;  // cut by the frame limit; mutually exclusive with done
  // Last observation of the episode that just ended; set when done or
  // timeout.  A timeout bootstrap reads its value from here.
  Tensor final_obs;
  double episode_return = 0.0;  // valid when done or timeout
  int64_t episode_frames = 0;   // raw frames of the ended episode
};

class Env {
 public:
  virtual ~Env() = default;
  virtual int num_actions() const = 0;
  virtual std::vector<int> obs_shape() const = 0;  // {c, h, w}
  virtual int frames_per_step() const = 0;         // raw frames per step() call
  virtual Tensor reset() = 0;
  virtual StepResult step(int action) = 0;
};

}  // namespace rainbowq
