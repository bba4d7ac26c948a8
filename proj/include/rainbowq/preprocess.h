#pragma once

// The frame pipeline: max over the last two raw frames of a skip window,
// grayscale via ITU-R 601 luminance, area-interpolation resize, [0,1]
// values, and a repeat-filled frame stack.  PreprocessedEnv wraps a RawEnv
// and adds noop starts, the episode frame limit, and auto-reset.

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "rainbowq/env.h"
#include "rainbowq/errors.h"
#include "rainbowq/rng.h"
#include "rainbowq/tensor.h"

namespace rainbowq {

struct PreprocessConfig {
  bool grayscale = true;
  int frame_skip = 4;
  int frame_stack = 4;
  int out_h = 84;
  int out_w = 84;
  bool max_pool_consecutive = true;
  int noop_max = 30;
  int64_t time_limit_frames = 108'000;

  void validate() const {
    if (frame_skip < 1) throw ConfigError("frame_skip must be >= 1");
    if (frame_stack < 1) throw ConfigError("frame_stack must be >= 1");
    if (noop_max < 0) throw ConfigError("noop_max must be >= 0");
    if (out_h < 1 || out_w < 1) throw ConfigError("output resolution must be positive");
    if (time_limit_frames < 1) throw ConfigError("time limit must be positive");
  }
};

// {3,h,w} -> {1,h,w} with weights (0.299, 0.587, 0.114); single-channel
// input passes through unchanged.
Tensor luminance(const Tensor& frame);

// Area interpolation to {c, oh, ow}: each output pixel is the mean of the
// (fractionally overlapped) input region it covers.  Exact for integer
// downscale factors; identity when sizes match.
Tensor area_resize(const Tensor& frame, int oh, int ow);

// Elementwise max into `into`.
void max_pair(Tensor& into, const Tensor& other);

class PreprocessedEnv final : public Env {
 public:
  PreprocessedEnv(std::unique_ptr<RawEnv> raw, const PreprocessConfig& cfg, uint64_t seed);

  int num_actions() const override { return raw_->num_actions(); }
  std::vector<int> obs_shape() const override;
  int frames_per_step() const override { return cfg_.frame_skip; }
  Tensor reset() override;
  StepResult step(int action) override;

  int64_t episode_frames() const { return episode_frames_; }
  Rng& rng() { return rng_; }

 private:
  Tensor cook(const Tensor& raw_frame) const;  // grayscale + resize
  Tensor stacked() const;

  std::unique_ptr<RawEnv> raw_;
  PreprocessConfig cfg_;
  Rng rng_;
  int chan_ = 0;  // channels of one cooked frame
  std::deque<Tensor> stack_;
  int64_t episode_frames_ = 0;
  double episode_return_ = 0.0;
};

}  // namespace rainbowq
