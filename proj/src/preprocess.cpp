#include "rainbowq/preprocess.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace rainbowq {

Tensor luminance(const Tensor& frame) {
  if (frame.rank() != 3) throw InputError("luminance: expected a {c,h,w} frame");
  const int c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  if (c == 1) return frame;
  if (c != 3) throw InputError("luminance: expected 1 or 3 channels, got " + std::to_string(c));
  Tensor out({1, h, w});
  const int64_t plane = static_cast<int64_t>(h) * w;
  const float* r = frame.data();
  const float* g = r + plane;
  const float* b = g + plane;
  for (int64_t i = 0; i < plane; ++i)
    out.v[static_cast<size_t>(i)] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  return out;
}

Tensor area_resize(const Tensor& frame, int oh, int ow) {
  if (frame.rank() != 3) throw InputError("area_resize: expected a {c,h,w} frame");
  const int c = frame.dim(0), ih = frame.dim(1), iw = frame.dim(2);
  if (ih == oh && iw == ow) return frame;
  Tensor out({c, oh, ow});
  const double sy = static_cast<double>(ih) / oh;
  const double sx = static_cast<double>(iw) / ow;
  for (int ch = 0; ch < c; ++ch) {
    const float* src = frame.data() + static_cast<int64_t>(ch) * ih * iw;
    float* dst = out.data() + static_cast<int64_t>(ch) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const double y0 = oy * sy, y1 = (oy + 1) * sy;
      const int iy0 = static_cast<int>(std::floor(y0));
      const int iy1 = std::min(ih, static_cast<int>(std::ceil(y1)));
      for (int ox = 0; ox < ow; ++ox) {
        const double x0 = ox * sx, x1 = (ox + 1) * sx;
        const int ix0 = static_cast<int>(std::floor(x0));
        const int ix1 = std::min(iw, static_cast<int>(std::ceil(x1)));
        double acc = 0.0;
        for (int iy = iy0; iy < iy1; ++iy) {
          const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
          const float* row = src + static_cast<int64_t>(iy) * iw;
          for (int ix = ix0; ix < ix1; ++ix) {
            const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
            acc += wy * wx * row[ix];
          }
        }
        dst[static_cast<int64_t>(oy) * ow + ox] =
            static_cast<float>(acc / (sy * sx));
      }
    }
  }
  return out;
}

void max_pair(Tensor& into, const Tensor& other) {
  if (into.shape != other.shape) throw InputError("max_pair: shape mismatch");
  for (size_t i = 0; i < into.v.size(); ++i)
    into.v[i] = std::max(into.v[i], other.v[i]);
}

PreprocessedEnv::PreprocessedEnv(std::unique_ptr<RawEnv> raw, const PreprocessConfig& cfg,
                                 uint64_t seed)
    : raw_(std::move(raw)), cfg_(cfg), rng_(seed) {
  cfg_.validate();
  const auto fs = raw_->frame_shape();
  chan_ = (cfg_.grayscale && fs[0] == 3) ? 1 : fs[0];
}

std::vector<int> PreprocessedEnv::obs_shape() const {
  return {chan_ * cfg_.frame_stack, cfg_.out_h, cfg_.out_w};
}

Tensor PreprocessedEnv::cook(const Tensor& raw_frame) const {
  Tensor f = cfg_.grayscale ? luminance(raw_frame) : raw_frame;
  return area_resize(f, cfg_.out_h, cfg_.out_w);
}

Tensor PreprocessedEnv::stacked() const {
  Tensor out({chan_ * cfg_.frame_stack, cfg_.out_h, cfg_.out_w});
  const int64_t plane = static_cast<int64_t>(chan_) * cfg_.out_h * cfg_.out_w;
  int64_t off = 0;
  for (const Tensor& f : stack_) {
    std::memcpy(out.data() + off, f.data(), sizeof(float) * static_cast<size_t>(plane));
    off += plane;
  }
  return out;
}

Tensor PreprocessedEnv::reset() {
  for (int attempt = 0;; ++attempt) {
    if (attempt > 32) throw StateError("env keeps terminating during noop starts");
    episode_frames_ = 0;
    episode_return_ = 0.0;
    Tensor raw = raw_->reset(rng_);
    const int noops = cfg_.noop_max > 0 ? rng_.uniform_int(cfg_.noop_max + 1) : 0;
    bool died = false;
    for (int i = 0; i < noops; ++i) {
      RawStep rs = raw_->step(raw_->noop_action(), rng_);
      ++episode_frames_;
      episode_return_ += rs.reward;
      raw = std::move(rs.frame);
      if (rs.done) {
        died = true;
        break;
      }
    }
    if (died) continue;
    Tensor frame = cook(raw);
    stack_.clear();
    for (int i = 0; i < cfg_.frame_stack; ++i) stack_.push_back(frame);
    return stacked();
  }
}

StepResult PreprocessedEnv::step(int action) {
  if (action < 0 || action >= raw_->num_actions())
    throw InputError("env: invalid action " + std::to_string(action));

  float reward = 0.0f;
  bool done = false;
  Tensor prev, cur;
  for (int i = 0; i < cfg_.frame_skip; ++i) {
    RawStep rs = raw_->step(action, rng_);
    ++episode_frames_;
    reward += rs.reward;
    prev = std::move(cur);
    cur = std::move(rs.frame);
    if (rs.done) {
      done = true;
      break;
    }
  }

  Tensor pooled = std::move(cur);
  if (cfg_.max_pool_consecutive && cfg_.frame_skip > 1 && prev.size() > 0)
    max_pair(pooled, prev);
  stack_.pop_front();
  stack_.push_back(cook(pooled));

  episode_return_ += reward;
  const bool timeout = !done && episode_frames_ >= cfg_.time_limit_frames;

  StepResult out;
  out.reward = reward;
  out.done = done;
  out.timeout = timeout;
  if (done || timeout) {
    out.final_obs = stacked();
    out.episode_return = episode_return_;
    out.episode_frames = episode_frames_;
    out.obs = reset();
  } else {
    out.obs = stacked();
  }
  return out;
}

}  // namespace rainbowq
