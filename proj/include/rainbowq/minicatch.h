#pragma once

// A falling-ball catching game on a small logical grid, rendered to a
// single-channel 84x84 frame by integer upscaling.  The logical dynamics
// are exact, so an oracle policy (track the ball's column) has a known
// return, while the rendered frames exercise the full conv/preprocessing
// path.

#include <cstdint>
#include <cstdlib>
#include <string>

#include "rainbowq/env.h"
#include "rainbowq/errors.h"

namespace rainbowq {

class MiniCatch final : public RawEnv {
 public:
  static constexpr int kGrid = 21;
  static constexpr int kScale = 4;  // 21 * 4 = 84
  static constexpr int kPaddleHalf = 1;  // paddle spans center +/- 1
  static constexpr int kBallsPerEpisode = 10;

  int num_actions() const override { return 3; }  // 0 left, 1 stay, 2 right
  int noop_action() const override { return 1; }
  std::vector<int> frame_shape() const override {
    return {1, kGrid * kScale, kGrid * kScale};
  }

  Tensor reset(Rng& rng) override {
    paddle_ = kGrid / 2;
    balls_done_ = 0;
    spawn(rng);
    return render();
  }

  RawStep step(int action, Rng& rng) override {
    if (action < 0 || action > 2)
      throw InputError("minicatch: invalid action " + std::to_string(action));
    paddle_ += action - 1;
    if (paddle_ < kPaddleHalf) paddle_ = kPaddleHalf;
    if (paddle_ > kGrid - 1 - kPaddleHalf) paddle_ = kGrid - 1 - kPaddleHalf;
    ++ball_row_;

    RawStep out;
    if (ball_row_ == kGrid - 1) {
      const bool caught = std::abs(ball_col_ - paddle_) <= kPaddleHalf;
      out.reward = caught ? 1.0f : -1.0f;
      ++balls_done_;
      if (balls_done_ >= kBallsPerEpisode)
        out.done = true;
      else
        spawn(rng);
    }
    out.frame = render();
    return out;
  }

  int ball_row() const { return ball_row_; }
  int ball_col() const { return ball_col_; }
  int paddle() const { return paddle_; }

 private:
  void spawn(Rng& rng) {
    ball_row_ = 0;
    ball_col_ = rng.uniform_int(kGrid);
  }

  Tensor render() const {
    const int px = kGrid * kScale;
    Tensor f({1, px, px});
    paint(f, ball_row_, ball_col_);
    for (int c = paddle_ - kPaddleHalf; c <= paddle_ + kPaddleHalf; ++c)
      paint(f, kGrid - 1, c);
    return f;
  }

  static void paint(Tensor& f, int row, int col) {
    const int px = kGrid * kScale;
    for (int y = row * kScale; y < (row + 1) * kScale; ++y)
      for (int x = col * kScale; x < (col + 1) * kScale; ++x)
        f.v[static_cast<size_t>(y) * px + x] = 1.0f;
  }

  int paddle_ = kGrid / 2;
  int ball_row_ = 0;
  int ball_col_ = 0;
  int balls_done_ = 0;
};

}  // namespace rainbowq
