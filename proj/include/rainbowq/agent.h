#pragma once

#include <cstdint>
#include <vector>

#include "rainbowq/errors.h"
#include "rainbowq/qnet.h"
#include "rainbowq/replay.h"
#include "rainbowq/rng.h"

namespace rainbowq {

enum class LossKind { huber, mse };

inline const char* to_string(LossKind k) { return k == LossKind::huber ? "huber" : "mse"; }
inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "huber") return LossKind::huber;
  if (s == "mse") return LossKind::mse;
  throw ConfigError("unknown loss kind: " + s);
}

struct AgentConfig {
  double gamma = 0.99;
  double learning_rate = 0.00025;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps_scale = 0.005;  // Adam epsilon = scale / batch_size
  double grad_clip_norm = 10.0;
  int64_t target_sync_frames = 32'000;
  double eps_initial = 1.0;
  double eps_final = 0.01;
  int64_t eps_decay_frames = 500'000;
  LossKind loss = LossKind::huber;
  int batch_size = 256;

  double adam_eps() const { return adam_eps_scale / batch_size; }
  void validate() const;
};

// Adam with global-norm clipping.  Moment state is kept in double and in the
// parameter store's registration order.
class Adam {
 public:
  Adam(const ParamStoreT<float>& store, double lr, double beta1, double beta2, double eps);

  // Clips the global gradient norm to clip_norm (0 disables), applies one
  // update, returns the pre-clip norm.
  double step(ParamStoreT<float>& store, double clip_norm);

  int64_t steps() const { return t_; }
  std::vector<std::vector<double>>& m() { return m_; }
  std::vector<std::vector<double>>& v() { return v_; }
  void set_steps(int64_t t) { t_ = t; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct StepMetrics {
  double loss = 0.0;
  double grad_norm = 0.0;
  double mean_q = 0.0;
};

double huber(double delta);  // kappa = 1
double loss_value(const std::vector<double>& q_sa, const std::vector<double>& y,
                  const std::vector<double>& w, LossKind kind);
std::vector<double> td_errors(const std::vector<double>& q_sa, const std::vector<double>& y);

// Epsilon-greedy over a (possibly noisy) greedy forward.  Training mode
// draws fresh layer noise for the whole batch and one uniform coin per row;
// eval mode is deterministic: zero noise, no epsilon.  Ties break low.
std::vector<int> act_batch(QNetwork& net, QCache& cache, const Tensor& obs, double eps,
                           Rng& rng, bool train_mode);

// The learner: double-DQN n-step targets, weighted Huber loss, Adam with
// clipping, target sync on frame boundaries.
class Agent {
 public:
  Agent(const AgentConfig& cfg, QNetwork& net, uint64_t seed);

  const AgentConfig& config() const { return cfg_; }

  double epsilon_at(int64_t frame) const;

  // y = G_n + discount_n * bootstrap * q_target(s', argmax_a q_online(s', a)).
  // Noise draws come from the learner stream unless the caller passes its own
  // (the deterministic tests do).
  std::vector<double> compute_target(const std::vector<NStepEntry>& entries,
                                     const NoiseDraw* noise_sel = nullptr,
                                     const NoiseDraw* noise_tgt = nullptr);

  // One full gradient step on a sampled batch; refreshes replay priorities.
  StepMetrics train_step(PrioritizedReplay& replay, int64_t frame);

  // Copies online -> target when `frame` has crossed a sync boundary since
  // the last copy.  Returns true if a copy happened.
  bool maybe_sync_target(int64_t frame);

  Adam& optimizer() { return opt_; }
  Rng& rng() { return rng_; }
  int64_t last_sync_frame() const { return last_sync_frame_; }
  void set_last_sync_frame(int64_t f) { last_sync_frame_ = f; }

 private:
  void stack_obs(const std::vector<NStepEntry>& entries, bool next, Tensor& out);

  AgentConfig cfg_;
  QNetwork& net_;
  Adam opt_;
  Rng rng_;
  QCache cache_main_, cache_sel_, cache_tgt_;
  Tensor obs_batch_, next_batch_;
  int64_t last_sync_frame_ = 0;
};

}  // namespace rainbowq
