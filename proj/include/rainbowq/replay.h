#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <vector>

#include "rainbowq/rng.h"
#include "rainbowq/sum_tree.h"
#include "rainbowq/tensor.h"

namespace rainbowq {

// One environment step as produced by the vector env.  `done` marks a true
// terminal, `timeout` a time-limit truncation; when `timeout` is set the env
// must supply `final_obs` (the observation that would have followed) so the
// n-step assembler can still bootstrap.  On auto-reset `obs` is already the
// observation of the next episode, which is why `final_obs` exists at all.
struct Transition {
  Tensor obs;
  int action = 0;
  float reward = 0.0f;
  bool done = false;
  bool timeout = false;
  int env_id = 0;
  Tensor final_obs;
};

// Assembled n-step sample.  `discount_n` is gamma^m for the actual window
// length m (m < n only at episode boundaries); `bootstrap` is false when the
// window ends in a terminal, in which case `next_obs` is all zeros.
struct NStepEntry {
  Tensor obs;
  int action = 0;
  double return_n = 0.0;
  Tensor next_obs;
  double discount_n = 0.0;
  bool bootstrap = true;
};

struct ReplayConfig {
  int64_t capacity = int64_t{1} << 20;
  int n_step = 3;
  double gamma = 0.99;
  double priority_exponent = 0.5;
  double priority_floor = 1e-6;
  double beta0 = 0.45;
  int64_t beta_frames = 10'000'000;  // frames until beta reaches 1
  int num_envs = 1;
  bool store_u8 = true;  // quantize observations to uint8 in storage

  void validate() const;
};

// Stable handle to a sampled slot; `epoch` detects overwrites between
// sampling and the priority update.
struct SampleRef {
  int64_t slot = 0;
  uint64_t epoch = 0;
};

struct SampleBatch {
  std::vector<SampleRef> refs;
  std::vector<NStepEntry> entries;
  std::vector<double> weights;  // importance weights, max-normalized to 1
};

// Proportional prioritized replay over n-step transitions: ring buffer +
// sum tree, stratified sampling, importance weights computed in double.
// push/sample/update_priorities are serialized by an internal mutex so the
// collector and learner threads can touch the buffer concurrently.
class PrioritizedReplay {
 public:
  PrioritizedReplay(const ReplayConfig& cfg, uint64_t seed);

  // Feeds one transition through the per-env n-step assembler and stores
  // whatever windows it completes.  Returns the number of entries stored.
  int push(const Transition& t);

  SampleBatch sample(int batch_size, int64_t frame);
  void update_priorities(const std::vector<SampleRef>& refs,
                         const std::vector<double>& td_abs);

  double beta_at(int64_t frame) const;

  int64_t size() const;
  int64_t capacity() const { return cfg_.capacity; }
  double total_priority() const;
  double max_priority() const;
  int64_t stale_updates() const;

  // Introspection for tests and metrics.
  const SumTree& tree() const { return tree_; }
  // Importance weights for the given slots at the given beta, normalized so
  // the largest is exactly 1.
  std::vector<double> weights_for(const std::vector<int64_t>& slots, double beta) const;
  NStepEntry entry_at(int64_t slot) const;
  uint64_t epoch_at(int64_t slot) const;
  int pending_count(int env_id) const;

 private:
  struct Blob {
    std::vector<uint8_t> u8;
    std::vector<float> f32;
  };

  struct Stored {
    Blob obs;
    Blob next_obs;
    int action = 0;
    double return_n = 0.0;
    double discount_n = 0.0;
    bool bootstrap = true;
    uint64_t epoch = 0;
  };

  struct Pending {
    Blob obs;
    int action = 0;
    double reward = 0.0;
  };

  Blob encode(const Tensor& t) const;
  Tensor decode(const Blob& b) const;
  void store_entry(Stored&& s);
  Stored make_entry(const std::deque<Pending>& q, size_t start, const Blob& next,
                    bool bootstrap) const;

  ReplayConfig cfg_;
  Rng rng_;
  SumTree tree_;
  std::vector<Stored> ring_;
  std::vector<std::deque<Pending>> pending_;
  std::vector<int> obs_shape_;
  int64_t write_cursor_ = 0;
  int64_t size_ = 0;
  double max_priority_ = 1.0;
  int64_t stale_updates_ = 0;
  mutable std::mutex mu_;
};

}  // namespace rainbowq
