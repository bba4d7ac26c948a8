#pragma once

// Snapshot directory layout: a plain-text manifest (config keys, counters,
// rng states, tensor roster, content digest) plus one binary file per named
// tensor.  Tensor file format: u32 name length, name bytes, u8 dtype tag
// (0 = f32), u8 rank, u32 dims, then the row-major little-endian payload.
// The replay buffer is deliberately not persisted; resuming training from a
// snapshot is approximate (fresh optimizer moments, fresh buffer).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rainbowq/qnet.h"
#include "rainbowq/run_config.h"
#include "rainbowq/tensor.h"

namespace rainbowq {

struct RunState {
  int64_t frames = 0;
  int64_t transitions = 0;
  int64_t vector_steps = 0;
  int64_t warmup_vector_steps = 0;  // vector steps taken before the first train step
  int64_t train_steps = 0;
  int64_t samples = 0;
  int64_t episodes = 0;
  int64_t snapshots = 0;
  double wall_seconds = 0.0;
  double post_warmup_seconds = 0.0;
  double frames_per_sec = 0.0;
  double samples_per_sec = 0.0;

  // Samples drawn per post-warmup transition; b*k/e once training is active.
  double measured_replay_ratio() const {
    const int64_t post = transitions - warmup_transitions();
    return post > 0 ? static_cast<double>(samples) / static_cast<double>(post) : 0.0;
  }
  int64_t warmup_transitions() const { return warmup_vector_steps * transitions_per_step_; }

  void set_transitions_per_step(int64_t t) { transitions_per_step_ = t; }
  int64_t transitions_per_step() const { return transitions_per_step_; }

 private:
  int64_t transitions_per_step_ = 1;  // num_envs
};

struct SnapshotMeta {
  RunState state;
  int64_t last_sync_frame = 0;
  int64_t adam_steps = 0;
  std::string rng_actor;  // serialized stream state
  std::string rng_agent;
  // network input geometry, so a snapshot can be loaded without an env
  int net_in_channels = 0;
  int net_in_h = 0;
  int net_in_w = 0;
  int net_actions = 0;
};

void save_snapshot(const std::string& dir, const RunConfig& cfg, QNetwork& net,
                   const SnapshotMeta& meta);

struct SnapshotData {
  RunConfig cfg;
  SnapshotMeta meta;
  std::vector<std::pair<std::string, Tensor>> tensors;  // manifest order
  uint64_t digest = 0;
};

// Reads and digest-verifies a snapshot directory.  IoError on any mismatch.
SnapshotData load_snapshot(const std::string& dir);

// Builds the network a snapshot describes and loads its weights.
std::unique_ptr<QNetwork> restore_network(const SnapshotData& data);

// Loads tensors into an already-built network of matching geometry.
void apply_snapshot(const SnapshotData& data, QNetwork& net);

}  // namespace rainbowq
