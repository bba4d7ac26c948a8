#pragma once

// The training loop.  Each iteration publishes actor parameters, collects
// one vector step (num_envs transitions), and runs k train steps once the
// warmup frames have been collected.  Serial mode does the two phases back
// to back and is bit-reproducible; overlap mode runs them concurrently,
// which leaves the transition stream identical (actions depend only on the
// published parameters) but lets the learner race the collector for replay
// contents.

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "rainbowq/agent.h"
#include "rainbowq/qnet.h"
#include "rainbowq/replay.h"
#include "rainbowq/run_config.h"
#include "rainbowq/snapshot.h"
#include "rainbowq/vector_env.h"

namespace rainbowq {

class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  // Runs to total_frames, writing config, metrics, episodes, snapshots and
  // a final state summary into the run directory.  On divergence a crash
  // snapshot is saved and the error rethrown.
  RunState run();

  const RunState& state() const { return st_; }
  QNetwork& net() { return *net_; }
  Agent& agent() { return *agent_; }
  PrioritizedReplay& replay() { return *replay_; }
  const std::string& run_dir() const { return run_dir_; }

  // One snapshot, written under dir; used for periodic, final and crash saves.
  void save(const std::string& dir);

 private:
  void publish_actor();
  void collect_iteration(double eps, int64_t frame_after);
  void train_block(double eps, int64_t frame_after);
  void maybe_snapshot(int64_t frame_after);
  void write_state_file();

  RunConfig cfg_;
  Schedule sched_;
  bool overlap_ = false;
  std::string run_dir_;

  std::unique_ptr<VectorEnv> vec_;
  std::unique_ptr<QNetwork> net_;        // learner-owned
  std::unique_ptr<QNetwork> actor_net_;  // published copy the collector acts from
  std::unique_ptr<Agent> agent_;
  std::unique_ptr<PrioritizedReplay> replay_;
  Rng actor_rng_;
  QCache actor_cache_;
  Tensor cur_obs_;

  std::ofstream metrics_, episodes_;
  struct EpisodeRow {
    int64_t frame;
    int env_id;
    double ret;
    int64_t len;
  };
  std::vector<EpisodeRow> episode_rows_;  // buffered by the collector, flushed after join

  RunState st_;
  double train_accum_ = 0.0;  // fractional-k accumulator
  int64_t last_snapshot_frame_ = 0;
  double t_first_train_ = -1.0;  // seconds since run start, -1 while in warmup
};

}  // namespace rainbowq
