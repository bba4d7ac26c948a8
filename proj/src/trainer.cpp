#include "rainbowq/trainer.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <thread>

#include "rainbowq/errors.h"

namespace rainbowq {

namespace {

namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg),
      sched_(schedule_of(cfg)),
      overlap_(cfg.mode == "overlap"),
      run_dir_(cfg.out_dir),
      actor_rng_(Rng::derive(static_cast<uint64_t>(cfg.seed), 2)) {
  validate(cfg_);
  vec_ = make_vector_env(env_spec_of(cfg_), sched_.num_envs,
                         Rng::derive(static_cast<uint64_t>(cfg_.seed), 1));
  const NetConfig nc = net_config_of(cfg_, vec_->obs_shape(), vec_->num_actions());
  net_ = std::make_unique<QNetwork>(nc);
  actor_net_ = std::make_unique<QNetwork>(nc);
  Rng init_rng(Rng::derive(static_cast<uint64_t>(cfg_.seed), 5));
  net_->init(init_rng);

  agent_ = std::make_unique<Agent>(agent_config_of(cfg_), *net_,
                                   Rng::derive(static_cast<uint64_t>(cfg_.seed), 3));
  replay_ = std::make_unique<PrioritizedReplay>(replay_config_of(cfg_),
                                                Rng::derive(static_cast<uint64_t>(cfg_.seed), 4));
  st_.set_transitions_per_step(sched_.num_envs);

  // The first train block must find a full batch in the buffer: by then the
  // collector has pushed first_block_iters * e transitions, of which up to
  // n-1 per env are still pending in the n-step assemblers.
  const int64_t fpi = int64_t{sched_.num_envs} * vec_->frames_per_step();
  const int64_t first_block_iters = (sched_.warmup_frames + fpi - 1) / fpi;
  const int64_t entries_then = first_block_iters * sched_.num_envs -
                               int64_t{cfg_.n_step - 1} * sched_.num_envs;
  if (entries_then < sched_.batch_size)
    throw ConfigError("warmup_frames " + std::to_string(sched_.warmup_frames) +
                      " leaves only ~" + std::to_string(entries_then) +
                      " replay entries at the first train step; need batch_size " +
                      std::to_string(sched_.batch_size));
}

void Trainer::publish_actor() {
  actor_net_->params().copy_values_from(net_->params());
  for (size_t i = 0; i < net_->sn_conv_names().size(); ++i)
    actor_net_->sn_u(i).v = net_->sn_u(i).v;
}

void Trainer::collect_iteration(double eps, int64_t frame_after) {
  const std::vector<int> actions =
      act_batch(*actor_net_, actor_cache_, cur_obs_, eps, actor_rng_, /*train_mode=*/true);
  VecStep step = vec_->step(actions);

  const int e = sched_.num_envs;
  const int64_t plane = cur_obs_.size() / e;
  const std::vector<int> slot_shape = vec_->obs_shape();
  for (int i = 0; i < e; ++i) {
    Transition t;
    t.obs = Tensor(slot_shape);
    std::memcpy(t.obs.data(), cur_obs_.data() + i * plane,
                sizeof(float) * static_cast<size_t>(plane));
    t.action = actions[static_cast<size_t>(i)];
    t.reward = step.reward[static_cast<size_t>(i)];
    t.done = step.done[static_cast<size_t>(i)] != 0;
    t.timeout = step.timeout[static_cast<size_t>(i)] != 0;
    t.env_id = i;
    if (t.done || t.timeout) {
      t.final_obs = step.final_obs[static_cast<size_t>(i)];
      episode_rows_.push_back({frame_after, i, step.episode_return[static_cast<size_t>(i)],
                               step.episode_frames[static_cast<size_t>(i)]});
    }
    replay_->push(t);
  }
  cur_obs_ = std::move(step.obs);
}

void Trainer::train_block(double eps, int64_t frame_after) {
  train_accum_ += sched_.train_steps_per_vector_step;
  if (train_accum_ < 1.0) return;
  if (overlap_) {
    while (replay_->size() < sched_.batch_size)
      std::this_thread::sleep_for(std::chrono::microseconds(50));
  }
  agent_->maybe_sync_target(frame_after);
  const double beta = replay_->beta_at(frame_after);
  while (train_accum_ >= 1.0) {
    train_accum_ -= 1.0;
    const StepMetrics m = agent_->train_step(*replay_, frame_after);
    st_.train_steps += 1;
    st_.samples += sched_.batch_size;
    metrics_ << frame_after << ',' << st_.train_steps << ',' << fmt(m.loss) << ','
             << fmt(m.grad_norm) << ',' << fmt(m.mean_q) << ',' << fmt(eps) << ','
             << fmt(beta) << '\n';
  }
}

void Trainer::save(const std::string& dir) {
  SnapshotMeta meta;
  meta.state = st_;
  meta.last_sync_frame = agent_->last_sync_frame();
  meta.adam_steps = agent_->optimizer().steps();
  meta.rng_actor = rng_state(actor_rng_);
  meta.rng_agent = rng_state(agent_->rng());
  meta.net_in_channels = net_->config().in_channels;
  meta.net_in_h = net_->config().in_h;
  meta.net_in_w = net_->config().in_w;
  meta.net_actions = net_->config().num_actions;
  save_snapshot(dir, cfg_, *net_, meta);
}

void Trainer::maybe_snapshot(int64_t frame_after) {
  const int64_t period = sched_.snapshot_period_frames;
  if (frame_after / period <= last_snapshot_frame_ / period) return;
  last_snapshot_frame_ = frame_after;
  char name[64];
  std::snprintf(name, sizeof(name), "snap_%010lld", static_cast<long long>(frame_after));
  save(run_dir_ + "/snapshots/" + name);
  st_.snapshots += 1;
  std::ofstream index(run_dir_ + "/snapshots.csv", std::ios::app);
  index << name << ',' << frame_after << ",snapshots/" << name << '\n';
}

void Trainer::write_state_file() {
  std::ofstream out(run_dir_ + "/run_state.txt");
  out << "frames = " << st_.frames << "\n"
      << "transitions = " << st_.transitions << "\n"
      << "vector_steps = " << st_.vector_steps << "\n"
      << "warmup_vector_steps = " << st_.warmup_vector_steps << "\n"
      << "train_steps = " << st_.train_steps << "\n"
      << "samples = " << st_.samples << "\n"
      << "episodes = " << st_.episodes << "\n"
      << "snapshots = " << st_.snapshots << "\n"
      << "replay_ratio_configured = " << fmt(sched_.replay_ratio()) << "\n"
      << "replay_ratio_measured = " << fmt(st_.measured_replay_ratio()) << "\n"
      << "wall_seconds = " << fmt(st_.wall_seconds) << "\n"
      << "post_warmup_seconds = " << fmt(st_.post_warmup_seconds) << "\n"
      << "frames_per_sec = " << fmt(st_.frames_per_sec) << "\n"
      << "samples_per_sec = " << fmt(st_.samples_per_sec) << "\n";
}

RunState Trainer::run() {
  std::error_code ec;
  fs::create_directories(run_dir_ + "/snapshots", ec);
  if (ec) throw IoError("cannot create run directory " + run_dir_ + ": " + ec.message());
  write_config_file(cfg_, run_dir_ + "/config.txt");

  metrics_.open(run_dir_ + "/metrics.csv");
  episodes_.open(run_dir_ + "/episodes.csv");
  if (!metrics_ || !episodes_) throw IoError("cannot open metrics files in " + run_dir_);
  metrics_ << "frame,train_step,loss,grad_norm,mean_q,epsilon,beta\n";
  episodes_ << "frame,env,episode_return,episode_frames\n";
  std::ofstream(run_dir_ + "/snapshots.csv") << "name,frames,path\n";

  cur_obs_ = vec_->reset_all();
  const int64_t fpi = int64_t{sched_.num_envs} * vec_->frames_per_step();
  std::deque<double> recent_returns;
  const auto t0 = clock_type::now();
  auto seconds_since_start = [&] {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
  };

  try {
    while (st_.frames < sched_.total_frames) {
      const int64_t frame_after = st_.frames + fpi;
      const double eps = agent_->epsilon_at(st_.frames);
      publish_actor();
      const bool do_train = frame_after >= sched_.warmup_frames;
      if (do_train && st_.train_steps == 0 && t_first_train_ < 0.0) {
        st_.warmup_vector_steps = st_.vector_steps;
        t_first_train_ = seconds_since_start();
      }
      if (!do_train) {
        collect_iteration(eps, frame_after);
      } else if (!overlap_) {
        collect_iteration(eps, frame_after);
        train_block(eps, frame_after);
      } else {
        std::thread collector([&] { collect_iteration(eps, frame_after); });
        try {
          train_block(eps, frame_after);
        } catch (...) {
          collector.join();
          throw;
        }
        collector.join();
      }
      st_.vector_steps += 1;
      st_.frames = frame_after;
      st_.transitions += sched_.num_envs;
      for (const EpisodeRow& row : episode_rows_) {
        episodes_ << row.frame << ',' << row.env_id << ',' << fmt(row.ret) << ',' << row.len
                  << '\n';
        st_.episodes += 1;
        recent_returns.push_back(row.ret);
        if (recent_returns.size() > 100) recent_returns.pop_front();
      }
      episode_rows_.clear();
      maybe_snapshot(frame_after);

      const int64_t log_period = std::max<int64_t>(sched_.total_frames / 50, fpi);
      if (frame_after / log_period > (frame_after - fpi) / log_period) {
        const double secs = seconds_since_start();
        const double avg =
            recent_returns.empty()
                ? 0.0
                : std::accumulate(recent_returns.begin(), recent_returns.end(), 0.0) /
                      static_cast<double>(recent_returns.size());
        std::printf("frames %lld/%lld  eps %.3f  episodes %lld  avg100 %.3f  %.0f f/s\n",
                    static_cast<long long>(frame_after),
                    static_cast<long long>(sched_.total_frames), eps,
                    static_cast<long long>(st_.episodes), avg,
                    static_cast<double>(frame_after) / std::max(secs, 1e-9));
        std::fflush(stdout);
        metrics_.flush();
        episodes_.flush();
      }
    }
  } catch (const DivergedError&) {
    st_.wall_seconds = seconds_since_start();
    save(run_dir_ + "/crash");
    write_state_file();
    throw;
  }

  st_.wall_seconds = seconds_since_start();
  st_.post_warmup_seconds = t_first_train_ >= 0.0 ? st_.wall_seconds - t_first_train_ : 0.0;
  if (st_.post_warmup_seconds > 0.0) {
    const int64_t post_frames = st_.frames - st_.warmup_vector_steps * fpi;
    st_.frames_per_sec = static_cast<double>(post_frames) / st_.post_warmup_seconds;
    st_.samples_per_sec = static_cast<double>(st_.samples) / st_.post_warmup_seconds;
  } else if (st_.wall_seconds > 0.0) {
    st_.frames_per_sec = static_cast<double>(st_.frames) / st_.wall_seconds;
  }

  save(run_dir_ + "/snapshots/final");
  std::ofstream index(run_dir_ + "/snapshots.csv", std::ios::app);
  index << "final," << st_.frames << ",snapshots/final\n";
  st_.snapshots += 1;
  write_state_file();
  metrics_.flush();
  episodes_.flush();
  return st_;
}

}  // namespace rainbowq
