// Command-line surface: train, eval, plot, bench, ablate.
//
// Configuration is a flat `key = value` file; flags override the file and
// RAINBOWQ_<KEY> environment variables sit between the two.  Exit codes:
// 0 success, 1 invalid configuration or usage, 2 runtime abort.

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <算法>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "rainbowq/errors.h"
#include "rainbowq/eval.h"
#include "rainbowq/plot.h"
#include "rainbowq/run_config.h"
#include "rainbowq/run_io.h"
#include "rainbowq/snapshot.h"
#include "rainbowq/trainer.h"

namespace fs = std::filesystem;
using namespace rainbowq;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Sugar flags shared by train/bench/ablate; each maps onto one config key.
struct CommonFlags {
  CLI::App* cmd = nullptr;
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> sugar;  // key -> captured value

  void attach(CLI::App* app, bool with_out = true) {
    cmd = app;
    app->add_option("--config", config_file, "config file (key = value lines)");
    app->add_option("--set", sets, "override one config key, e.g. --set gamma=0.98")
        ->take_all();
    add_sugar("--env", "env", "environment name (chain | minicatch)");
    add_sugar("--seed", "seed", "base rng seed");
    if (with_out) add_sugar("--out", "out_dir", "run output directory");
    add_sugar("--mode", "mode", "loop mode (serial | overlap)");
    add_sugar("--total-frames", "total_frames", "run length in raw frames");
    add_sugar("--warmup-frames", "warmup_frames", "frames collected before training");
    add_sugar("--sn", "sn", "spectral normalization variant (none | all | last)");
    add_sugar("--multiplier", "multiplier", "trunk channel multiplier");
    add_sugar("--loss", "loss", "td loss (huber | mse)");
    add_sugar("--batch-size", "batch_size", "learner batch size");
    add_sugar("--num-envs", "num_envs", "vectorized environment count");
  }

  Overrides overrides() const {
    Overrides out;
    for (const std::string& kv : sets) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + kv + "'");
      out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : sugar)
      if (cmd->count("--" + flag_names.at(key)) > 0) out.emplace_back(key, value);
    return out;
  }

 private:
  std::map<std::string, std::string> flag_names;  // key -> flag (no dashes)

  void add_sugar(const std::string& flag, const std::string& key, const std::string& help) {
    flag_names[key] = flag.substr(2);
    cmd->add_option(flag, sugar[key], help);
  }
};

std::string self_exe() {
  char buf[4096];
  const ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) throw IoError("cannot resolve own executable path");
  buf[n] = '\0';
  return buf;
}

struct Job {
  std::vector<std::string> argv;
  std::string log_path;
  std::string label;
};

int run_jobs(const std::vector<Job>& jobs, int parallel) {
  size_t next = 0;
  std::map<pid_t, size_t> running;
  int failures = 0;
  while (next < jobs.size() || !running.empty()) {
    while (next < jobs.size() && static_cast<int>(running.size()) < parallel) {
      const Job& job = jobs[next];
      const pid_t pid = fork();
      if (pid == 0) {
        const int fd = open(job.log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
          dup2(fd, 1);
          dup2(fd, 2);
          close(fd);
        }
        std::vector<char*> argv;
        for (const std::string& a : job.argv) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        execv(argv[0], argv.data());
        _exit(127);
      }
      if (pid < 0) throw IoError("fork failed");
      std::printf("[jobs] started %s\n", job.label.c_str());
      std::fflush(stdout);
      running[pid] = next++;
    }
    int status = 0;
    const pid_t done = waitpid(-1, &status, 0);
    if (done <= 0) continue;
    const auto it = running.find(done);
    if (it == running.end()) continue;
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    std::printf("[jobs] finished %s exit=%d\n", jobs[it->second].label.c_str(), code);
    std::fflush(stdout);
    if (code != 0) ++failures;
    running.erase(it);
  }
  return failures;
}

int cmd_train(const CommonFlags& flags) {
  const RunConfig cfg = parse_config(flags.config_file, flags.overrides());
  Trainer trainer(cfg);
  const RunState st = trainer.run();
  std::printf("run complete: %lld frames, %lld episodes, %lld train steps, ratio %.6g\n",
              static_cast<long long>(st.frames), static_cast<long long>(st.episodes),
              static_cast<long long>(st.train_steps), st.measured_replay_ratio());
  std::printf("artifacts in %s\n", trainer.run_dir().c_str());
  return 0;
}

EvalReport eval_snapshot_dir(const std::string& dir, int64_t budget, uint64_t env_seed,
                             const std::string& id) {
  const SnapshotData data = load_snapshot(dir);
  const auto net = restore_network(data);
  const auto env = make_env(env_spec_of(data.cfg), env_seed);
  EvalReport rep = evaluate(*net, *env, budget);
  rep.snapshot_id = id;
  return rep;
}

int cmd_eval(const std::string& snapshot_dir, const std::string& run_dir, int64_t budget,
             int64_t eval_seed, std::string out_path, double random_score, double human_score,
             bool have_refs) {
  if (snapshot_dir.empty() == run_dir.empty())
    throw ConfigError("pass exactly one of --snapshot or --run");

  std::vector<EvalReport> reports;
  EvalReport reeval;
  bool have_reeval = false;
  size_t best = 0;

  if (!snapshot_dir.empty()) {
    reports.push_back(eval_snapshot_dir(snapshot_dir, budget,
                                        Rng::derive(static_cast<uint64_t>(eval_seed), 0),
                                        fs::path(snapshot_dir).filename().string()));
  } else {
    const auto index = read_snapshot_index(run_dir);
    if (index.empty()) throw InputError("run has no snapshots: " + run_dir);
    for (size_t i = 0; i < index.size(); ++i)
      reports.push_back(eval_snapshot_dir(run_dir + "/" + index[i].path, budget,
                                          Rng::derive(static_cast<uint64_t>(eval_seed), i),
                                          index[i].name));
    best = select_best(reports);
    reeval = eval_snapshot_dir(run_dir + "/" + index[best].path, budget,
                               Rng::derive(static_cast<uint64_t>(eval_seed), 1'000'000 + best),
                               reports[best].snapshot_id);
    have_reeval = true;
    if (out_path.empty()) out_path = run_dir + "/eval.csv";
  }

  for (const EvalReport& r : reports)
    std::printf("%-16s episodes %-5lld mean %-12.6g median %-12.6g frames %lld\n",
                r.snapshot_id.c_str(), static_cast<long long>(r.episodes), r.mean_return,
                r.median_return, static_cast<long long>(r.frames));
  if (have_reeval) {
    std::printf("best: %s (re-evaluated mean %.6g over %lld episodes)\n",
                reeval.snapshot_id.c_str(), reeval.mean_return,
                static_cast<long long>(reeval.episodes));
  }
  if (have_refs) {
    const EvalReport& scored = have_reeval ? reeval : reports[0];
    std::printf("hns: %.6g\n", hns(scored.mean_return, random_score, human_score));
  }
  if (!out_path.empty())
    write_eval_csv(out_path, reports, best, have_reeval ? &reeval : nullptr);
  return 0;
}

int cmd_plot(const std::string& run_dir, int window, std::string out_path, double random_score,
             double human_score, bool have_refs) {
  const EpisodeLog log = read_episodes_csv(run_dir + "/episodes.csv");
  if (log.size() == 0) throw InputError("run has no finished episodes yet: " + run_dir);
  const Curve avg = episode_average_curve(log, window);
  if (out_path.empty()) out_path = run_dir + "/curve.png";

  const std::string csv_path = out_path.substr(0, out_path.find_last_of('.')) + ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write curve data: " + csv_path);
  csv << "episode,frame,return,avg" << window << "\n";
  for (size_t i = 0; i < log.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%lld,%.17g,%.17g\n", i,
                  static_cast<long long>(log.frame[i]), log.ret[i], avg.y[i]);
    csv << buf;
  }

  Curve labeled = avg;
  labeled.label = "avg" + std::to_string(window);
  render_curves_png(out_path, {labeled}, "frames", "return");
  std::printf("wrote %s and %s (%zu episodes)\n", out_path.c_str(), csv_path.c_str(),
              log.size());

  if (have_refs) {
    const auto cfg_kv = read_kv_file(run_dir + "/config.txt");
    const auto it = cfg_kv.find("env");
    ScoreRow row;
    row.game = it != cfg_kv.end() ? it->second : "run";
    row.random_score = random_score;
    row.human_score = human_score;
    row.agent_score = avg.y.back();
    write_score_table(run_dir + "/hns.csv", {row});
    std::printf("hns (final avg%d): %.6g -> %s/hns.csv\n", window,
                hns(row.agent_score, random_score, human_score), run_dir.c_str());
  }
  return 0;
}

int cmd_bench(const CommonFlags& flags, int64_t frames, const std::string& out_dir) {
  struct Row {
    const char* name;
    const char* mode;
    int batch;
    int envs;
    double k;
  };
  // the cumulative modification stack: bigger batches, vectorized
  // environments, then overlapped collection, at a fixed replay ratio of 8
  const Row rows[] = {
      {"serial_b32_e1", "serial", 32, 1, 0.25},
      {"serial_b256_e1", "serial", 256, 1, 0.03125},
      {"serial_b256_e64", "serial", 256, 64, 2.0},
      {"overlap_b256_e64", "overlap", 256, 64, 2.0},
  };

  fs::create_directories(out_dir);
  std::vector<RunState> states;
  for (const Row& row : rows) {
    Overrides ov;
    // pixel profile suited to minicatch; flags and --set still win
    ov.emplace_back("env", "minicatch");
    ov.emplace_back("grayscale", "false");
    ov.emplace_back("frame_skip", "1");
    ov.emplace_back("frame_stack", "1");
    ov.emplace_back("max_pool_consecutive", "false");
    ov.emplace_back("noop_max", "0");
    ov.emplace_back("warmup_frames", "512");
    ov.emplace_back("replay_capacity", "65536");
    for (const auto& kv : flags.overrides()) ov.push_back(kv);
    ov.emplace_back("mode", row.mode);
    ov.emplace_back("batch_size", std::to_string(row.batch));
    ov.emplace_back("num_envs", std::to_string(row.envs));
    ov.emplace_back("train_steps_per_vector_step", std::to_string(row.k));
    RunConfig cfg = parse_config(flags.config_file, ov);
    cfg.total_frames = cfg.warmup_frames + frames;
    cfg.snapshot_period_frames = 4 * cfg.total_frames;
    cfg.out_dir = out_dir + "/" + row.name;
    validate(cfg);
    std::printf("[bench] %s: %lld frames after %lld warmup\n", row.name,
                static_cast<long long>(frames), static_cast<long long>(cfg.warmup_frames));
    std::fflush(stdout);
    Trainer trainer(cfg);
    states.push_back(trainer.run());
  }

  std::ofstream csv(out_dir + "/bench.csv");
  csv << "row,mode,batch_size,num_envs,k,frames_per_sec,samples_per_sec,speedup\n";
  std::printf("\n%-18s %6s %5s %8s %12s %12s %9s\n", "row", "batch", "envs", "k", "frames/s",
              "samples/s", "speedup");
  const double base = states[0].frames_per_sec;
  for (size_t i = 0; i < states.size(); ++i) {
    const Row& row = rows[i];
    const RunState& st = states[i];
    const double speedup = base > 0.0 ? st.frames_per_sec / base : 0.0;
    std::printf("%-18s %6d %5d %8.5g %12.2f %12.2f %8.2fx\n", row.name, row.batch, row.envs,
                row.k, st.frames_per_sec, st.samples_per_sec, speedup);
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%s,%d,%d,%.17g,%.17g,%.17g,%.17g\n", row.name,
                  row.mode, row.batch, row.envs, row.k, st.frames_per_sec, st.samples_per_sec,
                  speedup);
    csv << line;
  }
  std::printf("\nwrote %s/bench.csv\n", out_dir.c_str());
  return 0;
}

std::vector<std::pair<std::string, std::vector<std::string>>> parse_grid(
    const std::string& spec) {
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  std::string part;
  std::istringstream in(spec);
  while (std::getline(in, part, ';')) {
    if (part.empty()) continue;
    const size_t eq = part.find('=');
    if (eq == std::string::npos)
      throw ConfigError("grid axis needs key=v1,v2,...: '" + part + "'");
    const std::string key = part.substr(0, eq);
    std::vector<std::string> values;
    std::istringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ','))
      if (!v.empty()) values.push_back(v);
    if (key.empty() || values.empty())
      throw ConfigError("grid axis needs key=v1,v2,...: '" + part + "'");
    grid.emplace_back(key, values);
  }
  if (grid.empty()) throw ConfigError("ablation grid is empty");
  return grid;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '-';
  return out;
}

int cmd_ablate(const CommonFlags& flags, const std::string& grid_spec, int seeds, int jobs,
               const std::string& out_dir) {
  if (seeds < 1) throw ConfigError("--seeds must be positive");
  if (jobs < 1) throw ConfigError("--jobs must be positive");
  const auto grid = parse_grid(grid_spec);

  RunConfig base = parse_config(flags.config_file, flags.overrides());
  // grid keys must all be real, and every value must parse
  for (const auto& [key, values] : grid)
    for (const std::string& v : values) {
      RunConfig probe = base;
      set_key(probe, key, v);
    }

  fs::create_directories(out_dir);
  write_config_file(base, out_dir + "/base.txt");

  struct Cell {
    std::string name;
    Overrides sets;
  };
  std::vector<Cell> cells;
  std::vector<size_t> idx(grid.size(), 0);
  while (true) {
    Cell cell;
    for (size_t a = 0; a < grid.size(); ++a) {
      const auto& [key, values] = grid[a];
      cell.sets.emplace_back(key, values[idx[a]]);
      if (!cell.name.empty()) cell.name += '_';
      cell.name += sanitize(key) + "-" + sanitize(values[idx[a]]);
    }
    cells.push_back(std::move(cell));
    size_t a = 0;
    for (; a < grid.size(); ++a) {
      if (++idx[a] < grid[a].second.size()) break;
      idx[a] = 0;
    }
    if (a == grid.size()) break;
  }

  const std::string exe = self_exe();
  std::vector<Job> job_list;
  for (const Cell& cell : cells) {
    for (int s = 0; s < seeds; ++s) {
      const std::string run_dir = out_dir + "/" + cell.name + "/seed" + std::to_string(s);
      fs::create_directories(run_dir);
      Job job;
      job.argv = {exe,     "train",          "--config", out_dir + "/base.txt",
                  "--out", run_dir,          "--seed",   std::to_string(base.seed + s)};
      for (const auto& [key, value] : cell.sets) {
        job.argv.push_back("--set");
        job.argv.push_back(key + "=" + value);
      }
      job.log_path = run_dir + "/log.txt";
      job.label = cell.name + " seed" + std::to_string(s);
      job_list.push_back(std::move(job));
    }
  }

  const int failures = run_jobs(job_list, jobs);
  if (failures > 0) {
    std::fprintf(stderr, "%d of %zu runs failed; see the per-run log.txt files\n", failures,
                 job_list.size());
    return 2;
  }

  // median curve per cell + comparison table
  std::vector<Curve> comparison;
  std::ofstream table(out_dir + "/table.csv");
  table << "cell,seeds,episodes,final_median_avg100,best_median_avg100\n";
  for (const Cell& cell : cells) {
    std::vector<Curve> curves;
    size_t episodes = 0;
    for (int s = 0; s < seeds; ++s) {
      const std::string run_dir = out_dir + "/" + cell.name + "/seed" + std::to_string(s);
      const EpisodeLog log = read_episodes_csv(run_dir + "/episodes.csv");
      episodes += log.size();
      curves.push_back(episode_average_curve(log, 100));
    }
    Curve med = median_curve(curves, 200, static_cast<double>(base.total_frames));
    med.label = cell.name;

    std::ofstream mcsv(out_dir + "/" + cell.name + "/median_curve.csv");
    mcsv << "frame,median_avg100\n";
    for (size_t i = 0; i < med.x.size(); ++i) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", med.x[i], med.y[i]);
      mcsv << buf;
    }

    const double best = *std::max_element(med.y.begin(), med.y.end());
    char line[512];
    std::snprintf(line, sizeof(line), "%s,%d,%zu,%.17g,%.17g\n", cell.name.c_str(), seeds,
                  episodes, med.y.back(), best);
    table << line;
    std::printf("cell %-28s final median avg100 %.4f  best %.4f\n", cell.name.c_str(),
                med.y.back(), best);
    comparison.push_back(std::move(med));
  }
  render_curves_png(out_dir + "/ablation.png", comparison, "frames", "return");
  std::printf("wrote %s/table.csv and %s/ablation.png\n", out_dir.c_str(), out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prioritized n-step deep Q-learning engine"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "run a training loop");
  train_flags.attach(train);

  CLI::App* eval = app.add_subcommand("eval", "evaluate snapshots with a fixed frame budget");
  std::string eval_snapshot, eval_run, eval_out;
  int64_t eval_budget = 500'000;
  int64_t eval_seed = 10'007;
  double eval_random = 0.0, eval_human = 0.0;
  eval->add_option("--snapshot", eval_snapshot, "one snapshot directory");
  eval->add_option("--run", eval_run, "run directory; evaluates every snapshot and re-runs the best");
  eval->add_option("--budget", eval_budget, "evaluation frame budget per snapshot");
  eval->add_option("--eval-seed", eval_seed, "environment seed base for evaluation");
  eval->add_option("--out", eval_out, "where to write the report CSV");
  CLI::Option* opt_random = eval->add_option("--random", eval_random, "random-play reference score");
  CLI::Option* opt_human = eval->add_option("--human", eval_human, "human reference score");
  opt_random->needs(opt_human);
  opt_human->needs(opt_random);

  CLI::App* plot = app.add_subcommand("plot", "render learning curves from a run directory");
  std::string plot_run, plot_out;
  int plot_window = 100;
  double plot_random = 0.0, plot_human = 0.0;
  plot->add_option("--run", plot_run, "run directory")->required();
  plot->add_option("--window", plot_window, "running-average window");
  plot->add_option("--out", plot_out, "output image path");
  CLI::Option* plot_opt_random =
      plot->add_option("--random", plot_random, "random-play reference score");
  CLI::Option* plot_opt_human = plot->add_option("--human", plot_human, "human reference score");
  plot_opt_random->needs(plot_opt_human);
  plot_opt_human->needs(plot_opt_random);

  CommonFlags bench_flags;
  CLI::App* bench = app.add_subcommand("bench", "measure training throughput across the modification stack");
  bench_flags.attach(bench, /*with_out=*/false);
  int64_t bench_frames = 1024;
  std::string bench_out = "runs/bench";
  bench->add_option("--frames", bench_frames, "timed frames per row (after warmup)");
  bench->add_option("--out", bench_out, "bench output directory");

  CommonFlags ablate_flags;
  CLI::App* ablate = app.add_subcommand("ablate", "run a config grid, several seeds per cell");
  ablate_flags.attach(ablate, /*with_out=*/false);
  std::string ablate_grid, ablate_out = "runs/ablation";
  int ablate_seeds = 3, ablate_jobs = 1;
  ablate->add_option("--grid", ablate_grid, "axes, e.g. 'multiplier=1,2;sn=none,all'")->required();
  ablate->add_option("--seeds", ablate_seeds, "seeds per cell");
  ablate->add_option("--jobs", ablate_jobs, "parallel runs");
  ablate->add_option("--out", ablate_out, "ablation output directory");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(train_flags);
    if (eval->parsed())
      return cmd_eval(eval_snapshot, eval_run, eval_budget, eval_seed, eval_out, eval_random,
                      eval_human, opt_random->count() > 0);
    if (plot->parsed())
      return cmd_plot(plot_run, plot_window, plot_out, plot_random, plot_human,
                      plot_opt_random->count() > 0);
    if (bench->parsed()) return cmd_bench(bench_flags, bench_frames, bench_out);
    if (ablate->parsed())
      return cmd_ablate(ablate_flags, ablate_grid, ablate_seeds, ablate_jobs, ablate_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
