#pragma once

// Readers for the artifacts a run directory accumulates (episodes CSV,
// snapshot index, key = value state files) and the curve arithmetic the
// plot and ablation commands share.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rainbowq/plot.h"

namespace rainbowq {

struct EpisodeLog {
  std::vector<int64_t> frame;
  std::vector<int> env;
  std::vector<double> ret;
  std::vector<int64_t> len;
  size_t size() const { return frame.size(); }
};

EpisodeLog read_episodes_csv(const std::string& path);

// x = episode-end frame, y = trailing average of episode returns.
Curve episode_average_curve(const EpisodeLog& log, int window = 100);

// Step-function resample: value at g = y of the last point with x <= g, the
// first y before that, 0 for an empty curve.
std::vector<double> resample_step(const Curve& c, const std::vector<double>& grid);

// Pointwise median of several curves on a uniform grid over [0, x_max].
Curve median_curve(const std::vector<Curve>& curves, int points, double x_max);

// `key = value` lines; '#' comments ignored.
std::map<std::string, std::string> read_kv_file(const std::string& path);

struct SnapshotIndexRow {
  std::string name;
  int64_t frames = 0;
  std::string path;  // relative to the run directory
};
std::vector<SnapshotIndexRow> read_snapshot_index(const std::string& run_dir);

}  // namespace rainbowq
