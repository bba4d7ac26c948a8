#include "rainbowq/run_io.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "rainbowq/errors.h"
#include "rainbowq/eval.h"

namespace rainbowq {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trimmed(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

EpisodeLog read_episodes_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read episodes file: " + path);
  EpisodeLog log;
  std::string line;
  bool header = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (header) {
      header = false;
      continue;
    }
    if (trimmed(line).empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 4)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected 4 columns");
    try {
      log.frame.push_back(std::stoll(cols[0]));
      log.env.push_back(std::stoi(cols[1]));
      log.ret.push_back(std::stod(cols[2]));
      log.len.push_back(std::stoll(cols[3]));
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return log;
}

Curve episode_average_curve(const EpisodeLog& log, int window) {
  Curve c;
  c.x.reserve(log.size());
  const std::vector<double> avg = running_average(log.ret, window);
  for (size_t i = 0; i < log.size(); ++i) c.x.push_back(static_cast<double>(log.frame[i]));
  c.y = avg;
  return c;
}

std::vector<double> resample_step(const Curve& c, const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), 0.0);
  if (c.x.empty()) return out;
  size_t j = 0;
  double last = c.y.front();
  for (size_t i = 0; i < grid.size(); ++i) {
    while (j < c.x.size() && c.x[j] <= grid[i]) {
      last = c.y[j];
      ++j;
    }
    out[i] = last;
  }
  return out;
}

Curve median_curve(const std::vector<Curve>& curves, int points, double x_max) {
  if (curves.empty()) throw InputError("median of zero curves");
  if (points < 2) throw InputError("median curve needs at least two grid points");
  Curve med;
  med.x.resize(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i)
    med.x[static_cast<size_t>(i)] = x_max * i / (points - 1);
  std::vector<std::vector<double>> sampled;
  for (const Curve& c : curves) sampled.push_back(resample_step(c, med.x));
  med.y.resize(med.x.size());
  std::vector<double> column(curves.size());
  for (size_t i = 0; i < med.x.size(); ++i) {
    for (size_t k = 0; k < sampled.size(); ++k) column[k] = sampled[k][i];
    med.y[i] = median_of(column);
  }
  return med;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trimmed(line.substr(0, eq));
    if (!key.empty()) kv[key] = trimmed(line.substr(eq + 1));
  }
  return kv;
}

std::vector<SnapshotIndexRow> read_snapshot_index(const std::string& run_dir) {
  const std::string path = run_dir + "/snapshots.csv";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read snapshot index: " + path);
  std::vector<SnapshotIndexRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (trimmed(line).empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 3) throw IoError(path + ": expected 3 columns");
    SnapshotIndexRow row;
    row.name = cols[0];
    row.frames = std::stoll(cols[1]);
    row.path = cols[2];
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rainbowq
