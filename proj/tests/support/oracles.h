#pragma once

// Independent reference implementations used to cross-check the library.
// These are deliberately written the slow, obvious way.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace testsupport {

// First leaf i with cumsum(p_0..p_{i-1}) <= u < cumsum(p_0..p_i), by direct scan.
inline int64_t linear_prefix_scan(const std::vector<double>& p, double u) {
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (u < acc + p[i]) return static_cast<int64_t>(i);
    acc += p[i];
  }
  return -1;  // u >= total
}

// --- n-step window enumeration -------------------------------------------

struct OracleStep {
  int obs_id = 0;
  int action = 0;
  double reward = 0.0;
};

enum class EpisodeEnd { running, terminal, timeout };

struct OracleWindow {
  int obs_id = 0;
  int action = 0;
  double ret = 0.0;
  double discount = 0.0;
  bool bootstrap = true;
  int next_id = -1;  // -1 means the all-zeros terminal observation
};

// Every window the assembler should have emitted for one episode, in
// increasing start order.  `final_id` is the post-truncation observation and
// only matters when end == timeout.
inline std::vector<OracleWindow> nstep_windows(const std::vector<OracleStep>& ep,
                                               EpisodeEnd end, int final_id, int n,
                                               double gamma) {
  const int t = static_cast<int>(ep.size());
  std::vector<OracleWindow> out;
  for (int j = 0; j < t; ++j) {
    int m;
    bool bootstrap;
    int next_id;
    if (end == EpisodeEnd::running) {
      if (j + n > t - 1) continue;  // end state not observed yet; still pending
      m = n;
      bootstrap = true;
      next_id = ep[static_cast<size_t>(j + n)].obs_id;
    } else {
      m = std::min(n, t - j);
      if (j + m < t) {
        bootstrap = true;
        next_id = ep[static_cast<size_t>(j + n)].obs_id;
      } else if (end == EpisodeEnd::terminal) {
        bootstrap = false;
        next_id = -1;
      } else {
        bootstrap = true;
        next_id = final_id;
      }
    }
    OracleWindow w;
    w.obs_id = ep[static_cast<size_t>(j)].obs_id;
    w.action = ep[static_cast<size_t>(j)].action;
    double disc = 1.0;
    for (int i = 0; i < m; ++i) {
      w.ret += disc * ep[static_cast<size_t>(j + i)].reward;
      disc *= gamma;
    }
    w.discount = disc;
    w.bootstrap = bootstrap;
    w.next_id = next_id;
    out.push_back(w);
  }
  return out;
}

// Value iteration for the line MDP: states 0..n-1, terminal at n-1 with
// entry reward 1, actions {0: left (clamped), 1: right}.  Returns Q[s][a].
inline std::vector<std::array<double, 2>> chain_q_star(int n, double gamma) {
  std::vector<double> v(static_cast<size_t>(n), 0.0);
  std::vector<std::array<double, 2>> q(static_cast<size_t>(n), {0.0, 0.0});
  for (int sweep = 0; sweep < 10'000; ++sweep) {
    double delta = 0.0;
    for (int s = 0; s < n - 1; ++s) {
      const int left = s > 0 ? s - 1 : 0;
      const int right = s + 1;
      const double r_right = right == n - 1 ? 1.0 : 0.0;
      q[static_cast<size_t>(s)][0] = gamma * v[static_cast<size_t>(left)];
      q[static_cast<size_t>(s)][1] =
          r_right + (right == n - 1 ? 0.0 : gamma * v[static_cast<size_t>(right)]);
      const double nv = std::max(q[static_cast<size_t>(s)][0], q[static_cast<size_t>(s)][1]);
      delta = std::max(delta, std::fabs(nv - v[static_cast<size_t>(s)]));
      v[static_cast<size_t>(s)] = nv;
    }
    if (delta < 1e-14) break;
  }
  return q;
}

}  // namespace testsupport
