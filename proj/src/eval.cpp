#include "rainbowq/eval.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rainbowq/agent.h"
#include "rainbowq/errors.h"

namespace rainbowq {

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

double median_of(std::vector<double> xs) {
  if (xs.empty()) throw InputError("median of an empty series");
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

EvalReport evaluate(QNetwork& net, Env& env, int64_t budget_frames) {
  if (budget_frames < 1) throw InputError("evaluation budget must be positive");
  if (net.config().num_actions != env.num_actions())
    throw InputError("snapshot has " + std::to_string(net.config().num_actions) +
                     " actions, env has " + std::to_string(env.num_actions()));

  EvalReport report;
  QCache cache;
  Rng unused(0);  // eval mode draws neither noise nor exploration coins
  const std::vector<int> shape = env.obs_shape();
  Tensor obs_b({1, shape[0], shape[1], shape[2]});

  Tensor obs = env.reset();
  bool in_episode = true;
  while (report.frames < budget_frames || in_episode) {
    std::copy(obs.v.begin(), obs.v.end(), obs_b.v.begin());
    const int action =
        act_batch(net, cache, obs_b, /*eps=*/0.0, unused, /*train_mode=*/false)[0];
    const StepResult r = env.step(action);
    report.frames += env.frames_per_step();
    obs = r.obs;
    in_episode = !(r.done || r.timeout);
    if (!in_episode) report.returns.push_back(r.episode_return);
  }

  report.episodes = static_cast<int64_t>(report.returns.size());
  report.mean_return =
      std::accumulate(report.returns.begin(), report.returns.end(), 0.0) /
      static_cast<double>(report.episodes);
  report.median_return = median_of(report.returns);
  return report;
}

double hns(double agent, double random, double human) {
  if (human == random)
    throw InputError("human score equals random score; normalized score undefined");
  return 100.0 * (agent - random) / (human - random);
}

Aggregate aggregate(const std::vector<double>& hns_values) {
  if (hns_values.empty()) throw InputError("aggregate of an empty score table");
  Aggregate a;
  a.mean_hns = std::accumulate(hns_values.begin(), hns_values.end(), 0.0) /
               static_cast<double>(hns_values.size());
  a.median_hns = median_of(hns_values);
  for (double h : hns_values)
    if (h > 100.0) ++a.above_human;
  return a;
}

std::vector<double> running_average(const std::vector<double>& xs, int window) {
  if (window < 1) throw InputError("running average window must be positive");
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= static_cast<size_t>(window)) acc -= xs[i - static_cast<size_t>(window)];
    const size_t n = std::min(i + 1, static_cast<size_t>(window));
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

size_t select_best(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InputError("no evaluation reports to select from");
  size_t best = 0;
  for (size_t i = 1; i < reports.size(); ++i)
    if (reports[i].mean_return > reports[best].mean_return) best = i;
  return best;
}

void write_eval_csv(const std::string& path, const std::vector<EvalReport>& reports,
                    size_t best_index, const EvalReport* reevaluation) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write eval report: " + path);
  out << "snapshot,phase,episodes,mean_return,median_return,frames,best\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const EvalReport& r = reports[i];
    out << r.snapshot_id << ",first," << r.episodes << ',' << fmt(r.mean_return) << ','
        << fmt(r.median_return) << ',' << r.frames << ',' << (i == best_index ? 1 : 0)
        << '\n';
  }
  if (reevaluation != nullptr) {
    out << reevaluation->snapshot_id << ",reeval," << reevaluation->episodes << ','
        << fmt(reevaluation->mean_return) << ',' << fmt(reevaluation->median_return) << ','
        << reevaluation->frames << ",1\n";
  }
  if (!out) throw IoError("failed writing eval report: " + path);
}

void write_score_table(const std::string& path, const std::vector<ScoreRow>& rows) {
  if (rows.empty()) throw InputError("score table is empty");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write score table: " + path);
  out << "game,random,human,agent,hns\n";
  std::vector<double> scores;
  for (const ScoreRow& r : rows) {
    const double h = hns(r.agent_score, r.random_score, r.human_score);
    scores.push_back(h);
    out << r.game << ',' << fmt(r.random_score) << ',' << fmt(r.human_score) << ','
        << fmt(r.agent_score) << ',' << fmt(h) << '\n';
  }
  const Aggregate a = aggregate(scores);
  out << "aggregate,,,," << fmt(a.mean_hns) << '\n';
  out << "median,,,," << fmt(a.median_hns) << '\n';
  out << "above_human,,,," << a.above_human << '\n';
  if (!out) throw IoError("failed writing score table: " + path);
}

}  // namespace rainbowq
