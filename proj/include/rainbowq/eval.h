#pragma once

// Snapshot evaluation: fixed frame budgets, greedy deterministic policy
// (zero noise, no epsilon), human-normalized scoring and the aggregates
// reported over game suites.

#include <cstdint>
#include <string>
#include <vector>

#include "rainbowq/env.h"
#include "rainbowq/qnet.h"

namespace rainbowq {

struct EvalReport {
  std::string snapshot_id;
  std::vector<double> returns;  // one per completed episode
  int64_t episodes = 0;
  double mean_return = 0.0;
  double median_return = 0.0;
  int64_t frames = 0;  // raw frames consumed, skip included
};

// Runs greedy episodes until the budget is spent.  The episode in progress
// when the budget expires is completed and counted, so consumption may
// overshoot by at most one episode.
EvalReport evaluate(QNetwork& net, Env& env, int64_t budget_frames);

// 100 * (agent - random) / (human - random); InputError when human == random.
double hns(double agent, double random, double human);

struct Aggregate {
  double mean_hns = 0.0;
  double median_hns = 0.0;
  int above_human = 0;  // strictly above 100
};
Aggregate aggregate(const std::vector<double>& hns_values);  // InputError when empty

// Element i = mean of xs[max(0, i-window+1) .. i].
std::vector<double> running_average(const std::vector<double>& xs, int window = 100);

// Argmax by mean return; ties break toward the earliest report.
size_t select_best(const std::vector<EvalReport>& reports);  // InputError when empty

// CSV with one row per report plus, when given, the re-evaluation row of the
// selected snapshot.
void write_eval_csv(const std::string& path, const std::vector<EvalReport>& reports,
                    size_t best_index, const EvalReport* reevaluation);

struct ScoreRow {
  std::string game;
  double random_score = 0.0;
  double human_score = 0.0;
  double agent_score = 0.0;
};

// Per-game scores with an HNS column and a trailing aggregate row.
void write_score_table(const std::string& path, const std::vector<ScoreRow>& rows);

double median_of(std::vector<double> xs);  // InputError when empty

}  // namespace rainbowq
