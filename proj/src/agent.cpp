#include "rainbowq/agent.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace rainbowq {

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("adam betas must be in [0, 1)");
  if (!(adam_eps_scale > 0.0)) throw ConfigError("adam_eps_scale must be positive");
  if (grad_clip_norm < 0.0) throw ConfigError("grad_clip_norm must be >= 0");
  if (target_sync_frames <= 0) throw ConfigError("target_sync_frames must be positive");
  if (!(eps_initial >= 0.0 && eps_initial <= 1.0) || !(eps_final >= 0.0 && eps_final <= 1.0))
    throw ConfigError("epsilons must be in [0, 1]");
  if (eps_final > eps_initial) throw ConfigError("eps_final must not exceed eps_initial");
  if (eps_decay_frames <= 0) throw ConfigError("eps_decay_frames must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

Adam::Adam(const ParamStoreT<float>& store, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.resize(store.count());
  v_.resize(store.count());
  for (size_t i = 0; i < store.count(); ++i) {
    m_[i].assign(store.value_at(i).v.size(), 0.0);
    v_[i].assign(store.value_at(i).v.size(), 0.0);
  }
}

double Adam::step(ParamStoreT<float>& store, double clip_norm) {
  double sq = 0.0;
  for (size_t i = 0; i < store.count(); ++i) {
    for (float g : store.grad_at(i).v) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < store.count(); ++i) {
    auto& val = store.value_at(i).v;
    const auto& grad = store.grad_at(i).v;
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < val.size(); ++j) {
      const double g = static_cast<double>(grad[j]) * scale;
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      val[j] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + eps_));
    }
  }
  return norm;
}

double huber(double delta) {
  const double a = std::fabs(delta);
  return a <= 1.0 ? 0.5 * delta * delta : a - 0.5;
}

double loss_value(const std::vector<double>& q_sa, const std::vector<double>& y,
                  const std::vector<double>& w, LossKind kind) {
  if (q_sa.size() != y.size() || w.size() != y.size())
    throw InputError("loss: batch size mismatch");
  if (q_sa.empty()) throw InputError("loss: empty batch");
  double acc = 0.0;
  for (size_t i = 0; i < q_sa.size(); ++i) {
    const double d = y[i] - q_sa[i];
    acc += w[i] * (kind == LossKind::huber ? huber(d) : d * d);
  }
  return acc / static_cast<double>(q_sa.size());
}

std::vector<double> td_errors(const std::vector<double>& q_sa, const std::vector<double>& y) {
  if (q_sa.size() != y.size()) throw InputError("td_errors: batch size mismatch");
  std::vector<double> out(q_sa.size());
  for (size_t i = 0; i < q_sa.size(); ++i) out[i] = std::fabs(y[i] - q_sa[i]);
  return out;
}

std::vector<int> act_batch(QNetwork& net, QCache& cache, const Tensor& obs, double eps,
                           Rng& rng, bool train_mode) {
  const int n = obs.dim(0);
  const int a = net.config().num_actions;
  std::vector<int> actions;
  if (train_mode) {
    NoiseDraw noise = net.draw_noise(rng);
    net.forward(obs, &noise, /*use_target=*/false, /*update_sn=*/false, cache);
    actions = QNetwork::argmax_rows(cache.q);
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() < eps) actions[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(a));
    }
  } else {
    net.forward(obs, nullptr, false, false, cache);
    actions = QNetwork::argmax_rows(cache.q);
  }
  return actions;
}

Agent::Agent(const AgentConfig& cfg, QNetwork& net, uint64_t seed)
    : cfg_(cfg),
      net_(net),
      opt_(net.params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps()),
      rng_(seed) {
  cfg_.validate();
}

double Agent::epsilon_at(int64_t frame) const {
  if (frame < 0) throw InputError("epsilon_at: frame must be >= 0");
  const double frac = std::min(1.0, static_cast<double>(frame) /
                                        static_cast<double>(cfg_.eps_decay_frames));
  return cfg_.eps_initial - (cfg_.eps_initial - cfg_.eps_final) * frac;
}

void Agent::stack_obs(const std::vector<NStepEntry>& entries, bool next, Tensor& out) {
  const Tensor& first = next ? entries[0].next_obs : entries[0].obs;
  std::vector<int> shape = {static_cast<int>(entries.size())};
  for (int d : first.shape) shape.push_back(d);
  if (out.shape != shape) out = Tensor(shape);
  const size_t stride = first.size();
  for (size_t i = 0; i < entries.size(); ++i) {
    const Tensor& src = next ? entries[i].next_obs : entries[i].obs;
    if (src.size() != static_cast<int64_t>(stride))
      throw InputError("batch entries have mismatched observation shapes");
    std::memcpy(out.data() + i * stride, src.data(), stride * sizeof(float));
  }
}

std::vector<double> Agent::compute_target(const std::vector<NStepEntry>& entries,
                                          const NoiseDraw* noise_sel,
                                          const NoiseDraw* noise_tgt) {
  if (entries.empty()) throw InputError("compute_target: empty batch");
  stack_obs(entries, /*next=*/true, next_batch_);
  NoiseDraw local_sel, local_tgt;
  if (!noise_sel) {
    local_sel = net_.draw_noise(rng_);
    noise_sel = &local_sel;
  }
  if (!noise_tgt) {
    local_tgt = net_.draw_noise(rng_);
    noise_tgt = &local_tgt;
  }
  net_.forward(next_batch_, noise_sel, /*use_target=*/false, /*update_sn=*/false, cache_sel_);
  const std::vector<int> greedy = QNetwork::argmax_rows(cache_sel_.q);
  net_.forward(next_batch_, noise_tgt, /*use_target=*/true, /*update_sn=*/false, cache_tgt_);

  const int a = net_.config().num_actions;
  std::vector<double> y(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    double boot = 0.0;
    if (entries[i].bootstrap) {
      boot = entries[i].discount_n *
             static_cast<double>(
                 cache_tgt_.q.data()[i * static_cast<size_t>(a) +
                                     static_cast<size_t>(greedy[i])]);
    }
    y[i] = entries[i].return_n + boot;
  }
  return y;
}

StepMetrics Agent::train_step(PrioritizedReplay& replay, int64_t frame) {
  SampleBatch batch = replay.sample(cfg_.batch_size, frame);
  const int b = cfg_.batch_size;
  const int a = net_.config().num_actions;

  // fixed draw order keeps runs reproducible: main, selection, target
  NoiseDraw noise_main = net_.draw_noise(rng_);
  NoiseDraw noise_sel = net_.draw_noise(rng_);
  NoiseDraw noise_tgt = net_.draw_noise(rng_);

  const std::vector<double> y = compute_target(batch.entries, &noise_sel, &noise_tgt);

  stack_obs(batch.entries, /*next=*/false, obs_batch_);
  net_.forward(obs_batch_, &noise_main, /*use_target=*/false, /*update_sn=*/true, cache_main_);

  std::vector<double> q_sa(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    q_sa[static_cast<size_t>(i)] = static_cast<double>(
        cache_main_.q.data()[static_cast<size_t>(i) * a + batch.entries[static_cast<size_t>(i)].action]);
  }

  const double loss = loss_value(q_sa, y, batch.weights, cfg_.loss);
  if (!std::isfinite(loss))
    throw DivergedError("non-finite loss at frame " + std::to_string(frame));

  // dL/dq[i][a_i] = w_i * rho'(delta_i) * (-1) / b
  Tensor dq({b, a});
  for (int i = 0; i < b; ++i) {
    const double d = y[static_cast<size_t>(i)] - q_sa[static_cast<size_t>(i)];
    double slope;  // d rho / d delta
    if (cfg_.loss == LossKind::huber)
      slope = std::fabs(d) <= 1.0 ? d : (d > 0 ? 1.0 : -1.0);
    else
      slope = 2.0 * d;
    dq.data()[static_cast<size_t>(i) * a + batch.entries[static_cast<size_t>(i)].action] =
        static_cast<float>(-batch.weights[static_cast<size_t>(i)] * slope / b);
  }

  net_.params().zero_grads();
  net_.backward(dq, cache_main_);
  const double grad_norm = opt_.step(net_.params(), cfg_.grad_clip_norm);

  replay.update_priorities(batch.refs, td_errors(q_sa, y));

  StepMetrics m;
  m.loss = loss;
  m.grad_norm = grad_norm;
  double qsum = 0.0;
  for (double q : q_sa) qsum += q;
  m.mean_q = qsum / b;
  return m;
}

bool Agent::maybe_sync_target(int64_t frame) {
  if (frame / cfg_.target_sync_frames > last_sync_frame_ / cfg_.target_sync_frames) {
    net_.sync_target();
    last_sync_frame_ = frame;
    return true;
  }
  return false;
}

}  // namespace rainbowq
