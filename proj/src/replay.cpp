#include "rainbowq/replay.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "rainbowq/errors.h"

namespace rainbowq {

void ReplayConfig::validate() const {
  if (capacity <= 0) throw ConfigError("replay capacity must be positive");
  if (n_step < 1) throw ConfigError("n_step must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!(priority_exponent >= 0.0)) throw ConfigError("priority_exponent must be >= 0");
  if (!(priority_floor > 0.0)) throw ConfigError("priority_floor must be positive");
  if (!(beta0 > 0.0 && beta0 <= 1.0)) throw ConfigError("beta0 must be in (0, 1]");
  if (beta_frames <= 0) throw ConfigError("beta_frames must be positive");
  if (num_envs < 1) throw ConfigError("num_envs must be >= 1");
}

PrioritizedReplay::PrioritizedReplay(const ReplayConfig& cfg, uint64_t seed)
    : cfg_(cfg), rng_(seed), tree_(cfg.capacity) {
  cfg_.validate();
  ring_.resize(static_cast<size_t>(cfg_.capacity));
  pending_.resize(static_cast<size_t>(cfg_.num_envs));
}

PrioritizedReplay::Blob PrioritizedReplay::encode(const Tensor& t) const {
  Blob b;
  if (cfg_.store_u8) {
    b.u8.resize(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
      const float x = std::min(1.0f, std::max(0.0f, t.v[i]));
      b.u8[i] = static_cast<uint8_t>(std::lround(x * 255.0f));
    }
  } else {
    b.f32 = t.v;
  }
  return b;
}

Tensor PrioritizedReplay::decode(const Blob& b) const {
  Tensor t(obs_shape_);
  if (cfg_.store_u8) {
    if (b.u8.empty()) return t;  // zero blob (terminal next_obs)
    for (size_t i = 0; i < t.size(); ++i) t.v[i] = static_cast<float>(b.u8[i]) / 255.0f;
  } else {
    if (b.f32.empty()) return t;
    std::copy(b.f32.begin(), b.f32.end(), t.v.begin());
  }
  return t;
}

PrioritizedReplay::Stored PrioritizedReplay::make_entry(const std::deque<Pending>& q,
                                                        size_t start, const Blob& next,
                                                        bool bootstrap) const {
  Stored s;
  s.obs = q[start].obs;
  s.action = q[start].action;
  double ret = 0.0;
  double disc = 1.0;
  for (size_t j = start; j < q.size(); ++j) {
    ret += disc * q[j].reward;
    disc *= cfg_.gamma;
  }
  s.return_n = ret;
  s.discount_n = disc;  // gamma^m for window length m = q.size() - start
  s.bootstrap = bootstrap;
  s.next_obs = next;
  return s;
}

int PrioritizedReplay::push(const Transition& t) {
  std::lock_guard<std::mutex> lock(mu_);
  if (t.env_id < 0 || t.env_id >= cfg_.num_envs)
    throw InputError("transition env_id out of range: " + std::to_string(t.env_id));
  if (t.obs.size() == 0) throw InputError("transition observation is empty");
  if (obs_shape_.empty()) {
    obs_shape_ = t.obs.shape;
  } else if (t.obs.shape != obs_shape_) {
    throw InputError("transition observation shape changed mid-run");
  }

  auto& q = pending_[static_cast<size_t>(t.env_id)];
  int stored = 0;

  // A full window completes as soon as the state n steps ahead is known,
  // which is exactly the incoming transition's observation.
  if (static_cast<int>(q.size()) == cfg_.n_step) {
    store_entry(make_entry(q, 0, encode(t.obs), /*bootstrap=*/true));
    q.pop_front();
    ++stored;
  }

  Pending p;
  p.obs = encode(t.obs);
  p.action = t.action;
  p.reward = t.reward;
  q.push_back(std::move(p));

  if (t.done || t.timeout) {
    const bool terminal = t.done;  // a terminal inside the limit is still terminal
    Blob next;
    if (!terminal) {
      if (t.final_obs.size() == 0)
        throw InputError("timeout transition missing final_obs");
      next = encode(t.final_obs);
    }
    for (size_t j = 0; j < q.size(); ++j) {
      store_entry(make_entry(q, j, next, /*bootstrap=*/!terminal));
      ++stored;
    }
    q.clear();
  }
  return stored;
}

void PrioritizedReplay::store_entry(Stored&& s) {
  const int64_t slot = write_cursor_ % cfg_.capacity;
  s.epoch = ring_[static_cast<size_t>(slot)].epoch + 1;
  ring_[static_cast<size_t>(slot)] = std::move(s);
  tree_.set(slot, max_priority_);
  ++write_cursor_;
  size_ = std::min(write_cursor_, cfg_.capacity);
}

SampleBatch PrioritizedReplay::sample(int batch_size, int64_t frame) {
  std::lock_guard<std::mutex> lock(mu_);
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (size_ < batch_size)
    throw NotReadyError("replay holds " + std::to_string(size_) + " entries, need " +
                        std::to_string(batch_size));
  const double total = tree_.total();
  if (!(total > 0.0)) throw StateError("replay priority mass is zero");
  const double beta = beta_at(frame);
  const double seg = total / batch_size;

  SampleBatch out;
  out.refs.resize(static_cast<size_t>(batch_size));
  out.entries.resize(static_cast<size_t>(batch_size));
  out.weights.resize(static_cast<size_t>(batch_size));

  double max_w = 0.0;
  for (int i = 0; i < batch_size; ++i) {
    double u = (static_cast<double>(i) + rng_.uniform()) * seg;
    if (u >= total) u = std::nextafter(total, 0.0);
    int64_t slot = tree_.prefix_sample(u);
    if (slot >= size_) slot = size_ - 1;  // float-boundary guard; zero mass past size_
    const Stored& s = ring_[static_cast<size_t>(slot)];
    out.refs[static_cast<size_t>(i)] = {slot, s.epoch};
    NStepEntry e;
    e.obs = decode(s.obs);
    e.action = s.action;
    e.return_n = s.return_n;
    e.next_obs = decode(s.next_obs);
    e.discount_n = s.discount_n;
    e.bootstrap = s.bootstrap;
    out.entries[static_cast<size_t>(i)] = std::move(e);
    const double prob = tree_.get(slot) / total;
    const double w = std::pow(static_cast<double>(size_) * prob, -beta);
    out.weights[static_cast<size_t>(i)] = w;
    max_w = std::max(max_w, w);
  }
  for (auto& w : out.weights) w /= max_w;
  return out;
}

void PrioritizedReplay::update_priorities(const std::vector<SampleRef>& refs,
                                          const std::vector<double>& td_abs) {
  std::lock_guard<std::mutex> lock(mu_);
  if (refs.size() != td_abs.size())
    throw InputError("update_priorities: refs and td_abs length mismatch");
  for (size_t i = 0; i < refs.size(); ++i) {
    const auto& r = refs[i];
    if (r.slot < 0 || r.slot >= cfg_.capacity)
      throw InputError("update_priorities: slot out of range");
    if (!std::isfinite(td_abs[i]) || td_abs[i] < 0.0)
      throw InputError("update_priorities: |td| must be finite and non-negative");
    if (ring_[static_cast<size_t>(r.slot)].epoch != r.epoch) {
      ++stale_updates_;  // overwritten since sampling; skip silently
      continue;
    }
    const double p = std::pow(td_abs[i] + cfg_.priority_floor, cfg_.priority_exponent);
    tree_.set(r.slot, p);
    max_priority_ = std::max(max_priority_, p);
  }
}

double PrioritizedReplay::beta_at(int64_t frame) const {
  if (frame < 0) throw InputError("beta_at: frame must be >= 0");
  const double frac = std::min(1.0, static_cast<double>(frame) /
                                        static_cast<double>(cfg_.beta_frames));
  return cfg_.beta0 + (1.0 - cfg_.beta0) * frac;
}

int64_t PrioritizedReplay::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return size_;
}

double PrioritizedReplay::total_priority() const {
  std::lock_guard<std::mutex> lock(mu_);
  return tree_.total();
}

double PrioritizedReplay::max_priority() const {
  std::lock_guard<std::mutex> lock(mu_);
  return max_priority_;
}

int64_t PrioritizedReplay::stale_updates() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stale_updates_;
}

std::vector<double> PrioritizedReplay::weights_for(const std::vector<int64_t>& slots,
                                                   double beta) const {
  std::lock_guard<std::mutex> lock(mu_);
  const double total = tree_.total();
  if (!(total > 0.0)) throw StateError("replay priority mass is zero");
  std::vector<double> w(slots.size());
  double max_w = 0.0;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] < 0 || slots[i] >= size_) throw InputError("weights_for: slot out of range");
    const double prob = tree_.get(slots[i]) / total;
    w[i] = std::pow(static_cast<double>(size_) * prob, -beta);
    max_w = std::max(max_w, w[i]);
  }
  for (auto& x : w) x /= max_w;
  return w;
}

NStepEntry PrioritizedReplay::entry_at(int64_t slot) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (slot < 0 || slot >= size_) throw InputError("entry_at: slot out of range");
  const Stored& s = ring_[static_cast<size_t>(slot)];
  NStepEntry e;
  e.obs = decode(s.obs);
  e.action = s.action;
  e.return_n = s.return_n;
  e.next_obs = decode(s.next_obs);
  e.discount_n = s.discount_n;
  e.bootstrap = s.bootstrap;
  return e;
}

uint64_t PrioritizedReplay::epoch_at(int64_t slot) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (slot < 0 || slot >= cfg_.capacity) throw InputError("epoch_at: slot out of range");
  return ring_[static_cast<size_t>(slot)].epoch;
}

int PrioritizedReplay::pending_count(int env_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (env_id < 0 || env_id >= cfg_.num_envs) throw InputError("pending_count: bad env_id");
  return static_cast<int>(pending_[static_cast<size_t>(env_id)].size());
}

}  // namespace rainbowq
