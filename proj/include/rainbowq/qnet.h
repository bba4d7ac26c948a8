#pragma once

// The value network: a three-stage residual conv trunk feeding a noisy
// dueling head.  Forward caches everything backward needs; backward
// accumulates into the online parameter gradients.  Templated on scalar so
// the finite-difference checks can instantiate the whole thing in double.

#include <cstdint>
#include <string>
#include <vector>

#include "rainbowq/errors.h"
#include "rainbowq/nn_ops.h"
#include "rainbowq/param_store.h"
#include "rainbowq/rng.h"
#include "rainbowq/tensor.h"

namespace rainbowq {

enum class SnMode { none, all, last };

inline const char* to_string(SnMode m) {
  switch (m) {
    case SnMode::none: return "none";
    case SnMode::all: return "all";
    case SnMode::last: return "last";
  }
  return "none";
}

inline SnMode parse_sn_mode(const std::string& s) {
  if (s == "none") return SnMode::none;
  if (s == "all") return SnMode::all;
  if (s == "last") return SnMode::last;
  throw ConfigError("unknown spectral norm mode: " + s);
}

struct NetConfig {
  int in_channels = 4;
  int in_h = 84;
  int in_w = 84;
  int num_actions = 4;
  int multiplier = 2;  // widths are [16, 32, 32] * multiplier
  SnMode sn = SnMode::none;
  double sigma0 = 0.5;
  int hidden = 256;
  int pool_grid = 6;

  void validate() const {
    if (in_channels < 1 || in_h < 1 || in_w < 1)
      throw ConfigError("network input dims must be positive");
    if (num_actions < 2) throw ConfigError("need at least two actions");
    if (multiplier < 1) throw ConfigError("multiplier must be >= 1");
    if (!(sigma0 >= 0.0)) throw ConfigError("sigma0 must be >= 0");
    if (hidden < 1) throw ConfigError("hidden width must be positive");
    if (pool_grid < 1) throw ConfigError("pool grid must be positive");
  }

  std::vector<int> stage_channels() const {
    return {16 * multiplier, 32 * multiplier, 32 * multiplier};
  }
};

template <typename S>
struct NoiseDrawT;

// One forward's worth of activations plus scratch.  Reused across steps;
// reallocated only when the batch size changes.
template <typename S>
struct QCacheT {
  struct Block {
    TensorT<S> r1, c1, r2, c2, out;
    TensorT<S> dr1, dc1, dr2, dout;
    TensorT<S> w1_eff, w2_eff;  // effective weights the forward actually used
    S sigma1 = S(1), sigma2 = S(1);
  };
  struct Stage {
    TensorT<S> conv_out, pool_out;
    TensorT<S> dconv_out, dpool_out;
    std::vector<int> pool_idx;
    Block blk[2];
    int h = 0, w = 0;  // post-pool extent
  };

  TensorT<S> input;
  Stage stage[3];
  TensorT<S> trunk_relu, dtrunk_relu;
  TensorT<S> apool, dapool;
  std::vector<int> apool_idx;
  TensorT<S> fc_z, fc_relu, dfc_z, dfc_relu;
  TensorT<S> v, adv, q, dv, dadv;
  TensorT<S> dx_v, dx_adv;  // head input grads before summing

  TensorT<S> ws_a_fc, ws_z_fc, ws_a_head, ws_z_head;
  std::vector<S> cols, dcols;

  // The draw the last forward used; must outlive any backward on this cache.
  const NoiseDrawT<S>* noise = nullptr;
  int batch = -1;
};

// Factorized Gaussian noise for the three noisy layers.  Empty tensors mean
// the zero-noise (deterministic) pass used for evaluation and targets.
template <typename S>
struct NoiseDrawT {
  TensorT<S> fc_in, fc_out, v_in, v_out, a_in, a_out;
  bool empty() const { return fc_in.size() == 0; }
};

template <typename S>
class QNetworkT {
 public:
  explicit QNetworkT(const NetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build(online_);
    build(target_);
    const auto ch = cfg_.stage_channels();
    flat_dim_ = ch[2] * cfg_.pool_grid * cfg_.pool_grid;
    for (const auto& name : sn_conv_names_) {
      sn_u_online_.emplace_back(std::vector<int>{conv_out_channels(name)});
      sn_u_target_.emplace_back(std::vector<int>{conv_out_channels(name)});
    }
  }

  const NetConfig& config() const { return cfg_; }
  ParamStoreT<S>& params() { return online_; }
  const ParamStoreT<S>& params() const { return online_; }
  ParamStoreT<S>& target_params() { return target_; }
  int64_t param_count() const { return online_.total_size(); }
  int flat_dim() const { return flat_dim_; }
  const std::vector<std::string>& sn_conv_names() const { return sn_conv_names_; }
  TensorT<S>& sn_u(size_t i) { return sn_u_online_[i]; }
  TensorT<S>& sn_u_target(size_t i) { return sn_u_target_[i]; }

  void init(Rng& rng) {
    for (size_t i = 0; i < online_.count(); ++i) {
      const std::string& name = online_.name_at(i);
      TensorT<S>& t = online_.value_at(i);
      if (name.ends_with(".w")) {
        // He-style uniform bound over the conv fan-in
        const int fan_in = t.dim(1) * t.dim(2) * t.dim(3);
        const double bound = std::sqrt(6.0 / fan_in);
        for (auto& x : t.v) x = static_cast<S>(rng.uniform(-bound, bound));
      } else if (name.ends_with(".b")) {
        t.zero();
      } else {
        // noisy layer parameters
        const int fan_in = fan_in_of(name);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        if (name.ends_with(".mu_w") || name.ends_with(".mu_b")) {
          for (auto& x : t.v) x = static_cast<S>(rng.uniform(-bound, bound));
        } else {
          t.fill(static_cast<S>(cfg_.sigma0 * bound));
        }
      }
    }
    for (auto& u : sn_u_online_) {
      double norm = 0.0;
      for (auto& x : u.v) {
        x = static_cast<S>(rng.normal());
        norm += static_cast<double>(x) * static_cast<double>(x);
      }
      norm = std::sqrt(std::max(norm, 1e-12));
      for (auto& x : u.v) x = static_cast<S>(x / norm);
    }
    sync_target();
  }

  void sync_target() {
    target_.copy_values_from(online_);
    sn_u_target_ = sn_u_online_;
  }

  NoiseDrawT<S> draw_noise(Rng& rng) const {
    NoiseDrawT<S> n;
    n.fc_in = noise_vec(rng, flat_dim_);
    n.fc_out = noise_vec(rng, cfg_.hidden);
    n.v_in = noise_vec(rng, cfg_.hidden);
    n.v_out = noise_vec(rng, 1);
    n.a_in = noise_vec(rng, cfg_.hidden);
    n.a_out = noise_vec(rng, cfg_.num_actions);
    return n;
  }

  // q gets shape N x A.  `noise` may be nullptr for the zero-noise pass.
  // `update_sn` advances the power-iteration vectors (online training
  // forwards only).  Target passes read target weights and target u.
  void forward(const TensorT<S>& x, const NoiseDrawT<S>* noise, bool use_target,
               bool update_sn, QCacheT<S>& c) {
    check_input(x);
    ParamStoreT<S>& p = use_target ? target_ : online_;
    auto& sn_u = use_target ? sn_u_target_ : sn_u_online_;
    ensure_cache(c, x.dim(0));
    c.input = x;

    const TensorT<S>* h = &c.input;
    for (int s = 0; s < 3; ++s) {
      auto& st = c.stage[s];
      conv3x3_forward(*h, p.value(entry_w(s)), p.value(entry_b(s)), st.conv_out, c.cols);
      maxpool3x3_forward(st.conv_out, st.pool_out, st.pool_idx);
      const TensorT<S>* bin = &st.pool_out;
      for (int b = 0; b < 2; ++b) {
        auto& blk = st.blk[b];
        relu_forward(*bin, blk.r1);
        run_block_conv(p, sn_u, s, b, 1, blk.r1, blk.c1, blk.w1_eff, blk.sigma1, update_sn,
                       c.cols);
        relu_forward(blk.c1, blk.r2);
        run_block_conv(p, sn_u, s, b, 2, blk.r2, blk.c2, blk.w2_eff, blk.sigma2, update_sn,
                       c.cols);
        for (size_t i = 0; i < blk.out.v.size(); ++i) blk.out.v[i] = bin->v[i] + blk.c2.v[i];
        bin = &blk.out;
      }
      h = bin;
    }

    relu_forward(*h, c.trunk_relu);
    c.apool.reshape({c.batch, cfg_.stage_channels()[2], cfg_.pool_grid, cfg_.pool_grid});
    adaptive_maxpool_forward(c.trunk_relu, cfg_.pool_grid, c.apool, c.apool_idx);
    c.apool.reshape({c.batch, flat_dim_});

    static const TensorT<S> kNoNoise;
    const NoiseDrawT<S>* nz = noise;
    noisy_dense_forward(c.apool, p.value("fc.mu_w"), p.value("fc.sg_w"), p.value("fc.mu_b"),
                        p.value("fc.sg_b"), nz ? nz->fc_in : kNoNoise,
                        nz ? nz->fc_out : kNoNoise, c.fc_z, c.ws_a_fc, c.ws_z_fc);
    relu_forward(c.fc_z, c.fc_relu);
    noisy_dense_forward(c.fc_relu, p.value("value.mu_w"), p.value("value.sg_w"),
                        p.value("value.mu_b"), p.value("value.sg_b"), nz ? nz->v_in : kNoNoise,
                        nz ? nz->v_out : kNoNoise, c.v, c.ws_a_head, c.ws_z_head);
    noisy_dense_forward(c.fc_relu, p.value("adv.mu_w"), p.value("adv.sg_w"),
                        p.value("adv.mu_b"), p.value("adv.sg_b"), nz ? nz->a_in : kNoNoise,
                        nz ? nz->a_out : kNoNoise, c.adv, c.ws_a_head, c.ws_z_head);
    dueling_forward(c.v, c.adv, c.q);
    c.noise = noise;
  }

  // Backpropagates dq through the last forward on this cache, accumulating
  // online parameter gradients.  The forward must have used online weights.
  void backward(const TensorT<S>& dq, QCacheT<S>& c) {
    ParamStoreT<S>& p = online_;
    const NoiseDrawT<S>* nz = c.noise;
    static const TensorT<S> kNoNoise;

    dueling_backward(dq, c.dv, c.dadv);
    noisy_dense_backward(c.fc_relu, p.value("value.mu_w"), p.value("value.sg_w"),
                         nz ? nz->v_in : kNoNoise, nz ? nz->v_out : kNoNoise, c.dv, &c.dx_v,
                         p.grad("value.mu_w"), p.grad("value.sg_w"), p.grad("value.mu_b"),
                         p.grad("value.sg_b"), c.ws_a_head, c.ws_z_head);
    noisy_dense_backward(c.fc_relu, p.value("adv.mu_w"), p.value("adv.sg_w"),
                         nz ? nz->a_in : kNoNoise, nz ? nz->a_out : kNoNoise, c.dadv,
                         &c.dx_adv, p.grad("adv.mu_w"), p.grad("adv.sg_w"),
                         p.grad("adv.mu_b"), p.grad("adv.sg_b"), c.ws_a_head, c.ws_z_head);
    for (size_t i = 0; i < c.dfc_relu.v.size(); ++i)
      c.dfc_relu.v[i] = c.dx_v.v[i] + c.dx_adv.v[i];
    relu_backward(c.fc_z, c.dfc_relu, c.dfc_z);
    noisy_dense_backward(c.apool, p.value("fc.mu_w"), p.value("fc.sg_w"),
                         nz ? nz->fc_in : kNoNoise, nz ? nz->fc_out : kNoNoise, c.dfc_z,
                         &c.dapool, p.grad("fc.mu_w"), p.grad("fc.sg_w"), p.grad("fc.mu_b"),
                         p.grad("fc.sg_b"), c.ws_a_fc, c.ws_z_fc);

    c.dapool.reshape({c.batch, cfg_.stage_channels()[2], cfg_.pool_grid, cfg_.pool_grid});
    adaptive_maxpool_backward(c.dapool, c.apool_idx, c.dtrunk_relu);
    c.dapool.reshape({c.batch, flat_dim_});

    const TensorT<S>* trunk_out = &c.stage[2].blk[1].out;
    // dtrunk_relu currently holds d(pool input); push through the trunk relu
    relu_backward(*trunk_out, c.dtrunk_relu, c.stage[2].blk[1].dout);

    for (int s = 2; s >= 0; --s) {
      auto& st = c.stage[s];
      for (int b = 1; b >= 0; --b) {
        auto& blk = st.blk[b];
        const TensorT<S>& bin = (b == 0) ? st.pool_out : st.blk[0].out;
        TensorT<S>& dbin = (b == 0) ? st.dpool_out : st.blk[0].dout;
        // out = bin + c2
        conv_backward_maybe_sn(p, s, b, 2, blk.r2, blk.w2_eff, blk.sigma2, blk.dout,
                               &blk.dr2, c);
        relu_backward(blk.c1, blk.dr2, blk.dc1);
        conv_backward_maybe_sn(p, s, b, 1, blk.r1, blk.w1_eff, blk.sigma1, blk.dc1,
                               &blk.dr1, c);
        relu_backward(bin, blk.dr1, dbin);
        for (size_t i = 0; i < dbin.v.size(); ++i) dbin.v[i] += blk.dout.v[i];  // skip path
      }
      maxpool3x3_backward(st.dpool_out, st.pool_idx, st.dconv_out);
      const TensorT<S>& sin = (s == 0) ? c.input : c.stage[s - 1].blk[1].out;
      TensorT<S>* dsin = (s == 0) ? nullptr : &c.stage[s - 1].blk[1].dout;
      conv3x3_backward(sin, p.value(entry_w(s)), st.dconv_out, dsin, p.grad(entry_w(s)),
                       p.grad(entry_b(s)), c.cols, c.dcols);
    }
  }

  // Greedy actions from a q matrix; ties break toward the lowest index.
  static std::vector<int> argmax_rows(const TensorT<S>& q) {
    const int n = q.dim(0), a = q.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int s = 0; s < n; ++s) {
      const S* row = q.data() + static_cast<size_t>(s) * a;
      int best = 0;
      for (int i = 1; i < a; ++i)
        if (row[i] > row[best]) best = i;
      out[static_cast<size_t>(s)] = best;
    }
    return out;
  }

  bool sn_active(int stage, int /*block*/) const {
    if (cfg_.sn == SnMode::none) return false;
    if (cfg_.sn == SnMode::all) return true;
    return stage == 2;  // last-stage residual convs only
  }

 private:
  static std::string entry_w(int s) { return "s" + std::to_string(s) + ".conv.w"; }
  static std::string entry_b(int s) { return "s" + std::to_string(s) + ".conv.b"; }
  static std::string blk_w(int s, int b, int k) {
    return "s" + std::to_string(s) + ".blk" + std::to_string(b) + ".c" + std::to_string(k) +
           ".w";
  }
  static std::string blk_b(int s, int b, int k) {
    return "s" + std::to_string(s) + ".blk" + std::to_string(b) + ".c" + std::to_string(k) +
           ".b";
  }

  void build(ParamStoreT<S>& p) {
    const auto ch = cfg_.stage_channels();
    int cin = cfg_.in_channels;
    for (int s = 0; s < 3; ++s) {
      p.add(entry_w(s), {ch[s], cin, 3, 3});
      p.add(entry_b(s), {ch[s]});
      for (int b = 0; b < 2; ++b) {
        for (int k = 1; k <= 2; ++k) {
          p.add(blk_w(s, b, k), {ch[s], ch[s], 3, 3});
          p.add(blk_b(s, b, k), {ch[s]});
          if (&p == &online_ && sn_active(s, b) && sn_index_.count(blk_w(s, b, k)) == 0) {
            sn_index_[blk_w(s, b, k)] = sn_conv_names_.size();
            sn_conv_names_.push_back(blk_w(s, b, k));
          }
        }
      }
      cin = ch[s];
    }
    const int flat = ch[2] * cfg_.pool_grid * cfg_.pool_grid;
    p.add("fc.mu_w", {cfg_.hidden, flat});
    p.add("fc.sg_w", {cfg_.hidden, flat});
    p.add("fc.mu_b", {cfg_.hidden});
    p.add("fc.sg_b", {cfg_.hidden});
    p.add("value.mu_w", {1, cfg_.hidden});
    p.add("value.sg_w", {1, cfg_.hidden});
    p.add("value.mu_b", {1});
    p.add("value.sg_b", {1});
    p.add("adv.mu_w", {cfg_.num_actions, cfg_.hidden});
    p.add("adv.sg_w", {cfg_.num_actions, cfg_.hidden});
    p.add("adv.mu_b", {cfg_.num_actions});
    p.add("adv.sg_b", {cfg_.num_actions});
  }

  int conv_out_channels(const std::string& name) const {
    return online_.value(name).dim(0);
  }

  int fan_in_of(const std::string& name) const {
    if (name.rfind("fc.", 0) == 0) return flat_dim_;
    return cfg_.hidden;  // both heads read the hidden layer
  }

  TensorT<S> noise_vec(Rng& rng, int n) const {
    TensorT<S> t({n});
    for (auto& x : t.v) {
      const double z = rng.normal();
      const double f = (z >= 0 ? 1.0 : -1.0) * std::sqrt(std::fabs(z));
      x = static_cast<S>(f);
    }
    return t;
  }

  void check_input(const TensorT<S>& x) const {
    if (x.rank() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.in_h ||
        x.dim(3) != cfg_.in_w)
      throw InputError("network input shape " + x.shape_str() + " does not match config");
  }

  void run_block_conv(ParamStoreT<S>& p, std::vector<TensorT<S>>& sn_u, int s, int b, int k,
                      const TensorT<S>& in, TensorT<S>& out, TensorT<S>& w_eff, S& sigma,
                      bool update_sn, std::vector<S>& cols) {
    const std::string wname = blk_w(s, b, k);
    const TensorT<S>& w = p.value(wname);
    const TensorT<S>& bias = p.value(blk_b(s, b, k));
    if (!sn_active(s, b)) {
      sigma = S(1);
      conv3x3_forward(in, w, bias, out, cols);
      return;
    }
    const size_t ui = sn_index_.at(wname);
    const int rows = w.dim(0), cls = w.dim(1) * 9;
    S sig;
    if (update_sn) {
      sig = power_iteration(w.data(), rows, cls, sn_u[ui].data(), 1);
    } else {
      TensorT<S> u_copy = sn_u[ui];
      sig = power_iteration(w.data(), rows, cls, u_copy.data(), 1);
    }
    sigma = sig > S(1e-8) ? sig : S(1);
    if (!w_eff.same_shape(w)) w_eff = w;
    for (size_t i = 0; i < w.v.size(); ++i) w_eff.v[i] = w.v[i] / sigma;
    conv3x3_forward(in, w_eff, bias, out, cols);
  }

  void conv_backward_maybe_sn(ParamStoreT<S>& p, int s, int b, int k, const TensorT<S>& in,
                              const TensorT<S>& w_eff, S sigma, const TensorT<S>& dy,
                              TensorT<S>* dx, QCacheT<S>& c) {
    const std::string wname = blk_w(s, b, k);
    TensorT<S>& dw = p.grad(wname);
    TensorT<S>& db = p.grad(blk_b(s, b, k));
    if (!sn_active(s, b)) {
      conv3x3_backward(in, p.value(wname), dy, dx, dw, db, c.cols, c.dcols);
      return;
    }
    // forward used w/sigma with sigma treated as a constant, so the weight
    // gradient is the effective-weight gradient scaled by 1/sigma
    TensorT<S> dw_eff(dw.shape);
    conv3x3_backward(in, w_eff, dy, dx, dw_eff, db, c.cols, c.dcols);
    for (size_t i = 0; i < dw.v.size(); ++i) dw.v[i] += dw_eff.v[i] / sigma;
  }

  void ensure_cache(QCacheT<S>& c, int batch) {
    if (c.batch == batch) return;
    const auto ch = cfg_.stage_channels();
    c.batch = batch;
    int h = cfg_.in_h, w = cfg_.in_w;
    for (int s = 0; s < 3; ++s) {
      auto& st = c.stage[s];
      st.conv_out = TensorT<S>({batch, ch[s], h, w});
      st.dconv_out = TensorT<S>({batch, ch[s], h, w});
      h = pooled_extent(h);
      w = pooled_extent(w);
      st.h = h;
      st.w = w;
      st.pool_out = TensorT<S>({batch, ch[s], h, w});
      st.dpool_out = TensorT<S>({batch, ch[s], h, w});
      for (int b = 0; b < 2; ++b) {
        auto& blk = st.blk[b];
        for (TensorT<S>* t : {&blk.r1, &blk.c1, &blk.r2, &blk.c2, &blk.out, &blk.dr1,
                              &blk.dc1, &blk.dr2, &blk.dout})
          *t = TensorT<S>({batch, ch[s], h, w});
      }
    }
    c.trunk_relu = TensorT<S>({batch, ch[2], h, w});
    c.dtrunk_relu = TensorT<S>({batch, ch[2], h, w});
    c.apool = TensorT<S>({batch, flat_dim_});
    c.dapool = TensorT<S>({batch, flat_dim_});
    c.fc_z = TensorT<S>({batch, cfg_.hidden});
    c.fc_relu = TensorT<S>({batch, cfg_.hidden});
    c.dfc_z = TensorT<S>({batch, cfg_.hidden});
    c.dfc_relu = TensorT<S>({batch, cfg_.hidden});
    c.v = TensorT<S>({batch, 1});
    c.dv = TensorT<S>({batch, 1});
    c.adv = TensorT<S>({batch, cfg_.num_actions});
    c.dadv = TensorT<S>({batch, cfg_.num_actions});
    c.q = TensorT<S>({batch, cfg_.num_actions});
    c.dx_v = TensorT<S>({batch, cfg_.hidden});
    c.dx_adv = TensorT<S>({batch, cfg_.hidden});
    c.ws_a_fc = TensorT<S>({batch, flat_dim_});
    c.ws_z_fc = TensorT<S>({batch, cfg_.hidden});
    c.ws_a_head = TensorT<S>({batch, cfg_.hidden});
    c.ws_z_head = TensorT<S>({batch, std::max(cfg_.num_actions, 1)});
  }

  NetConfig cfg_;
  ParamStoreT<S> online_, target_;
  std::vector<std::string> sn_conv_names_;
  std::unordered_map<std::string, size_t> sn_index_;
  std::vector<TensorT<S>> sn_u_online_, sn_u_target_;
  int flat_dim_ = 0;
};

using QNetwork = QNetworkT<float>;
using QCache = QCacheT<float>;
using NoiseDraw = NoiseDrawT<float>;

}  // namespace rainbowq
