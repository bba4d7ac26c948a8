#pragma once

// Layer primitives with hand-written backward passes.  Everything is
// templated on the scalar so the gradient checks can run the whole stack in
// double while production uses float.  Layout is NCHW row-major throughout;
// convs are 3x3 stride 1 pad 1 (the only kind the trunk uses).

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "rainbowq/errors.h"
#include "rainbowq/gemm.h"
#include "rainbowq/tensor.h"

namespace rainbowq {

// --- im2col -----------------------------------------------------------------

// cols is (C*9) x (H*W); row (c*3+kh)*3+kw holds x[c] shifted by (kh-1, kw-1).
template <typename S>
void im2col3x3(const S* x, int c_in, int h, int w, S* cols) {
  const int hw = h * w;
  for (int c = 0; c < c_in; ++c) {
    const S* xc = x + static_cast<size_t>(c) * hw;
    for (int kh = 0; kh < 3; ++kh) {
      for (int kw = 0; kw < 3; ++kw) {
        S* row = cols + static_cast<size_t>((c * 3 + kh) * 3 + kw) * hw;
        const int dh = kh - 1, dw = kw - 1;
        for (int i = 0; i < h; ++i) {
          S* dst = row + static_cast<size_t>(i) * w;
          const int si = i + dh;
          if (si < 0 || si >= h) {
            std::memset(dst, 0, sizeof(S) * static_cast<size_t>(w));
            continue;
          }
          const S* src = xc + static_cast<size_t>(si) * w + dw;
          const int j0 = std::max(0, -dw);
          const int j1 = std::min(w, w - dw);
          if (j0 > 0) dst[0] = S(0);
          if (j1 < w) dst[w - 1] = S(0);
          std::memcpy(dst + j0, src + j0, sizeof(S) * static_cast<size_t>(j1 - j0));
        }
      }
    }
  }
}

// Scatter-add of a cols matrix back onto the image (adjoint of im2col3x3).
template <typename S>
void col2im3x3(const S* cols, int c_in, int h, int w, S* x) {
  const int hw = h * w;
  for (int c = 0; c < c_in; ++c) {
    S* xc = x + static_cast<size_t>(c) * hw;
    for (int kh = 0; kh < 3; ++kh) {
      for (int kw = 0; kw < 3; ++kw) {
        const S* row = cols + static_cast<size_t>((c * 3 + kh) * 3 + kw) * hw;
        const int dh = kh - 1, dw = kw - 1;
        for (int i = 0; i < h; ++i) {
          const int si = i + dh;
          if (si < 0 || si >= h) continue;
          S* dst = xc + static_cast<size_t>(si) * w + dw;
          const S* src = row + static_cast<size_t>(i) * w;
          const int j0 = std::max(0, -dw);
          const int j1 = std::min(w, w - dw);
          for (int j = j0; j < j1; ++j) dst[j] += src[j];
        }
      }
    }
  }
}

// --- conv 3x3, stride 1, pad 1 ---------------------------------------------

// x: N x C x H x W, w: O x C x 3 x 3, b: O, y: N x O x H x W.
// cols_ws must hold (C*9) * (H*W) scalars.
template <typename S>
void conv3x3_forward(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                     TensorT<S>& y, std::vector<S>& cols_ws) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int o = w.dim(0);
  const int hw = h * wd;
  const int ck = c * 9;
  cols_ws.resize(static_cast<size_t>(ck) * hw);
  for (int s = 0; s < n; ++s) {
    const S* xs = x.data() + static_cast<size_t>(s) * c * hw;
    S* ys = y.data() + static_cast<size_t>(s) * o * hw;
    im2col3x3(xs, c, h, wd, cols_ws.data());
    gemm(w.data(), cols_ws.data(), ys, o, ck, hw);
    for (int oc = 0; oc < o; ++oc) {
      S* row = ys + static_cast<size_t>(oc) * hw;
      const S bias = b.data()[oc];
      for (int i = 0; i < hw; ++i) row[i] += bias;
    }
  }
}

// Accumulates dw/db; overwrites dx (pass nullptr to skip the input gradient).
// w_eff must be the same weight tensor the forward pass used.
template <typename S>
void conv3x3_backward(const TensorT<S>& x, const TensorT<S>& w_eff, const TensorT<S>& dy,
                      TensorT<S>* dx, TensorT<S>& dw, TensorT<S>& db,
                      std::vector<S>& cols_ws, std::vector<S>& dcols_ws) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int o = w_eff.dim(0);
  const int hw = h * wd;
  const int ck = c * 9;
  cols_ws.resize(static_cast<size_t>(ck) * hw);
  dcols_ws.resize(static_cast<size_t>(ck) * hw);
  if (dx) dx->zero();
  for (int s = 0; s < n; ++s) {
    const S* xs = x.data() + static_cast<size_t>(s) * c * hw;
    const S* dys = dy.data() + static_cast<size_t>(s) * o * hw;
    im2col3x3(xs, c, h, wd, cols_ws.data());
    // dW += dY * cols^T
    gemm_bt(dys, cols_ws.data(), dw.data(), o, hw, ck, /*accumulate=*/true);
    for (int oc = 0; oc < o; ++oc) {
      const S* row = dys + static_cast<size_t>(oc) * hw;
      S acc = S(0);
      for (int i = 0; i < hw; ++i) acc += row[i];
      db.data()[oc] += acc;
    }
    if (dx) {
      // dcols = W^T * dY, then scatter back onto the image
      gemm_at(w_eff.data(), dys, dcols_ws.data(), ck, o, hw);
      col2im3x3(dcols_ws.data(), c, h, wd,
                dx->data() + static_cast<size_t>(s) * c * hw);
    }
  }
}

// --- max pool 3x3, stride 2, pad 1 -----------------------------------------

inline int pooled_extent(int x) { return (x - 1) / 2 + 1; }

// idx caches the winning flat h*W+w input offset per output cell.
template <typename S>
void maxpool3x3_forward(const TensorT<S>& x, TensorT<S>& y, std::vector<int>& idx) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = pooled_extent(h), wo = pooled_extent(w);
  idx.resize(static_cast<size_t>(n) * c * ho * wo);
  size_t out_pos = 0;
  for (int s = 0; s < n; ++s) {
    for (int cc = 0; cc < c; ++cc) {
      const S* xc = x.data() + (static_cast<size_t>(s) * c + cc) * h * w;
      for (int i = 0; i < ho; ++i) {
        const int h0 = std::max(0, 2 * i - 1), h1 = std::min(h, 2 * i + 2);
        for (int j = 0; j < wo; ++j) {
          const int w0 = std::max(0, 2 * j - 1), w1 = std::min(w, 2 * j + 2);
          S best = xc[h0 * w + w0];
          int best_at = h0 * w + w0;
          for (int ii = h0; ii < h1; ++ii) {
            for (int jj = w0; jj < w1; ++jj) {
              const S v = xc[ii * w + jj];
              if (v > best) {
                best = v;
                best_at = ii * w + jj;
              }
            }
          }
          y.data()[out_pos] = best;
          idx[out_pos] = best_at;
          ++out_pos;
        }
      }
    }
  }
}

template <typename S>
void maxpool3x3_backward(const TensorT<S>& dy, const std::vector<int>& idx, TensorT<S>& dx) {
  dx.zero();
  const int n = dy.dim(0), c = dy.dim(1), ho = dy.dim(2), wo = dy.dim(3);
  const int h = dx.dim(2), w = dx.dim(3);
  size_t out_pos = 0;
  for (int s = 0; s < n; ++s) {
    for (int cc = 0; cc < c; ++cc) {
      S* xc = dx.data() + (static_cast<size_t>(s) * c + cc) * h * w;
      for (int i = 0; i < ho * wo; ++i, ++out_pos) xc[idx[out_pos]] += dy.data()[out_pos];
    }
  }
}

// --- adaptive max pool to a fixed grid -------------------------------------

// Window r of G over extent H spans [floor(r*H/G), ceil((r+1)*H/G)); inputs
// smaller than the grid repeat cells.
template <typename S>
void adaptive_maxpool_forward(const TensorT<S>& x, int grid, TensorT<S>& y,
                              std::vector<int>& idx) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  idx.resize(static_cast<size_t>(n) * c * grid * grid);
  size_t out_pos = 0;
  for (int s = 0; s < n; ++s) {
    for (int cc = 0; cc < c; ++cc) {
      const S* xc = x.data() + (static_cast<size_t>(s) * c + cc) * h * w;
      for (int i = 0; i < grid; ++i) {
        const int h0 = (i * h) / grid;
        const int h1 = ((i + 1) * h + grid - 1) / grid;
        for (int j = 0; j < grid; ++j) {
          const int w0 = (j * w) / grid;
          const int w1 = ((j + 1) * w + grid - 1) / grid;
          S best = xc[h0 * w + w0];
          int best_at = h0 * w + w0;
          for (int ii = h0; ii < h1; ++ii) {
            for (int jj = w0; jj < w1; ++jj) {
              const S v = xc[ii * w + jj];
              if (v > best) {
                best = v;
                best_at = ii * w + jj;
              }
            }
          }
          y.data()[out_pos] = best;
          idx[out_pos] = best_at;
          ++out_pos;
        }
      }
    }
  }
}

template <typename S>
void adaptive_maxpool_backward(const TensorT<S>& dy, const std::vector<int>& idx,
                               TensorT<S>& dx) {
  dx.zero();
  const int n = dy.dim(0), c = dy.dim(1), g2 = dy.dim(2) * dy.dim(3);
  const int h = dx.dim(2), w = dx.dim(3);
  size_t out_pos = 0;
  for (int s = 0; s < n; ++s) {
    for (int cc = 0; cc < c; ++cc) {
      S* xc = dx.data() + (static_cast<size_t>(s) * c + cc) * h * w;
      for (int i = 0; i < g2; ++i, ++out_pos) xc[idx[out_pos]] += dy.data()[out_pos];
    }
  }
}

// --- relu -------------------------------------------------------------------

template <typename S>
void relu_forward(const TensorT<S>& x, TensorT<S>& y) {
  for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > S(0) ? x.v[i] : S(0);
}

template <typename S>
void relu_backward(const TensorT<S>& x, const TensorT<S>& dy, TensorT<S>& dx) {
  for (size_t i = 0; i < x.size(); ++i) dx.v[i] = x.v[i] > S(0) ? dy.v[i] : S(0);
}

// --- noisy dense ------------------------------------------------------------

// Factorized noisy linear: W = mu_w + sg_w .* (eps_out eps_in^T),
// b = mu_b + sg_b .* eps_out.  Empty eps tensors mean zero noise.
// x: N x I, y: N x O.  ws_a holds x .* eps_in, ws_z the sigma-path product.
template <typename S>
void noisy_dense_forward(const TensorT<S>& x, const TensorT<S>& mu_w, const TensorT<S>& sg_w,
                         const TensorT<S>& mu_b, const TensorT<S>& sg_b,
                         const TensorT<S>& eps_in, const TensorT<S>& eps_out, TensorT<S>& y,
                         TensorT<S>& ws_a, TensorT<S>& ws_z) {
  const int n = x.dim(0), in = x.dim(1), out = mu_w.dim(0);
  const bool noisy = eps_in.size() > 0;
  gemm_bt(x.data(), mu_w.data(), y.data(), n, in, out);
  if (noisy) {
    for (int s = 0; s < n; ++s)
      for (int i = 0; i < in; ++i)
        ws_a.data()[static_cast<size_t>(s) * in + i] =
            x.data()[static_cast<size_t>(s) * in + i] * eps_in.data()[i];
    gemm_bt(ws_a.data(), sg_w.data(), ws_z.data(), n, in, out);
    for (int s = 0; s < n; ++s) {
      S* row = y.data() + static_cast<size_t>(s) * out;
      const S* zrow = ws_z.data() + static_cast<size_t>(s) * out;
      for (int o = 0; o < out; ++o)
        row[o] += zrow[o] * eps_out.data()[o] + mu_b.data()[o] +
                  sg_b.data()[o] * eps_out.data()[o];
    }
  } else {
    for (int s = 0; s < n; ++s) {
      S* row = y.data() + static_cast<size_t>(s) * out;
      for (int o = 0; o < out; ++o) row[o] += mu_b.data()[o];
    }
  }
}

// Accumulates parameter grads; overwrites dx (pass nullptr to skip).
template <typename S>
void noisy_dense_backward(const TensorT<S>& x, const TensorT<S>& mu_w, const TensorT<S>& sg_w,
                          const TensorT<S>& eps_in, const TensorT<S>& eps_out,
                          const TensorT<S>& dy, TensorT<S>* dx, TensorT<S>& dmu_w,
                          TensorT<S>& dsg_w, TensorT<S>& dmu_b, TensorT<S>& dsg_b,
                          TensorT<S>& ws_a, TensorT<S>& ws_dz) {
  const int n = x.dim(0), in = x.dim(1), out = mu_w.dim(0);
  const bool noisy = eps_in.size() > 0;
  gemm_at(dy.data(), x.data(), dmu_w.data(), out, n, in, /*accumulate=*/true);
  for (int s = 0; s < n; ++s) {
    const S* row = dy.data() + static_cast<size_t>(s) * out;
    for (int o = 0; o < out; ++o) dmu_b.data()[o] += row[o];
  }
  if (dx) gemm(dy.data(), mu_w.data(), dx->data(), n, out, in);
  if (noisy) {
    for (int s = 0; s < n; ++s) {
      const S* row = dy.data() + static_cast<size_t>(s) * out;
      S* dzrow = ws_dz.data() + static_cast<size_t>(s) * out;
      for (int o = 0; o < out; ++o) {
        const S dz = row[o] * eps_out.data()[o];
        dzrow[o] = dz;
        dsg_b.data()[o] += dz;
      }
    }
    for (int s = 0; s < n; ++s)
      for (int i = 0; i < in; ++i)
        ws_a.data()[static_cast<size_t>(s) * in + i] =
            x.data()[static_cast<size_t>(s) * in + i] * eps_in.data()[i];
    gemm_at(ws_dz.data(), ws_a.data(), dsg_w.data(), out, n, in, /*accumulate=*/true);
    if (dx) {
      // dx += (dz * sg_w) .* eps_in, reusing ws_a for the product
      gemm(ws_dz.data(), sg_w.data(), ws_a.data(), n, out, in);
      for (int s = 0; s < n; ++s)
        for (int i = 0; i < in; ++i)
          dx->data()[static_cast<size_t>(s) * in + i] +=
              ws_a.data()[static_cast<size_t>(s) * in + i] * eps_in.data()[i];
    }
  }
}

// --- dueling combine --------------------------------------------------------

// q = v + adv - mean_a(adv).  v: N x 1, adv: N x A, q: N x A.
template <typename S>
void dueling_forward(const TensorT<S>& v, const TensorT<S>& adv, TensorT<S>& q) {
  const int n = adv.dim(0), a = adv.dim(1);
  for (int s = 0; s < n; ++s) {
    const S* arow = adv.data() + static_cast<size_t>(s) * a;
    S mean = S(0);
    for (int i = 0; i < a; ++i) mean += arow[i];
    mean /= S(a);
    S* qrow = q.data() + static_cast<size_t>(s) * a;
    for (int i = 0; i < a; ++i) qrow[i] = v.data()[s] + arow[i] - mean;
  }
}

template <typename S>
void dueling_backward(const TensorT<S>& dq, TensorT<S>& dv, TensorT<S>& dadv) {
  const int n = dq.dim(0), a = dq.dim(1);
  for (int s = 0; s < n; ++s) {
    const S* row = dq.data() + static_cast<size_t>(s) * a;
    S sum = S(0);
    for (int i = 0; i < a; ++i) sum += row[i];
    dv.data()[s] = sum;
    const S mean = sum / S(a);
    S* drow = dadv.data() + static_cast<size_t>(s) * a;
    for (int i = 0; i < a; ++i) drow[i] = row[i] - mean;
  }
}

// --- spectral norm ----------------------------------------------------------

// Power iteration on a rows x cols matrix view.  Updates u in place and
// returns the current top-singular-value estimate u^T M v.  A (numerically)
// zero operator leaves u untouched, returns 0, and sets *degenerate.
template <typename S>
S power_iteration(const S* m, int rows, int cols, S* u, int iters,
                  bool* degenerate = nullptr) {
  if (iters < 1) throw InputError("power_iteration needs at least one iteration");
  std::vector<S> v(static_cast<size_t>(cols));
  std::vector<S> u_work(u, u + rows);
  ConstMatMap<S> M(m, rows, cols);
  VecMap<S> U(u_work.data(), rows);
  VecMap<S> V(v.data(), cols);
  if (degenerate) *degenerate = false;
  const S tiny = S(1e-12);
  for (int it = 0; it < iters; ++it) {
    V.noalias() = M.transpose() * U;
    const S nv = V.norm();
    if (!(nv > tiny)) {
      if (degenerate) *degenerate = true;
      return S(0);
    }
    V /= nv;
    U.noalias() = M * V;
    const S nu = U.norm();
    if (!(nu > tiny)) {
      if (degenerate) *degenerate = true;
      return S(0);
    }
    U /= nu;
  }
  std::copy(u_work.begin(), u_work.end(), u);
  return U.dot(M * V);
}

}  // namespace rainbowq
