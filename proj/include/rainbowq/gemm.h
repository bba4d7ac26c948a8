#pragma once

#include <Eigen/Core>

namespace rainbowq {

// Thin wrappers over Eigen for the few dense products the engine needs.
// All matrices are row-major float/double buffers owned by the caller.

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using VecMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;
template <typename S>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

// C = A(m x k) * B(k x n), optionally accumulating into C.
template <typename S>
inline void gemm(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false) {
  ConstMatMap<S> A(a, m, k);
  ConstMatMap<S> B(b, k, n);
  MatMap<S> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B;
  else
    C.noalias() = A * B;
}

// C = A^T(m x k) * B(k x n) where A is stored (k x m).
template <typename S>
inline void gemm_at(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false) {
  ConstMatMap<S> A(a, k, m);
  ConstMatMap<S> B(b, k, n);
  MatMap<S> C(c, m, n);
  if (accumulate)
    C.noalias() += A.transpose() * B;
  else
    C.noalias() = A.transpose() * B;
}

// C = A(m x k) * B^T(k x n) where B is stored (n x k).
template <typename S>
inline void gemm_bt(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false) {
  ConstMatMap<S> A(a, m, k);
  ConstMatMap<S> B(b, n, k);
  MatMap<S> C(c, m, n);
  if (accumulate)
    C.noalias() += A * B.transpose();
  else
    C.noalias() = A * B.transpose();
}

}  // namespace rainbowq
