#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rainbowq {

// Row-major dense tensor of up to 4 dimensions.  Value type, cheap to move.
template <typename S>
struct TensorT {
  std::vector<S> v;
  std::vector<int> shape;

  TensorT() = default;
  explicit TensorT(std::vector<int> sh) : shape(std::move(sh)) {
    v.assign(static_cast<size_t>(count(shape)), S(0));
  }

  static TensorT zeros(std::vector<int> sh) { return TensorT(std::move(sh)); }

  static int64_t count(const std::vector<int>& sh) {
    int64_t n = 1;
    for (int d : sh) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= d;
    }
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(v.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<size_t>(i)); }
  S* data() { return v.data(); }
  const S* data() const { return v.data(); }
  S& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
  const S& operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

  void fill(S x) { std::fill(v.begin(), v.end(), x); }
  void zero() { fill(S(0)); }

  // Same storage, new dims; element count must match.
  void reshape(std::vector<int> sh) {
    if (count(sh) != size()) throw std::invalid_argument("reshape element count mismatch");
    shape = std::move(sh);
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  template <typename T2>
  TensorT<T2> cast() const {
    TensorT<T2> out(shape);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T2>(v[i]);
    return out;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace rainbowq
