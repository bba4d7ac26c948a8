#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rainbowq/errors.h"
#include "rainbowq/tensor.h"

namespace rainbowq {

// Named parameter tensors plus matching gradient buffers.  Registration
// order is load-bearing: optimizer state and serialization both follow it.
template <typename S>
class ParamStoreT {
 public:
  TensorT<S>& add(const std::string& name, const std::vector<int>& shape) {
    if (index_.count(name)) throw StateError("duplicate parameter: " + name);
    index_[name] = names_.size();
    names_.push_back(name);
    values_.emplace_back(shape);
    grads_.emplace_back(shape);
    return values_.back();
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  TensorT<S>& value(const std::string& name) { return values_[at(name)]; }
  const TensorT<S>& value(const std::string& name) const { return values_[at(name)]; }
  TensorT<S>& grad(const std::string& name) { return grads_[at(name)]; }
  const TensorT<S>& grad(const std::string& name) const { return grads_[at(name)]; }

  size_t count() const { return names_.size(); }
  const std::string& name_at(size_t i) const { return names_[i]; }
  TensorT<S>& value_at(size_t i) { return values_[i]; }
  const TensorT<S>& value_at(size_t i) const { return values_[i]; }
  TensorT<S>& grad_at(size_t i) { return grads_[i]; }
  const TensorT<S>& grad_at(size_t i) const { return grads_[i]; }

  void zero_grads() {
    for (auto& g : grads_) g.zero();
  }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& v : values_) n += static_cast<int64_t>(v.size());
    return n;
  }

  // Copies every value from another store with identical layout.
  void copy_values_from(const ParamStoreT& other) {
    if (other.count() != count()) throw StateError("parameter store layout mismatch");
    for (size_t i = 0; i < count(); ++i) {
      if (names_[i] != other.names_[i] || !values_[i].same_shape(other.values_[i]))
        throw StateError("parameter store layout mismatch at " + names_[i]);
      values_[i].v = other.values_[i].v;
    }
  }

 private:
  size_t at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw StateError("unknown parameter: " + name);
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<TensorT<S>> values_;
  std::vector<TensorT<S>> grads_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace rainbowq
