#pragma once

#include <cstdint>
#include <vector>

namespace rainbowq {

// Complete binary tree of priority partial sums over a power-of-two leaf
// array.  Leaf i lives at nodes_[leaf_base_ + i]; node k has children 2k and
// 2k+1; nodes_[1] is the root.  Parent sums are recomputed (not delta
// updated) on every set so internal nodes stay exactly left + right.
class SumTree {
 public:
  // Capacity is rounded up to the next power of two.
  explicit SumTree(int64_t capacity);

  int64_t capacity() const { return leaf_count_; }

  void set(int64_t leaf, double priority);
  double get(int64_t leaf) const;
  double total() const { return nodes_[1]; }

  // Index of the unique leaf with cumsum(p_0..p_{i-1}) <= u < cumsum(p_0..p_i).
  // Throws InputError for u outside [0, total()).
  int64_t prefix_sample(double u) const;

  // Linear re-summation of the leaves, for consistency checks.
  double rebuild_total() const;

  int64_t node_count() const { return static_cast<int64_t>(nodes_.size()); }
  double node(int64_t heap_index) const { return nodes_[static_cast<size_t>(heap_index)]; }
  int64_t leaf_base() const { return leaf_base_; }

 private:
  int64_t leaf_count_ = 0;
  int64_t leaf_base_ = 0;
  std::vector<double> nodes_;
};

}  // namespace rainbowq
