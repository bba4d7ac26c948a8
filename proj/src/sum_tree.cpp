#include "rainbowq/sum_tree.h"

#include <cmath>
#include <string>

#include "rainbowq/errors.h"

namespace rainbowq {

SumTree::SumTree(int64_t capacity) {
  if (capacity <= 0) throw ConfigError("sum tree capacity must be positive");
  leaf_count_ = 1;
  while (leaf_count_ < capacity) leaf_count_ <<= 1;
  leaf_base_ = leaf_count_;
  nodes_.assign(static_cast<size_t>(2 * leaf_count_), 0.0);
}

void SumTree::set(int64_t leaf, double priority) {
  if (leaf < 0 || leaf >= leaf_count_)
    throw InputError("sum tree leaf out of range: " + std::to_string(leaf));
  if (!(priority >= 0.0) || !std::isfinite(priority))
    throw InputError("sum tree priority must be finite and non-negative");
  int64_t i = leaf_base_ + leaf;
  nodes_[static_cast<size_t>(i)] = priority;
  for (i >>= 1; i >= 1; i >>= 1) {
    nodes_[static_cast<size_t>(i)] =
        nodes_[static_cast<size_t>(2 * i)] + nodes_[static_cast<size_t>(2 * i + 1)];
  }
}

double SumTree::get(int64_t leaf) const {
  if (leaf < 0 || leaf >= leaf_count_)
    throw InputError("sum tree leaf out of range: " + std::to_string(leaf));
  return nodes_[static_cast<size_t>(leaf_base_ + leaf)];
}

int64_t SumTree::prefix_sample(double u) const {
  if (!(u >= 0.0) || u >= total())
    throw InputError("prefix_sample target outside [0, total)");
  int64_t i = 1;
  while (i < leaf_base_) {
    const double left = nodes_[static_cast<size_t>(2 * i)];
    if (u < left) {
      i = 2 * i;
    } else {
      u -= left;
      i = 2 * i + 1;
    }
  }
  return i - leaf_base_;
}

double SumTree::rebuild_total() const {
  double s = 0.0;
  for (int64_t i = 0; i < leaf_count_; ++i) s += nodes_[static_cast<size_t>(leaf_base_ + i)];
  return s;
}

}  // namespace rainbowq
