#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/common/rng.hpp"

namespace uqgfn::gfn {

/// Binary-indexed sum tree over a fixed number of non-negative weights.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity = 0);

  std::size_t capacity() const { return capacity_; }
  void set(std::size_t slot, double weight);
  double weight(std::size_t slot) const { return tree_[leaf_base_ + slot]; }
  double total() const { return tree_.empty() ? 0.0 : tree_[1]; }
  /// Slot whose cumulative weight interval contains u * total(), u in [0, 1).
  std::size_t find(double u) const;

 private:
  std::size_t capacity_ = 0;
  std::size_t leaf_base_ = 1;
  std::vector<double> tree_;
};

/// Fixed-capacity store sampled with probability proportional to each item's priority.
/// When full, the oldest item is replaced.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : tree_(capacity), items_(capacity) {
    if (capacity == 0) throw UsageError("replay buffer capacity must be positive");
  }

  std::size_t capacity() const { return tree_.capacity(); }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  void add(T item, double priority) {
    if (!(priority > 0.0) || !std::isfinite(priority)) throw UsageError("replay priority must be positive and finite");
    items_[next_] = std::move(item);
    tree_.set(next_, priority);
    next_ = (next_ + 1) % capacity();
    if (size_ < capacity()) ++size_;
  }

  const T& sample(Rng& rng) const {
    if (empty()) throw UsageError("sampling from an empty replay buffer");
    return *items_[tree_.find(uniform01(rng))];
  }

  double priority_of(std::size_t slot) const { return tree_.weight(slot); }
  const std::optional<T>& slot(std::size_t i) const { return items_[i]; }

 private:
  SumTree tree_;
  std::vector<std::optional<T>> items_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
};

}  // namespace uqgfn::gfn
