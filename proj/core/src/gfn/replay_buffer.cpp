#include "uqgfn/gfn/replay_buffer.hpp"

namespace uqgfn::gfn {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity) {
  while (leaf_base_ < capacity_) leaf_base_ <<= 1;
  tree_.assign(2 * leaf_base_, 0.0);
}

void SumTree::set(std::size_t slot, double weight) {
  if (slot >= capacity_) throw UsageError("SumTree::set: slot out of range");
  std::size_t i = leaf_base_ + slot;
  tree_[i] = weight;
  for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

std::size_t SumTree::find(double u) const {
  if (!(total() > 0.0)) throw UsageError("SumTree::find on an empty tree");
  double target = u * total();
  std::size_t i = 1;
  while (i < leaf_base_) {
    const double left = tree_[2 * i];
    if (target < left || tree_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      target -= left;
      i = 2 * i + 1;
    }
  }
  return i - leaf_base_;
}

}  // namespace uqgfn::gfn
