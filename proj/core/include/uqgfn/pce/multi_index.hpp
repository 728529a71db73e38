#pragma once

#include <cstdint>
#include <vector>

namespace uqgfn::pce {

using MultiIndex = std::vector<int>;

/// Total-degree truncation {j in N^m : sum(j) <= d}, graded by total degree
/// and, within a degree, ordered with the first coordinate descending.
class MultiIndexSet {
 public:
  MultiIndexSet() = default;
  MultiIndexSet(int dimension, int degree);
  /// Adopts an explicit index list (e.g. from a checkpoint).
  MultiIndexSet(int dimension, int degree, std::vector<MultiIndex> indices);

  int dimension() const { return dimension_; }
  int degree() const { return degree_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& operator[](std::size_t k) const { return indices_[k]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  /// C(m + d, d).
  static std::uint64_t expected_size(int dimension, int degree);

 private:
  int dimension_ = 0;
  int degree_ = 0;
  std::vector<MultiIndex> indices_;
};

}  // namespace uqgfn::pce
