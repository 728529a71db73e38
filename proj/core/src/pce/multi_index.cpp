#include "uqgfn/pce/multi_index.hpp"

#include <functional>
#include <numeric>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::pce {

MultiIndexSet::MultiIndexSet(int dimension, int degree) : dimension_(dimension), degree_(degree) {
  if (dimension < 1) throw UsageError("multi-index dimension must be >= 1");
  if (degree < 0) throw UsageError("multi-index degree must be >= 0");
  MultiIndex current(static_cast<std::size_t>(dimension), 0);
  // Compositions of `remaining` into coordinates pos..m-1, first coordinate descending.
  std::function<void(std::size_t, int)> fill = [&](std::size_t pos, int remaining) {
    if (pos + 1 == current.size()) {
      current[pos] = remaining;
      indices_.push_back(current);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      current[pos] = v;
      fill(pos + 1, remaining - v);
    }
  };
  for (int total = 0; total <= degree; ++total) fill(0, total);
}

MultiIndexSet::MultiIndexSet(int dimension, int degree, std::vector<MultiIndex> indices)
    : dimension_(dimension), degree_(degree), indices_(std::move(indices)) {
  for (const auto& j : indices_) {
    if (static_cast<int>(j.size()) != dimension_) throw UsageError("multi-index has the wrong dimension");
    if (std::accumulate(j.begin(), j.end(), 0) > degree_) throw UsageError("multi-index exceeds the degree");
  }
}

std::uint64_t MultiIndexSet::expected_size(int dimension, int degree) {
  // C(m + d, d) built incrementally; each partial product is itself a binomial coefficient.
  std::uint64_t c = 1;
  for (int k = 1; k <= degree; ++k)
    c = c * static_cast<std::uint64_t>(dimension + k) / static_cast<std::uint64_t>(k);
  return c;
}

}  // namespace uqgfn::pce
