#pragma once

#include <cstdint>
#include <vector>

#include "uqgfn/common/linalg.hpp"
#include "uqgfn/pce/pce_model.hpp"

namespace uqgfn::pce {

struct SobolIndices {
  Vector first_order;
  Vector total;
  double variance = 0.0;
  /// Set when the model has no variance; indices are then all zero.
  bool zero_variance = false;
};

/// Variance-based sensitivity indices read off the orthonormal coefficients.
SobolIndices sobol_indices(const PceModel& model);

/// Variance contribution of every non-empty input subset (bit mask over inputs),
/// i.e. the ANOVA partition of sum_{j != 0} c_j^2. Subsets with no terms are omitted.
std::vector<std::pair<std::uint32_t, double>> anova_partition(const PceModel& model);

}  // namespace uqgfn::pce
