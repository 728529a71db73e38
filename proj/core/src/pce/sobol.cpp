#include "uqgfn/pce/sobol.hpp"

#include <map>

namespace uqgfn::pce {

namespace {

std::uint32_t support_mask(const MultiIndex& j) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < j.size(); ++i)
    if (j[i] > 0) m |= (1u << i);
  return m;
}

}  // namespace

std::vector<std::pair<std::uint32_t, double>> anova_partition(const PceModel& model) {
  std::map<std::uint32_t, double> parts;
  const auto& idx = model.indices();
  const Vector& c = model.coefficients();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::uint32_t m = support_mask(idx[k]);
    if (m == 0) continue;
    parts[m] += c(static_cast<Eigen::Index>(k)) * c(static_cast<Eigen::Index>(k));
  }
  return {parts.begin(), parts.end()};
}

SobolIndices sobol_indices(const PceModel& model) {
  const int m = model.indices().dimension();
  SobolIndices out;
  out.first_order = Vector::Zero(m);
  out.total = Vector::Zero(m);
  out.variance = model.variance();
  if (!(out.variance > 0.0)) {
    out.zero_variance = true;
    out.variance = 0.0;
    return out;
  }
  for (const auto& [mask, var] : anova_partition(model)) {
    for (int i = 0; i < m; ++i) {
      if (!(mask & (1u << i))) continue;
      out.total(i) += var;
      if (mask == (1u << i)) out.first_order(i) += var;
    }
  }
  out.first_order /= out.variance;
  out.total /= out.variance;
  return out;
}

}  // namespace uqgfn::pce
