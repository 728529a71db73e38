#include "uqgfn/pce/basis.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::pce {

std::string_view to_string(BasisFamily f) {
  return f == BasisFamily::kHermite ? "hermite" : "legendre";
}

BasisFamily basis_family_from_string(std::string_view name) {
  if (name == "hermite") return BasisFamily::kHermite;
  if (name == "legendre") return BasisFamily::kLegendre;
  throw UsageError("unknown basis family '" + std::string(name) + "'");
}

void basis_eval_all(BasisFamily family, double x, std::span<double> out) {
  const std::size_t n = out.size();
  if (n == 0) return;
  if (family == BasisFamily::kHermite) {
    // psi_{k+1} = (x psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1)
    out[0] = 1.0;
    if (n > 1) out[1] = x;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double kd = static_cast<double>(k);
      out[k + 1] = (x * out[k] - std::sqrt(kd) * out[k - 1]) / std::sqrt(kd + 1.0);
    }
    return;
  }
  // Legendre: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}; orthonormal under U(-1,1) as sqrt(2k+1) P_k.
  double prev = 1.0;
  double cur = x;
  out[0] = 1.0;
  if (n > 1) out[1] = std::sqrt(3.0) * x;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double kd = static_cast<double>(k);
    const double next = ((2.0 * kd + 1.0) * x * cur - kd * prev) / (kd + 1.0);
    prev = cur;
    cur = next;
    out[k + 1] = std::sqrt(2.0 * (kd + 1.0) + 1.0) * cur;
  }
}

double basis_eval(BasisFamily family, int k, double x) {
  if (k < 0) throw UsageError("basis degree must be non-negative");
  std::vector<double> buf(static_cast<std::size_t>(k) + 1);
  basis_eval_all(family, x, buf);
  return buf.back();
}

}  // namespace uqgfn::pce
