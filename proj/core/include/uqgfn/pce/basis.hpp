#pragma once

#include <span>
#include <string_view>

namespace uqgfn::pce {

/// Orthonormal polynomial family. Hermite is orthonormal under N(0,1)
/// (probabilists' He_k / sqrt(k!)); Legendre under U(-1,1) (sqrt(2k+1) P_k).
enum class BasisFamily { kHermite, kLegendre };

std::string_view to_string(BasisFamily f);
BasisFamily basis_family_from_string(std::string_view name);

/// Value of the degree-k orthonormal polynomial at x (three-term recurrence).
double basis_eval(BasisFamily family, int k, double x);

/// out[k] = basis_eval(family, k, x) for k = 0..out.size()-1.
void basis_eval_all(BasisFamily family, double x, std::span<double> out);

}  // namespace uqgfn::pce
