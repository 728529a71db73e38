#pragma once

#include <numbers>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/linalg.hpp"

namespace uqgfn::embed {

/// Karhunen-Loeve eigenpairs of Brownian motion on [0, length].
struct KlBasis {
  double length = 3.0 * std::numbers::pi;

  /// k >= 1.
  double eigenvalue(int k) const;
  double eigenfunction(int k, double t) const;
};

/// Trapezoidal integral of samples f over the abscissae t.
double trapezoid(std::span<const double> t, std::span<const double> f);

/// Coefficients z_k = <f, phi_k> / sqrt(lambda_k), k = 1..count, with t = x - origin.
Vector kl_coefficients(const KlBasis& basis, std::span<const double> x, std::span<const double> f, int count,
                       double origin = std::numbers::pi);

/// sum_k z_k sqrt(lambda_k) phi_k(x - origin).
std::vector<double> kl_synthesise(const KlBasis& basis, std::span<const double> x, const Vector& z,
                                  double origin = std::numbers::pi);

/// Projects noisy functions onto the leading KL coordinates after removing a mean function.
class KlProjector {
 public:
  KlProjector() = default;
  KlProjector(std::vector<double> x, std::vector<double> mean, int components = 2,
              double origin = std::numbers::pi, KlBasis basis = {});

  /// Mean function taken pointwise over `samples` (each on the grid `x`).
  static KlProjector fit(std::vector<double> x, const std::vector<std::vector<double>>& samples, int components = 2);

  int components() const { return components_; }
  const std::vector<double>& grid() const { return x_; }
  const std::vector<double>& mean() const { return mean_; }

  Vector project(std::span<const double> values) const;

  nlohmann::json to_json() const;
  static KlProjector from_json(const nlohmann::json& doc);

 private:
  std::vector<double> x_;
  std::vector<double> mean_;
  int components_ = 2;
  double origin_ = std::numbers::pi;
  KlBasis basis_;
};

}  // namespace uqgfn::embed
