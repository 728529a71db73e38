#pragma once

#include <nlohmann/json.hpp>

#include "uqgfn/common/linalg.hpp"
#include "uqgfn/pce/basis.hpp"
#include "uqgfn/pce/multi_index.hpp"

namespace uqgfn::pce {

/// Affine input map x -> (x - shift) / scale applied before basis evaluation.
struct InputStandardisation {
  Vector shift;
  Vector scale;

  static InputStandardisation identity(int dimension);
  /// Zero-mean / unit-variance map from the MLE Gaussian (independent components) of `inputs` (n x m).
  static InputStandardisation gaussian_mle(const Matrix& inputs);
  /// Maps per-dimension [lo, hi] onto [-1, 1].
  static InputStandardisation uniform_box(const Vector& lo, const Vector& hi);

  Vector apply(const Vector& x) const;
  Matrix apply_rows(const Matrix& inputs) const;
  int dimension() const { return static_cast<int>(shift.size()); }

  nlohmann::json to_json() const;
  static InputStandardisation from_json(const nlohmann::json& doc);
};

/// Rows Phi(k, j) = prod_i psi_{j_i}(x_{k,i}) for standardised inputs (n x m).
Matrix design_matrix(const MultiIndexSet& indices, BasisFamily family, const Matrix& standardised_inputs);
/// One design row for a single standardised input.
RowVector design_row(const MultiIndexSet& indices, BasisFamily family, const Vector& standardised_input);

/// Polynomial chaos expansion for one scalar output.
class PceModel {
 public:
  PceModel() = default;
  PceModel(BasisFamily family, MultiIndexSet indices, Vector coefficients, InputStandardisation standardisation);

  /// Evaluates at a raw (unstandardised) input.
  double evaluate(const Vector& x) const;

  BasisFamily family() const { return family_; }
  const MultiIndexSet& indices() const { return indices_; }
  const Vector& coefficients() const { return coefficients_; }
  const InputStandardisation& standardisation() const { return standardisation_; }

  /// Mean = c_0 and variance = sum_{j != 0} c_j^2 under the reference input law.
  double mean() const;
  double variance() const;

  nlohmann::json to_json() const;
  static PceModel from_json(const nlohmann::json& doc);

 private:
  BasisFamily family_ = BasisFamily::kHermite;
  MultiIndexSet indices_;
  Vector coefficients_;
  InputStandardisation standardisation_;
};

struct RidgeOptions {
  BasisFamily family = BasisFamily::kHermite;
  int degree = 1;
  double ridge = 1e-6;
};

/// Solves (Phi^T Phi + ridge I) C = Phi^T Y for every column of `outputs` (n x k)
/// with one factorisation. Throws NumericalError when ridge == 0 and the
/// normal equations are singular, and UsageError on bad shapes.
Matrix solve_ridge(const Matrix& design, const Matrix& outputs, double ridge);

/// Ridge-regression PCE fit on raw inputs (n x m); `standardisation` maps them to
/// the reference law of `options.family`.
PceModel fit_ridge(const Matrix& inputs, const Vector& outputs, const RidgeOptions& options,
                   const InputStandardisation& standardisation);
PceModel fit_ridge(const Matrix& inputs, const Vector& outputs, const RidgeOptions& options);

}  // namespace uqgfn::pce
