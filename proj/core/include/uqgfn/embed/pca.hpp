#pragma once

#include <nlohmann/json.hpp>

#include "uqgfn/common/linalg.hpp"

namespace uqgfn::embed {

/// Principal-component projection with per-component MLE Gaussian fits of the training scores.
class PcaProjector {
 public:
  PcaProjector() = default;

  /// `rows` is n x p. Throws UsageError for n < 3 and NumericalError when the
  /// data have fewer than `components` non-degenerate directions.
  static PcaProjector fit(const Matrix& rows, int components = 2);

  int components() const { return static_cast<int>(basis_.cols()); }
  const Vector& mean() const { return mean_; }
  /// p x k orthonormal columns.
  const Matrix& basis() const { return basis_; }
  /// All eigenvalues of the MLE covariance, descending.
  const Vector& explained_variance() const { return eigenvalues_; }
  const Vector& score_mean() const { return score_mean_; }
  const Vector& score_variance() const { return score_variance_; }

  Vector project(const Vector& v) const;
  /// n x k scores of n x p rows.
  Matrix project_rows(const Matrix& rows) const;
  Matrix reconstruct_rows(const Matrix& scores) const;

  nlohmann::json to_json() const;
  static PcaProjector from_json(const nlohmann::json& doc);

 private:
  Vector mean_;
  Matrix basis_;
  Vector eigenvalues_;
  Vector score_mean_;
  Vector score_variance_;
};

}  // namespace uqgfn::embed
