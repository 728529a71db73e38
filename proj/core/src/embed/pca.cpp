#include "uqgfn/embed/pca.hpp"

#include <Eigen/Eigenvalues>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/dense_net.hpp"

namespace uqgfn::embed {

PcaProjector PcaProjector::fit(const Matrix& rows, int components) {
  if (rows.rows() < 3) throw UsageError("PCA needs at least three rows");
  if (components < 1 || components > rows.cols()) throw UsageError("PCA component count out of range");
  if (!rows.allFinite()) throw NumericalError("PCA input contains non-finite values");
  PcaProjector p;
  p.mean_ = rows.colwise().mean().transpose();
  const Matrix centred = rows.rowwise() - p.mean_.transpose();
  const Matrix cov = centred.transpose() * centred / static_cast<double>(rows.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("PCA eigen-decomposition failed");
  p.eigenvalues_ = eig.eigenvalues().reverse();
  const Matrix vectors = eig.eigenvectors().rowwise().reverse();
  const double top = p.eigenvalues_(0);
  if (!(top > 0.0) || p.eigenvalues_(components - 1) <= 1e-12 * top)
    throw NumericalError("PCA input has fewer than " + std::to_string(components) + " non-degenerate directions");
  p.basis_ = vectors.leftCols(components);
  // Fix the sign so the largest-magnitude loading of each component is positive.
  for (int k = 0; k < components; ++k) {
    Eigen::Index i;
    p.basis_.col(k).cwiseAbs().maxCoeff(&i);
    if (p.basis_(i, k) < 0.0) p.basis_.col(k) *= -1.0;
  }
  const Matrix scores = centred * p.basis_;
  p.score_mean_ = scores.colwise().mean().transpose();
  p.score_variance_ = (scores.rowwise() - p.score_mean_.transpose()).array().square().colwise().mean().transpose();
  return p;
}

Vector PcaProjector::project(const Vector& v) const {
  if (v.size() != mean_.size()) throw UsageError("PCA projection: vector length mismatch");
  return basis_.transpose() * (v - mean_);
}

Matrix PcaProjector::project_rows(const Matrix& rows) const {
  if (rows.cols() != mean_.size()) throw UsageError("PCA projection: row length mismatch");
  return (rows.rowwise() - mean_.transpose()) * basis_;
}

Matrix PcaProjector::reconstruct_rows(const Matrix& scores) const {
  return (scores * basis_.transpose()).rowwise() + mean_.transpose();
}

nlohmann::json PcaProjector::to_json() const {
  return {{"type", "pca-projector"},
          {"mean", std::vector<double>(mean_.begin(), mean_.end())},
          {"basis", nn::matrix_to_json(basis_)},
          {"eigenvalues", std::vector<double>(eigenvalues_.begin(), eigenvalues_.end())},
          {"score_mean", std::vector<double>(score_mean_.begin(), score_mean_.end())},
          {"score_variance", std::vector<double>(score_variance_.begin(), score_variance_.end())}};
}

PcaProjector PcaProjector::from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "pca-projector") throw UsageError("not a pca-projector document");
  const auto vec = [&](const char* key) {
    const auto v = doc.at(key).get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  PcaProjector p;
  p.mean_ = vec("mean");
  p.basis_ = nn::matrix_from_json(doc.at("basis"));
  p.eigenvalues_ = vec("eigenvalues");
  p.score_mean_ = vec("score_mean");
  p.score_variance_ = vec("score_variance");
  if (p.basis_.rows() != p.mean_.size()) throw UsageError("pca-projector basis does not match its mean");
  return p;
}

}  // namespace uqgfn::embed
