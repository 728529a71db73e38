#include "uqgfn/pce/pce_model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::pce {

namespace {

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Conjugate gradients on the SPD normal equations, one column at a time.
Matrix conjugate_gradient(const Matrix& a, const Matrix& b) {
  Matrix x = Matrix::Zero(a.cols(), b.cols());
  const int max_iter = static_cast<int>(10 * a.rows() + 100);
  for (Eigen::Index col = 0; col < b.cols(); ++col) {
    Vector xc = Vector::Zero(a.cols());
    Vector r = b.col(col);
    Vector p = r;
    double rs = r.squaredNorm();
    const double tol = 1e-24 * std::max(1.0, b.col(col).squaredNorm());
    for (int it = 0; it < max_iter && rs > tol; ++it) {
      const Vector ap = a * p;
      const double denom = p.dot(ap);
      if (!(denom > 0.0)) break;
      const double alpha = rs / denom;
      xc += alpha * p;
      r -= alpha * ap;
      const double rs_new = r.squaredNorm();
      p = r + (rs_new / rs) * p;
      rs = rs_new;
    }
    x.col(col) = xc;
  }
  return x;
}

}  // namespace

InputStandardisation InputStandardisation::identity(int dimension) {
  return {Vector::Zero(dimension), Vector::Ones(dimension)};
}

InputStandardisation InputStandardisation::gaussian_mle(const Matrix& inputs) {
  if (inputs.rows() < 1) throw UsageError("gaussian_mle: no inputs");
  InputStandardisation s;
  s.shift = inputs.colwise().mean().transpose();
  s.scale.resize(inputs.cols());
  for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
    const double var = (inputs.col(i).array() - s.shift(i)).square().mean();
    s.scale(i) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

InputStandardisation InputStandardisation::uniform_box(const Vector& lo, const Vector& hi) {
  if (lo.size() != hi.size()) throw UsageError("uniform_box: bound size mismatch");
  if (((hi - lo).array() <= 0.0).any()) throw UsageError("uniform_box: empty interval");
  return {0.5 * (lo + hi), 0.5 * (hi - lo)};
}

Vector InputStandardisation::apply(const Vector& x) const {
  if (x.size() != shift.size()) throw UsageError("standardisation: input dimension mismatch");
  return ((x - shift).array() / scale.array()).matrix();
}

Matrix InputStandardisation::apply_rows(const Matrix& inputs) const {
  if (inputs.cols() != shift.size()) throw UsageError("standardisation: input dimension mismatch");
  return ((inputs.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

nlohmann::json InputStandardisation::to_json() const {
  return {{"shift", vector_to_json(shift)}, {"scale", vector_to_json(scale)}};
}

InputStandardisation InputStandardisation::from_json(const nlohmann::json& doc) {
  InputStandardisation s{vector_from_json(doc.at("shift")), vector_from_json(doc.at("scale"))};
  if (s.shift.size() != s.scale.size()) throw UsageError("standardisation: size mismatch");
  return s;
}

Matrix design_matrix(const MultiIndexSet& indices, BasisFamily family, const Matrix& x) {
  const int m = indices.dimension();
  if (x.cols() != m) throw UsageError("design_matrix: input dimension mismatch");
  const Eigen::Index n = x.rows();
  const int d = indices.degree();
  Matrix phi(n, static_cast<Eigen::Index>(indices.size()));
  // psi(k, i * (d + 1) + deg) for every sample and input coordinate.
  std::vector<double> psi(static_cast<std::size_t>(m * (d + 1)));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int i = 0; i < m; ++i)
      basis_eval_all(family, x(k, i), std::span<double>(psi.data() + i * (d + 1), static_cast<std::size_t>(d + 1)));
    for (std::size_t j = 0; j < indices.size(); ++j) {
      const MultiIndex& idx = indices[j];
      double v = 1.0;
      for (int i = 0; i < m; ++i) v *= psi[static_cast<std::size_t>(i * (d + 1) + idx[static_cast<std::size_t>(i)])];
      phi(k, static_cast<Eigen::Index>(j)) = v;
    }
  }
  return phi;
}

RowVector design_row(const MultiIndexSet& indices, BasisFamily family, const Vector& x) {
  return design_matrix(indices, family, x.transpose());
}

PceModel::PceModel(BasisFamily family, MultiIndexSet indices, Vector coefficients,
                   InputStandardisation standardisation)
    : family_(family), indices_(std::move(indices)), coefficients_(std::move(coefficients)),
      standardisation_(std::move(standardisation)) {
  if (static_cast<std::size_t>(coefficients_.size()) != indices_.size())
    throw UsageError("PceModel: coefficient count does not match the index set");
  if (standardisation_.dimension() != indices_.dimension())
    throw UsageError("PceModel: standardisation dimension mismatch");
}

double PceModel::evaluate(const Vector& x) const {
  return design_row(indices_, family_, standardisation_.apply(x)).dot(coefficients_);
}

double PceModel::mean() const { return coefficients_.size() > 0 ? coefficients_(0) : 0.0; }

double PceModel::variance() const {
  double v = 0.0;
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    bool constant = true;
    for (int e : indices_[j]) constant = constant && e == 0;
    if (!constant) v += coefficients_(static_cast<Eigen::Index>(j)) * coefficients_(static_cast<Eigen::Index>(j));
  }
  return v;
}

nlohmann::json PceModel::to_json() const {
  return {{"basis", std::string(to_string(family_))},
          {"dimension", indices_.dimension()},
          {"degree", indices_.degree()},
          {"indices", indices_.indices()},
          {"coefficients", vector_to_json(coefficients_)},
          {"standardisation", standardisation_.to_json()}};
}

PceModel PceModel::from_json(const nlohmann::json& doc) {
  MultiIndexSet set(doc.at("dimension").get<int>(), doc.at("degree").get<int>(),
                    doc.at("indices").get<std::vector<MultiIndex>>());
  return {basis_family_from_string(doc.at("basis").get<std::string>()), std::move(set),
          vector_from_json(doc.at("coefficients")), InputStandardisation::from_json(doc.at("standardisation"))};
}

Matrix solve_ridge(const Matrix& design, const Matrix& outputs, double ridge) {
  if (design.rows() != outputs.rows()) throw UsageError("solve_ridge: row count mismatch");
  if (design.rows() < 1) throw UsageError("solve_ridge: no samples");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw UsageError("solve_ridge: ridge must be finite and >= 0");
  const Eigen::Index p = design.cols();
  Matrix gram = Matrix::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  gram.diagonal().array() += ridge;
  const Matrix rhs = design.transpose() * outputs;

  if (ridge == 0.0) {
    Eigen::LDLT<Matrix> ldlt(gram);
    const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
    if (!(rcond > 1e-14) || !ldlt.isPositive())
      throw NumericalError("normal equations are singular or ill-conditioned (rcond " + std::to_string(rcond) +
                           "); use a positive ridge penalty");
    return ldlt.solve(rhs);
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success) {
    Matrix c = llt.solve(rhs);
    if (c.allFinite()) return c;
  }
  Matrix c = conjugate_gradient(gram, rhs);
  if (!c.allFinite()) throw NumericalError("ridge solve produced non-finite coefficients");
  return c;
}

PceModel fit_ridge(const Matrix& inputs, const Vector& outputs, const RidgeOptions& options,
                   const InputStandardisation& standardisation) {
  if (inputs.rows() != outputs.size()) throw UsageError("fit_ridge: input/output count mismatch");
  MultiIndexSet set(static_cast<int>(inputs.cols()), options.degree);
  const Matrix phi = design_matrix(set, options.family, standardisation.apply_rows(inputs));
  Vector c = solve_ridge(phi, outputs, options.ridge).col(0);
  return {options.family, std::move(set), std::move(c), standardisation};
}

PceModel fit_ridge(const Matrix& inputs, const Vector& outputs, const RidgeOptions& options) {
  return fit_ridge(inputs, outputs, options, InputStandardisation::identity(static_cast<int>(inputs.cols())));
}

}  // namespace uqgfn::pce
