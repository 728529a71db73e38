#include "uqgfn/embed/kl_expansion.hpp"

#include <cmath>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::embed {

double KlBasis::eigenvalue(int k) const {
  if (k < 1) throw UsageError("KL index starts at 1");
  const double w = (k - 0.5) * std::numbers::pi;
  return length * length / (w * w);
}

double KlBasis::eigenfunction(int k, double t) const {
  if (k < 1) throw UsageError("KL index starts at 1");
  return std::sqrt(2.0 / length) * std::sin((k - 0.5) * std::numbers::pi * t / length);
}

double trapezoid(std::span<const double> t, std::span<const double> f) {
  if (t.size() != f.size()) throw UsageError("trapezoid: abscissae and values differ in length");
  double s = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
  return s;
}

Vector kl_coefficients(const KlBasis& basis, std::span<const double> x, std::span<const double> f, int count,
                       double origin) {
  if (x.size() != f.size() || x.size() < 2) throw UsageError("KL projection needs matching grids of >= 2 points");
  std::vector<double> t(x.size()), prod(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) t[i] = x[i] - origin;
  Vector z(count);
  for (int k = 1; k <= count; ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) prod[i] = f[i] * basis.eigenfunction(k, t[i]);
    z(k - 1) = trapezoid(t, prod) / std::sqrt(basis.eigenvalue(k));
  }
  return z;
}

std::vector<double> kl_synthesise(const KlBasis& basis, std::span<const double> x, const Vector& z, double origin) {
  std::vector<double> f(x.size(), 0.0);
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double s = z(k) * std::sqrt(basis.eigenvalue(static_cast<int>(k) + 1));
    for (std::size_t i = 0; i < x.size(); ++i) f[i] += s * basis.eigenfunction(static_cast<int>(k) + 1, x[i] - origin);
  }
  return f;
}

KlProjector::KlProjector(std::vector<double> x, std::vector<double> mean, int components, double origin,
                         KlBasis basis)
    : x_(std::move(x)), mean_(std::move(mean)), components_(components), origin_(origin), basis_(basis) {
  if (x_.size() != mean_.size() || x_.size() < 2) throw UsageError("KL projector: grid and mean differ in length");
  if (components_ < 1) throw UsageError("KL projector needs at least one component");
}

KlProjector KlProjector::fit(std::vector<double> x, const std::vector<std::vector<double>>& samples, int components) {
  if (samples.empty()) throw UsageError("KL projector fit needs samples");
  std::vector<double> mean(x.size(), 0.0);
  for (const auto& s : samples) {
    if (s.size() != x.size()) throw UsageError("KL projector fit: sample length mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) mean[i] += s[i];
  }
  for (double& m : mean) m /= static_cast<double>(samples.size());
  const double origin = x.front();
  const double length = x.back() - x.front();
  return KlProjector(std::move(x), std::move(mean), components, origin, KlBasis{length});
}

Vector KlProjector::project(std::span<const double> values) const {
  if (values.size() != x_.size()) throw UsageError("KL projection: value length mismatch");
  std::vector<double> residual(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) residual[i] = values[i] - mean_[i];
  return kl_coefficients(basis_, x_, residual, components_, origin_);
}

nlohmann::json KlProjector::to_json() const {
  return {{"type", "kl-projector"}, {"x", x_},           {"mean", mean_},
          {"components", components_}, {"origin", origin_}, {"length", basis_.length}};
}

KlProjector KlProjector::from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "kl-projector") throw UsageError("not a kl-projector document");
  return KlProjector(doc.at("x").get<std::vector<double>>(), doc.at("mean").get<std::vector<double>>(),
                     doc.at("components").get<int>(), doc.at("origin").get<double>(),
                     KlBasis{doc.at("length").get<double>()});
}

}  // namespace uqgfn::embed
