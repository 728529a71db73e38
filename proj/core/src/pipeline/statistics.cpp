#include "uqgfn/pipeline/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::pipeline {

namespace {

std::vector<double> sorted(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double log_normal_pdf(double x, double m, double var) {
  const double d = x - m;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

GaussianMixture finish(GaussianMixture g, std::size_t n) {
  const double params = 3.0 * g.components - 1.0;
  g.bic = -2.0 * g.log_likelihood + params * std::log(static_cast<double>(n));
  return g;
}

GaussianMixture em_two(const std::vector<double>& x, double m0, double m1, double var, double floor) {
  GaussianMixture g;
  g.components = 2;
  g.weights = {0.5, 0.5};
  g.means = {m0, m1};
  g.variances = {var, var};
  const std::size_t n = x.size();
  std::vector<double> r(n);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 500; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::log(g.weights[0]) + log_normal_pdf(x[i], g.means[0], g.variances[0]);
      const double b = std::log(g.weights[1]) + log_normal_pdf(x[i], g.means[1], g.variances[1]);
      const double lse = log_sum_exp(a, b);
      r[i] = std::exp(a - lse);
      ll += lse;
    }
    g.log_likelihood = ll;
    if (ll - previous < 1e-9 * std::max(1.0, std::abs(ll))) break;
    previous = ll;
    double w0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w0 += r[i];
      s0 += r[i] * x[i];
      s1 += (1.0 - r[i]) * x[i];
    }
    const double w1 = static_cast<double>(n) - w0;
    if (w0 < 1e-9 || w1 < 1e-9) break;
    g.means = {s0 / w0, s1 / w1};
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += r[i] * (x[i] - g.means[0]) * (x[i] - g.means[0]);
      v1 += (1.0 - r[i]) * (x[i] - g.means[1]) * (x[i] - g.means[1]);
    }
    g.variances = {std::max(v0 / w0, floor), std::max(v1 / w1, floor)};
    g.weights = {w0 / static_cast<double>(n), w1 / static_cast<double>(n)};
  }
  return g;
}

}  // namespace

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw UsageError("wasserstein1 needs non-empty samples");
  const auto x = sorted(a), y = sorted(b);
  const std::size_t n = x.size(), m = y.size();
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < n && j < m) {
    // Next breakpoint of the two quantile step functions: min((i+1)/n, (j+1)/m).
    const bool advance_i = (i + 1) * m <= (j + 1) * n;
    const bool advance_j = (j + 1) * n <= (i + 1) * m;
    const double next = advance_i ? static_cast<double>(i + 1) / static_cast<double>(n)
                                  : static_cast<double>(j + 1) / static_cast<double>(m);
    total += (next - u) * std::abs(x[i] - y[j]);
    u = next;
    if (advance_i) ++i;
    if (advance_j) ++j;
  }
  return total;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw UsageError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw UsageError("quantile level must lie in [0, 1]");
  const auto s = sorted(values);
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::array<double, 5> report_quantiles(std::span<const double> values) {
  std::array<double, 5> out{};
  for (std::size_t k = 0; k < kReportLevels.size(); ++k) out[k] = quantile(values, kReportLevels[k]);
  return out;
}

double variance(std::span<const double> values) {
  if (values.empty()) throw UsageError("variance of an empty sample");
  const double m = mean(values);
  double s = 0.0;
  for (double x : values) s += (x - m) * (x - m);
  return s / static_cast<double>(values.size());
}

GaussianMixture fit_gaussian_mixture(std::span<const double> values, int components, double relative_floor) {
  if (values.size() < 2) throw UsageError("mixture fit needs at least two values");
  if (components != 1 && components != 2) throw UsageError("only one- or two-component mixtures are supported");
  const auto x = sorted(values);
  const double var = variance(x);
  if (var == 0.0) throw NumericalError("mixture fit of a constant sample");
  const double floor = relative_floor * var;
  if (components == 1) {
    GaussianMixture g;
    g.weights = {1.0};
    g.means = {mean(x)};
    g.variances = {std::max(var, floor)};
    for (double v : x) g.log_likelihood += log_normal_pdf(v, g.means[0], g.variances[0]);
    return finish(g, x.size());
  }
  std::vector<std::pair<double, double>> starts{{quantile(x, 0.25), quantile(x, 0.75)},
                                                {quantile(x, 0.05), quantile(x, 0.95)}};
  std::size_t gap = 0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    if (x[i + 1] - x[i] > x[gap + 1] - x[gap]) gap = i;
  starts.emplace_back(mean(std::span(x).first(gap + 1)), mean(std::span(x).subspan(gap + 1)));
  GaussianMixture best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  for (const auto& [m0, m1] : starts) {
    GaussianMixture g = em_two(x, m0, m1, var, floor);
    if (g.log_likelihood > best.log_likelihood) best = g;
  }
  return finish(best, x.size());
}

int mode_count(std::span<const double> values) {
  if (values.size() < 3) return 1;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi - *lo <= 1e-12 * std::max({1.0, std::abs(*lo), std::abs(*hi)})) return 1;
  const auto one = fit_gaussian_mixture(values, 1);
  const auto two = fit_gaussian_mixture(values, 2);
  if (two.bic >= one.bic) return 1;
  const double separation = std::abs(two.means[0] - two.means[1]) *
                            std::sqrt(2.0 / (two.variances[0] + two.variances[1]));
  const double minor = std::min(two.weights[0], two.weights[1]);
  return separation >= kMinModeSeparation && minor >= kMinModeWeight ? 2 : 1;
}

}  // namespace uqgfn::pipeline
