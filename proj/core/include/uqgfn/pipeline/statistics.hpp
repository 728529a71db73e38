#pragma once

#include <array>
#include <span>
#include <vector>

namespace uqgfn::pipeline {

/// Exact 1-Wasserstein distance between two empirical distributions
/// (integral of the absolute quantile difference).
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Linearly interpolated quantile of `values` at level q in [0, 1].
double quantile(std::span<const double> values, double q);

inline constexpr std::array<double, 5> kReportLevels{0.05, 0.25, 0.50, 0.75, 0.95};
std::array<double, 5> report_quantiles(std::span<const double> values);

/// Population (1/n) variance.
double variance(std::span<const double> values);

struct GaussianMixture {
  int components = 1;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
  double log_likelihood = 0.0;
  double bic = 0.0;
};

/// Maximum-likelihood 1-D Gaussian mixture by EM from deterministic quantile
/// starts. Component variances are floored at `relative_floor` times the sample
/// variance so point masses stay finite.
GaussianMixture fit_gaussian_mixture(std::span<const double> values, int components,
                                     double relative_floor = 1e-3);

inline constexpr double kMinModeSeparation = 2.0;
inline constexpr double kMinModeWeight = 0.05;

/// 2 when a two-component mixture has the lower BIC and its components are
/// separated (|m1 - m2| sqrt(2 / (v1 + v2)) >= kMinModeSeparation, smaller weight
/// >= kMinModeWeight), otherwise 1. Constant samples count as one mode.
int mode_count(std::span<const double> values);

}  // namespace uqgfn::pipeline
