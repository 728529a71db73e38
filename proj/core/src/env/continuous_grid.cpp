#include "uqgfn/env/continuous_grid.hpp"

#include <cmath>
#include <numbers>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::env {

namespace {

Vector vector_from(const nlohmann::json& doc) {
  const auto v = doc.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json vector_to(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

double ContinuousRewardSpec::density(double x, double y) const {
  const double norm = 1.0 / (2.0 * std::numbers::pi * variance);
  double total = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double dx = x - means(2 * k), dy = y - means(2 * k + 1);
    total += 0.5 * norm * std::exp(-(dx * dx + dy * dy) / (2.0 * variance));
  }
  return total;
}

double ContinuousRewardSpec::log_reward(double x, double y) const {
  return std::log(density(x, y) + kContinuousRewardFloor);
}

nlohmann::json ContinuousRewardSpec::to_json() const { return {{"means", vector_to(means)}, {"variance", variance}}; }

ContinuousRewardSpec ContinuousRewardSpec::from_json(const nlohmann::json& doc) {
  ContinuousRewardSpec s{vector_from(doc.at("means")), doc.at("variance").get<double>()};
  if (s.means.size() != 4 || !(s.variance > 0.0)) throw UsageError("continuous reward needs 4 means and a positive variance");
  return s;
}

nlohmann::json ContinuousRewardConfig::to_json() const {
  return {{"centre1", vector_to(centre1)}, {"centre2", vector_to(centre2)}, {"mean_variance", mean_variance},
          {"variance", variance},          {"steps", steps}};
}

ContinuousRewardConfig ContinuousRewardConfig::from_json(const nlohmann::json& doc) {
  ContinuousRewardConfig c;
  if (doc.contains("centre1")) c.centre1 = vector_from(doc.at("centre1"));
  if (doc.contains("centre2")) c.centre2 = vector_from(doc.at("centre2"));
  c.mean_variance = doc.value("mean_variance", c.mean_variance);
  c.variance = doc.value("variance", c.variance);
  c.steps = doc.value("steps", c.steps);
  if (c.centre1.size() != 2 || c.centre2.size() != 2) throw UsageError("mode centres must be 2-D");
  if (!(c.variance > 0.0) || c.mean_variance < 0.0 || c.steps < 1) throw UsageError("invalid continuous reward config");
  return c;
}

ContinuousRewardSpec sample_continuous_spec(const ContinuousRewardConfig& config, Rng& rng) {
  ContinuousRewardSpec s;
  s.variance = config.variance;
  const double sd = std::sqrt(config.mean_variance);
  for (int d = 0; d < 2; ++d) s.means(d) = config.centre1(d) + sd * standard_normal(rng);
  for (int d = 0; d < 2; ++d) s.means(2 + d) = config.centre2(d) + sd * standard_normal(rng);
  return s;
}

gfn::ContinuousTask make_continuous_task(const ContinuousRewardSpec& spec, int steps) {
  return {steps, [spec](double x, double y) { return spec.log_reward(x, y); }};
}

}  // namespace uqgfn::env
