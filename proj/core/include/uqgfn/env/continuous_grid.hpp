#pragma once

#include <nlohmann/json.hpp>

#include "uqgfn/common/linalg.hpp"
#include "uqgfn/common/rng.hpp"
#include "uqgfn/gfn/continuous.hpp"

namespace uqgfn::env {

inline constexpr double kContinuousRewardFloor = 1e-12;

/// Equal-weight mixture of two isotropic Gaussians on the plane.
struct ContinuousRewardSpec {
  Vector means = Vector::Zero(4);  // (x1, y1, x2, y2)
  double variance = 0.3;

  double density(double x, double y) const;
  /// log(density + floor).
  double log_reward(double x, double y) const;
  /// The latent code of this reward is the mean vector itself.
  const Vector& latent() const { return means; }

  nlohmann::json to_json() const;
  static ContinuousRewardSpec from_json(const nlohmann::json& doc);
};

struct ContinuousRewardConfig {
  Vector centre1 = (Vector(2) << -1.0, -1.0).finished();
  Vector centre2 = (Vector(2) << 1.0, 1.0).finished();
  /// Variance of each mode's location around its centre.
  double mean_variance = 0.1;
  double variance = 0.3;
  int steps = 5;

  nlohmann::json to_json() const;
  static ContinuousRewardConfig from_json(const nlohmann::json& doc);
};

ContinuousRewardSpec sample_continuous_spec(const ContinuousRewardConfig& config, Rng& rng);

gfn::ContinuousTask make_continuous_task(const ContinuousRewardSpec& spec, int steps = 5);

}  // namespace uqgfn::env
