#pragma once

#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/gfn/sampler.hpp"
#include "uqgfn/gfn/trainer.hpp"
#include "uqgfn/nn/dense_net.hpp"

namespace uqgfn::gfn {

/// Fixed-horizon 2-D walk from the origin; the reward is read at the final position.
struct ContinuousTask {
  int steps = 5;
  std::function<double(double x, double y)> log_reward;
};

struct ContinuousTrajectory {
  Matrix positions;  // 2 x (steps + 1), column 0 is the origin
  double log_reward = 0.0;
};

/// Gaussian forward and backward step policies on (x, y, t) with a learned log Z.
/// Each head outputs (mean_x, log var_x, mean_y, log var_y); log-variances are
/// clamped to [log min_variance, log max_variance].
class ContinuousGfnModel {
 public:
  ContinuousGfnModel() = default;
  ContinuousGfnModel(const std::vector<int>& hidden, Rng& rng, double min_variance = 0.01, double max_variance = 1.0);

  double min_variance() const { return min_variance_; }
  double max_variance() const { return max_variance_; }

  /// (mean_x, var_x, mean_y, var_y) per column of encoded states (3 x B).
  Matrix forward_policy(const Matrix& encoded) const;
  Matrix backward_policy(const Matrix& encoded) const;

  /// log P_F and log P_B of every transition of `batch`, each 1 x (B * steps).
  std::pair<nn::Var, nn::Var> log_probabilities(nn::Tape& tape, std::span<const ContinuousTrajectory> batch);

  nn::Parameter& log_z() { return log_z_; }
  const nn::Parameter& log_z() const { return log_z_; }
  std::vector<nn::Parameter*> network_parameters();

  nlohmann::json to_json() const;
  static ContinuousGfnModel from_json(const nlohmann::json& doc);

 private:
  Matrix decode(const Matrix& raw) const;
  nn::Var log_density(nn::Tape& tape, nn::Var raw, const Matrix& delta) const;

  nn::DenseNet forward_;
  nn::DenseNet backward_;
  nn::Parameter log_z_{Matrix::Zero(1, 1)};
  double min_variance_ = 0.01;
  double max_variance_ = 1.0;
};

/// Encodes (x, y, t) columns for positions (2 x B) at step t.
Matrix encode_continuous(const Matrix& positions, int t);

/// Lockstep rollouts. With probability epsilon a step is drawn from N(0, I);
/// the temperature scales the policy variance.
std::vector<ContinuousTrajectory> sample_continuous(const ContinuousGfnModel& model, const ContinuousTask& task,
                                                    std::size_t count, const ExplorationConfig& explore, Rng& rng);

nn::Var continuous_trajectory_balance(nn::Tape& tape, ContinuousGfnModel& model,
                                      std::span<const ContinuousTrajectory> batch);

/// Trains with trajectory balance. Throws NumericalError on a non-finite loss.
TrainResult train_continuous(ContinuousGfnModel& model, const ContinuousTask& task, const TrainConfig& config,
                             Rng& rng);

/// Forward-policy parameters (steps x 4) at positions[:, 0 .. steps-1] of a path.
Matrix extract_continuous_policy(const ContinuousGfnModel& model, const Matrix& positions);

}  // namespace uqgfn::gfn
