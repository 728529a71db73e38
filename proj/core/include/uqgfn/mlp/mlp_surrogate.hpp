#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/rng.hpp"
#include "uqgfn/common/tensor3.hpp"
#include "uqgfn/nn/dense_net.hpp"
#include "uqgfn/pce/pce_model.hpp"
#include "uqgfn/pce/policy_surrogate.hpp"

namespace uqgfn::mlp {

struct MlpSurrogateConfig {
  std::vector<int> hidden{64, 64};
  int epochs = 5000;
  double learning_rate = 1e-3;
  double min_variance = 0.01;
  double max_variance = 1.0;

  nlohmann::json to_json() const;
  static MlpSurrogateConfig from_json(const nlohmann::json& doc);
};

/// Feedforward map from a latent code to every (step, channel) policy output.
/// Discrete outputs are per-step softmax distributions over the channels that
/// are not structurally zero; Gaussian outputs use (mean, log-variance) pairs.
class MlpSurrogate {
 public:
  MlpSurrogate() = default;

  pce::PolicyKind kind() const { return kind_; }
  std::size_t steps() const { return steps_; }
  std::size_t channels() const { return channels_; }
  const pce::InputStandardisation& standardisation() const { return standardisation_; }
  nn::DenseNet& network() { return net_; }

  /// Policy per step (steps x channels) at a raw latent input.
  Matrix sample(const Vector& latent) const;
  Tensor3 sample_batch(const Matrix& latents) const;

  /// J(i, j) = d output_j / d latent_i with output j = t * channels + c of the decoded policy.
  Matrix jacobian(const Vector& latent) const;

  /// Batch-mean training loss on standardised inputs (m x n) and fitting-space targets.
  nn::Var loss(nn::Tape& tape, const Matrix& inputs, const Matrix& targets);

  nlohmann::json to_json() const;
  static MlpSurrogate from_json(const nlohmann::json& doc);

 private:
  friend MlpSurrogate train_mlp_surrogate(const Matrix&, const Tensor3&, pce::PolicyKind, const MlpSurrogateConfig&,
                                          const pce::InputStandardisation&, Rng&, std::vector<double>*);
  nn::Var decoded(nn::Tape& tape, nn::Var raw) const;

  pce::PolicyKind kind_ = pce::PolicyKind::kDiscrete;
  std::size_t steps_ = 0;
  std::size_t channels_ = 0;
  MlpSurrogateConfig config_;
  pce::InputStandardisation standardisation_;
  nn::DenseNet net_;
  std::vector<std::uint8_t> active_;  // steps * channels
};

/// Full-batch Adam training: per-step KL(empirical || surrogate) summed over steps for
/// discrete policies, squared error on (mean, log-variance) for Gaussian ones.
/// `loss_curve` receives the loss per epoch. Throws NumericalError on a non-finite loss.
MlpSurrogate train_mlp_surrogate(const Matrix& latents, const Tensor3& policies, pce::PolicyKind kind,
                                 const MlpSurrogateConfig& config, const pce::InputStandardisation& standardisation,
                                 Rng& rng, std::vector<double>* loss_curve = nullptr);

}  // namespace uqgfn::mlp
