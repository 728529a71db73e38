#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/tensor3.hpp"
#include "uqgfn/pce/logit.hpp"
#include "uqgfn/pce/pce_model.hpp"

namespace uqgfn::pce {

/// Discrete policies are probability vectors over actions. Gaussian policies use
/// the channel layout (mean_x, var_x, mean_y, var_y, ...): odd channels are variances.
enum class PolicyKind { kDiscrete, kGaussian };

std::string_view to_string(PolicyKind k);
PolicyKind policy_kind_from_string(std::string_view name);

struct PolicySurrogateOptions {
  RidgeOptions ridge{BasisFamily::kHermite, 7, 1e-6};
  double probability_clamp = kDefaultProbabilityClamp;
  DecodeRule decode = DecodeRule::kSigmoidRenormalise;
  double min_variance = 0.01;
  double max_variance = 1.0;
  /// Clamp every fitted output (logit / log-variance / mean) to its range over the training members.
  bool clamp_to_training_range = true;
};

/// One PCE per (step, channel) sharing a multi-index set and input standardisation.
/// Discrete channels are fitted on logits; Gaussian variances on log-variances.
class PolicySurrogate {
 public:
  PolicySurrogate() = default;

  PolicyKind kind() const { return kind_; }
  std::size_t steps() const { return steps_; }
  std::size_t channels() const { return channels_; }
  const PolicySurrogateOptions& options() const { return options_; }
  const InputStandardisation& standardisation() const { return standardisation_; }
  const MultiIndexSet& indices() const { return indices_; }
  /// |indices| x (steps * channels); column t * channels + c.
  const Matrix& coefficients() const { return coefficients_; }
  /// Channels whose training values were identically zero (masked actions).
  bool structural_zero(std::size_t step, std::size_t channel) const;

  /// The fitted model of one output channel (in fitting space: logit / log-variance / raw).
  PceModel channel_model(std::size_t step, std::size_t channel) const;

  /// Policy per step (steps x channels) at a raw latent input.
  Matrix sample(const Vector& latent) const;
  /// Policies at every row of `latents` (n x m) as an n x steps x channels tensor.
  Tensor3 sample_batch(const Matrix& latents) const;

  nlohmann::json to_json() const;
  static PolicySurrogate from_json(const nlohmann::json& doc);

 private:
  friend PolicySurrogate fit_policy_surrogate(const Matrix&, const Tensor3&, PolicyKind,
                                              const PolicySurrogateOptions&, const InputStandardisation&);
  Matrix decode_raw(const RowVector& raw) const;

  PolicyKind kind_ = PolicyKind::kDiscrete;
  std::size_t steps_ = 0;
  std::size_t channels_ = 0;
  PolicySurrogateOptions options_;
  InputStandardisation standardisation_;
  MultiIndexSet indices_;
  Matrix coefficients_;
  std::vector<std::uint8_t> structural_zero_;
  RowVector output_lo_;
  RowVector output_hi_;
};

/// Fits the per-(step, channel) expansions. `latents` is n x m and `policies`
/// is n x steps x channels.
PolicySurrogate fit_policy_surrogate(const Matrix& latents, const Tensor3& policies, PolicyKind kind,
                                     const PolicySurrogateOptions& options,
                                     const InputStandardisation& standardisation);

}  // namespace uqgfn::pce
