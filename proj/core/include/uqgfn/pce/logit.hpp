#pragma once

#include <span>
#include <string_view>

#include "uqgfn/common/linalg.hpp"

namespace uqgfn::pce {

inline constexpr double kDefaultProbabilityClamp = 1e-6;

/// log(p / (1 - p)) after clamping p to [clamp, 1 - clamp].
double logit(double p, double clamp = kDefaultProbabilityClamp);
double inverse_logit(double x);

/// How per-channel logits are turned back into one distribution.
enum class DecodeRule {
  /// Channel-wise inverse logit, then renormalise (exact inverse of logit on a distribution).
  kSigmoidRenormalise,
  /// Softmax over the channel logits.
  kSoftmax,
};

std::string_view to_string(DecodeRule r);
DecodeRule decode_rule_from_string(std::string_view name);

/// Decodes channel logits into probabilities. Channels with active[c] == 0 get exactly 0
/// and do not take part in the normalisation (empty = all active).
Vector decode_logits(const Vector& logits, DecodeRule rule, std::span<const std::uint8_t> active = {});

}  // namespace uqgfn::pce
