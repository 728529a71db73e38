#include "uqgfn/pce/logit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::pce {

double logit(double p, double clamp) {
  const double q = std::clamp(p, clamp, 1.0 - clamp);
  return std::log(q) - std::log1p(-q);
}

double inverse_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string_view to_string(DecodeRule r) {
  return r == DecodeRule::kSoftmax ? "softmax" : "sigmoid-renormalise";
}

DecodeRule decode_rule_from_string(std::string_view name) {
  if (name == "softmax") return DecodeRule::kSoftmax;
  if (name == "sigmoid-renormalise") return DecodeRule::kSigmoidRenormalise;
  throw UsageError("unknown decode rule '" + std::string(name) + "'");
}

Vector decode_logits(const Vector& logits, DecodeRule rule, std::span<const std::uint8_t> active) {
  const Eigen::Index n = logits.size();
  if (!active.empty() && static_cast<Eigen::Index>(active.size()) != n)
    throw UsageError("decode_logits: mask size mismatch");
  auto on = [&](Eigen::Index c) { return active.empty() || active[static_cast<std::size_t>(c)] != 0; };
  Vector p = Vector::Zero(n);
  if (rule == DecodeRule::kSoftmax) {
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < n; ++c)
      if (on(c)) hi = std::max(hi, logits(c));
    if (!std::isfinite(hi)) throw NumericalError("decode_logits: no finite active channel");
    for (Eigen::Index c = 0; c < n; ++c)
      if (on(c)) p(c) = std::exp(logits(c) - hi);
  } else {
    for (Eigen::Index c = 0; c < n; ++c)
      if (on(c)) p(c) = inverse_logit(logits(c));
  }
  const double z = p.sum();
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("decode_logits: degenerate normaliser");
  return p / z;
}

}  // namespace uqgfn::pce
