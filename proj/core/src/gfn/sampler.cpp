#include "uqgfn/gfn/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace uqgfn::gfn {

double annealed_epsilon(std::size_t episode, double start, double decay, double floor) {
  return std::max(floor, start * std::pow(decay, static_cast<double>(episode)));
}

Vector masked_policy(const Eigen::Ref<const Vector>& logits, const ActionMask& mask, double temperature) {
  const Eigen::Index n = logits.size();
  if (static_cast<Eigen::Index>(mask.size()) != n) throw UsageError("mask size does not match the action count");
  Vector p = Vector::Zero(n);
  double hi = -std::numeric_limits<double>::infinity();
  Eigen::Index best = -1;
  for (Eigen::Index a = 0; a < n; ++a)
    if (mask[static_cast<std::size_t>(a)] && logits(a) > hi) {
      hi = logits(a);
      best = a;
    }
  if (best < 0) throw UsageError("no valid action in a non-terminal state");
  if (temperature <= 0.0) {
    p(best) = 1.0;
    return p;
  }
  for (Eigen::Index a = 0; a < n; ++a)
    if (mask[static_cast<std::size_t>(a)]) p(a) = std::exp((logits(a) - hi) / temperature);
  return p / p.sum();
}

int sample_action(const Eigen::Ref<const Vector>& logits, const ActionMask& mask, const ExplorationConfig& explore,
                  Rng& rng) {
  const bool uniform = explore.epsilon > 0.0 && uniform01(rng) < explore.epsilon;
  Vector p;
  if (uniform) {
    p = Vector::Zero(logits.size());
    for (Eigen::Index a = 0; a < logits.size(); ++a) p(a) = mask.at(static_cast<std::size_t>(a)) ? 1.0 : 0.0;
    if (p.sum() == 0.0) throw UsageError("no valid action in a non-terminal state");
    p /= p.sum();
  } else {
    p = masked_policy(logits, mask, explore.temperature);
  }
  const double u = uniform01(rng);
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p(a) <= 0.0) continue;
    acc += p(a);
    last = static_cast<int>(a);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace uqgfn::gfn
