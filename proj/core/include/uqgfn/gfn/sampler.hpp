#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <vector>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/gfn/trajectory.hpp"

namespace uqgfn::gfn {

struct ExplorationConfig {
  /// Probability of replacing the policy action with a uniform valid action.
  double epsilon = 0.0;
  /// Softmax temperature of the behaviour policy; <= 0 means greedy argmax.
  double temperature = 1.0;
};

/// max(floor, start * decay^episode).
double annealed_epsilon(std::size_t episode, double start = 0.5, double decay = 0.99, double floor = 0.1);

/// Temperature-scaled softmax of `logits` over the valid actions; masked entries are exactly 0.
Vector masked_policy(const Eigen::Ref<const Vector>& logits, const ActionMask& mask, double temperature = 1.0);

/// Draws one action under the exploration rule.
int sample_action(const Eigen::Ref<const Vector>& logits, const ActionMask& mask, const ExplorationConfig& explore,
                  Rng& rng);

/// Rolls out `count` trajectories in lockstep, one batched policy evaluation per step.
template <DiscreteEnvironment E, class Model>
std::vector<Trajectory<typename E::State>> sample_trajectories(const Model& model, const E& env, std::size_t count,
                                                              const ExplorationConfig& explore, Rng& rng) {
  using State = typename E::State;
  std::vector<Trajectory<State>> out(count);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < count; ++i) {
    out[i].states.push_back(env.initial_state(rng));
    if (!env.is_terminal(out[i].states.back())) active.push_back(i);
    else out[i].log_reward = env.log_reward(out[i].states.back());
  }
  std::vector<State> batch;
  while (!active.empty()) {
    batch.clear();
    for (std::size_t i : active) batch.push_back(out[i].states.back());
    const Matrix logits = model.predict(env, std::span<const State>(batch)).logits;
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      Trajectory<State>& traj = out[active[k]];
      ActionMask mask = env.valid_actions(batch[k]);
      const int a = sample_action(logits.col(static_cast<Eigen::Index>(k)), mask, explore, rng);
      State next = env.step(batch[k], a);
      traj.log_backward.push_back(env.log_backward(batch[k], next));
      traj.actions.push_back(a);
      traj.masks.push_back(std::move(mask));
      traj.states.push_back(std::move(next));
      if (env.is_terminal(traj.states.back())) traj.log_reward = env.log_reward(traj.states.back());
      else still.push_back(active[k]);
    }
    active.swap(still);
  }
  return out;
}

/// Forward policy (steps x actions) at each of `states`, masked and renormalised.
template <DiscreteEnvironment E, class Model>
Matrix extract_policies(const Model& model, const E& env, std::span<const typename E::State> states) {
  const Matrix logits = model.predict(env, states).logits;
  Matrix out(static_cast<Eigen::Index>(states.size()), logits.rows());
  for (std::size_t k = 0; k < states.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) =
        masked_policy(logits.col(static_cast<Eigen::Index>(k)), env.valid_actions(states[k])).transpose();
  return out;
}

template <DiscreteEnvironment E, class Model>
Vector extract_policy(const Model& model, const E& env, const typename E::State& state) {
  return extract_policies(model, env, std::span<const typename E::State>(&state, 1)).row(0).transpose();
}

/// Empirical distribution of key(terminal state) over `rollouts` on-policy samples
/// (epsilon 0, temperature 1). Returned as (key, frequency) pairs sorted by key.
template <DiscreteEnvironment E, class Model, class KeyFn>
auto terminating_distribution(const Model& model, const E& env, std::size_t rollouts, Rng& rng, KeyFn key,
                              std::size_t chunk = 1000) {
  using Key = std::decay_t<decltype(key(std::declval<const typename E::State&>()))>;
  if (rollouts == 0) throw UsageError("terminating_distribution needs at least one rollout");
  std::map<Key, double> counts;
  for (std::size_t done = 0; done < rollouts; done += chunk) {
    const std::size_t n = std::min(chunk, rollouts - done);
    for (const auto& traj : sample_trajectories(model, env, n, ExplorationConfig{}, rng))
      counts[key(traj.states.back())] += 1.0;
  }
  for (auto& [k, v] : counts) v /= static_cast<double>(rollouts);
  return counts;
}

}  // namespace uqgfn::gfn
