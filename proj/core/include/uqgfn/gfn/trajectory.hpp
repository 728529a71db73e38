#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "uqgfn/common/linalg.hpp"
#include "uqgfn/common/rng.hpp"

namespace uqgfn::gfn {

/// One byte per action: 1 = allowed.
using ActionMask = std::vector<std::uint8_t>;

template <class State>
struct Trajectory {
  std::vector<State> states;        // s_0 .. s_n, s_n terminal
  std::vector<int> actions;         // a_0 .. a_{n-1}
  std::vector<ActionMask> masks;    // valid actions at s_0 .. s_{n-1}
  std::vector<double> log_backward; // log P_B(s_t | s_{t+1}) for each transition
  double log_reward = 0.0;

  std::size_t length() const { return actions.size(); }
};

/// Environments whose transitions form a DAG over discrete actions. The reward
/// and the backward policy are fixed by the environment.
template <class E>
concept DiscreteEnvironment = requires(const E& env, const typename E::State& s, Rng& rng, int a) {
  { env.num_actions() } -> std::convertible_to<int>;
  { env.initial_state(rng) } -> std::same_as<typename E::State>;
  { env.valid_actions(s) } -> std::same_as<ActionMask>;
  { env.step(s, a) } -> std::same_as<typename E::State>;
  { env.is_terminal(s) } -> std::same_as<bool>;
  { env.log_reward(s) } -> std::same_as<double>;
  { env.log_backward(s, s) } -> std::same_as<double>;
};

/// States encoded as fixed-length feature columns.
template <class E>
concept VectorEncodedEnvironment =
    DiscreteEnvironment<E> && requires(const E& env, std::span<const typename E::State> states) {
      { env.encoding_size() } -> std::convertible_to<int>;
      { env.encode(states) } -> std::same_as<Matrix>;
    };

/// States encoded as token sequences.
template <class E>
concept TokenEncodedEnvironment = DiscreteEnvironment<E> && requires(const E& env, const typename E::State& s) {
  { env.vocabulary_size() } -> std::convertible_to<int>;
  { env.tokens(s) } -> std::same_as<std::vector<int>>;
};

}  // namespace uqgfn::gfn
