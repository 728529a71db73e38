#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/gfn/losses.hpp"
#include "uqgfn/gfn/replay_buffer.hpp"
#include "uqgfn/gfn/sampler.hpp"
#include "uqgfn/nn/adam.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::gfn {

enum class LossKind { kTrajectoryBalance, kSubTrajectoryBalance, kDetailedBalance };

std::string_view to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view name);

struct TrainConfig {
  LossKind loss = LossKind::kTrajectoryBalance;
  std::size_t episodes = 1000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double log_z_learning_rate = 1e-1;
  double epsilon_start = 0.5;
  double epsilon_decay = 0.99;
  double epsilon_floor = 0.1;
  double temperature = 1.0;
  /// 0 disables the replay buffer.
  std::size_t buffer_capacity = 0;
  /// Replayed trajectories added to each fresh batch once the buffer holds that many.
  std::size_t replay_batch = 0;
};

struct TrainResult {
  /// One batch loss per episode.
  std::vector<double> losses;
};

/// Writes the loss curve as CSV with columns episode, loss.
void write_loss_curve(const std::filesystem::path& path, const std::vector<double>& losses);

/// Batch loss of `trajectories` recorded on `tape` (one batched network evaluation).
template <DiscreteEnvironment E, class Model>
nn::Var batch_loss(nn::Tape& tape, Model& model, const E& env,
                   std::span<const Trajectory<typename E::State>* const> trajectories, LossKind kind) {
  using State = typename E::State;
  std::vector<State> states;
  std::vector<int> actions;
  std::vector<std::uint8_t> mask;
  BatchTerms terms;
  Matrix log_pb;
  std::size_t total = 0;
  for (const auto* t : trajectories) total += t->length();
  states.reserve(total);
  log_pb.resize(1, static_cast<Eigen::Index>(total));
  Eigen::Index k = 0;
  for (const auto* t : trajectories) {
    terms.lengths.push_back(static_cast<int>(t->length()));
    terms.log_reward.push_back(t->log_reward);
    for (std::size_t s = 0; s < t->length(); ++s) {
      states.push_back(t->states[s]);
      actions.push_back(t->actions[s]);
      mask.insert(mask.end(), t->masks[s].begin(), t->masks[s].end());
      log_pb(0, k++) = t->log_backward[s];
    }
  }
  auto h = model.heads(tape, env, std::span<const State>(states));
  terms.log_pf = nn::pick(nn::log_softmax(h.logits, mask), actions);
  terms.log_pb = tape.constant(std::move(log_pb));
  terms.log_flow = h.log_flow;
  switch (kind) {
    case LossKind::kTrajectoryBalance:
      terms.log_z = tape.parameter(model.log_z());
      return trajectory_balance(terms);
    case LossKind::kSubTrajectoryBalance: return subtrajectory_balance(terms);
    case LossKind::kDetailedBalance: return detailed_balance(terms);
  }
  throw UsageError("unknown loss kind");
}

/// Trains `model` on `env`. Throws NumericalError if the loss becomes non-finite.
template <DiscreteEnvironment E, class Model>
TrainResult train(Model& model, const E& env, const TrainConfig& config, Rng& rng) {
  using State = typename E::State;
  if (config.batch_size == 0) throw UsageError("batch size must be positive");
  if (config.loss != LossKind::kTrajectoryBalance && !model.has_flow_head())
    throw UsageError(std::string(to_string(config.loss)) + " needs a model with a state-flow head");
  nn::Adam opt;
  opt.add(model.network_parameters(), config.learning_rate);
  if (config.loss == LossKind::kTrajectoryBalance) opt.add(model.log_z(), config.log_z_learning_rate);
  std::optional<ReplayBuffer<Trajectory<State>>> buffer;
  if (config.buffer_capacity > 0) buffer.emplace(config.buffer_capacity);

  TrainResult result;
  result.losses.reserve(config.episodes);
  std::vector<const Trajectory<State>*> batch;
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const ExplorationConfig explore{
        annealed_epsilon(episode, config.epsilon_start, config.epsilon_decay, config.epsilon_floor),
        config.temperature};
    auto fresh = sample_trajectories(model, env, config.batch_size, explore, rng);
    batch.clear();
    for (const auto& t : fresh) batch.push_back(&t);
    std::vector<Trajectory<State>> replayed;
    if (buffer && config.replay_batch > 0 && buffer->size() >= config.replay_batch) {
      for (std::size_t r = 0; r < config.replay_batch; ++r) replayed.push_back(buffer->sample(rng));
      for (const auto& t : replayed) batch.push_back(&t);
    }
    if (buffer)
      for (const auto& t : fresh) buffer->add(t, std::exp(t.log_reward));

    nn::Tape tape;
    nn::Var loss = batch_loss(tape, model, env, std::span<const Trajectory<State>* const>(batch), config.loss);
    const double value = loss.scalar();
    if (!std::isfinite(value))
      throw NumericalError("training diverged at episode " + std::to_string(episode) + " (loss " +
                           std::to_string(value) + ")");
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    result.losses.push_back(value);
  }
  return result;
}

}  // namespace uqgfn::gfn
