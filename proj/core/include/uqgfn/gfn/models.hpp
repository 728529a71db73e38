#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/gfn/trajectory.hpp"
#include "uqgfn/nn/dense_net.hpp"
#include "uqgfn/nn/recurrent_encoder.hpp"

namespace uqgfn::gfn {

/// Policy logits (actions x B) and, with a flow head, log F(s) (1 x B).
struct HeadVars {
  nn::Var logits;
  nn::Var log_flow;
};

struct HeadValues {
  Matrix logits;
  Matrix log_flow;  // empty without a flow head
};

/// Feedforward forward-policy network with an optional state-flow output and a learned log Z.
class MlpGfnModel {
 public:
  MlpGfnModel() = default;
  MlpGfnModel(int input_dim, int num_actions, const std::vector<int>& hidden, bool flow_head, Rng& rng);

  int num_actions() const { return num_actions_; }
  bool has_flow_head() const { return flow_head_; }

  HeadVars heads(nn::Tape& tape, const Matrix& features);
  HeadValues predict(const Matrix& features) const;

  template <VectorEncodedEnvironment E>
  HeadVars heads(nn::Tape& tape, const E& env, std::span<const typename E::State> states) {
    return heads(tape, env.encode(states));
  }
  template <VectorEncodedEnvironment E>
  HeadValues predict(const E& env, std::span<const typename E::State> states) const {
    return predict(env.encode(states));
  }

  nn::Parameter& log_z() { return log_z_; }
  const nn::Parameter& log_z() const { return log_z_; }
  nn::DenseNet& network() { return net_; }
  std::vector<nn::Parameter*> network_parameters() { return net_.parameters(); }
  std::vector<nn::Parameter*> parameters();

  nlohmann::json to_json() const;
  static MlpGfnModel from_json(const nlohmann::json& doc);

 private:
  nn::DenseNet net_;
  int num_actions_ = 0;
  bool flow_head_ = false;
  nn::Parameter log_z_{Matrix::Zero(1, 1)};
};

/// Recurrent encoder over the state's token sequence followed by a feedforward head.
class RecurrentGfnModel {
 public:
  RecurrentGfnModel() = default;
  RecurrentGfnModel(int vocab_size, int embed_dim, int hidden_dim, const std::vector<int>& head_hidden,
                    int num_actions, bool flow_head, Rng& rng);

  int num_actions() const { return num_actions_; }
  bool has_flow_head() const { return flow_head_; }

  HeadVars heads(nn::Tape& tape, std::span<const std::vector<int>> sequences);
  HeadValues predict(std::span<const std::vector<int>> sequences) const;

  template <TokenEncodedEnvironment E>
  HeadVars heads(nn::Tape& tape, const E& env, std::span<const typename E::State> states) {
    return heads(tape, token_batch(env, states));
  }
  template <TokenEncodedEnvironment E>
  HeadValues predict(const E& env, std::span<const typename E::State> states) const {
    return predict(token_batch(env, states));
  }

  nn::Parameter& log_z() { return log_z_; }
  const nn::Parameter& log_z() const { return log_z_; }
  std::vector<nn::Parameter*> network_parameters();
  std::vector<nn::Parameter*> parameters();

  nlohmann::json to_json() const;
  static RecurrentGfnModel from_json(const nlohmann::json& doc);

 private:
  template <class E>
  static std::vector<std::vector<int>> token_batch(const E& env, std::span<const typename E::State> states) {
    std::vector<std::vector<int>> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(env.tokens(s));
    return out;
  }

  nn::RecurrentEncoder encoder_;
  nn::DenseNet head_;
  int num_actions_ = 0;
  bool flow_head_ = false;
  nn::Parameter log_z_{Matrix::Zero(1, 1)};
};

}  // namespace uqgfn::gfn
