#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/linalg.hpp"
#include "uqgfn/common/rng.hpp"
#include "uqgfn/gfn/trajectory.hpp"

namespace uqgfn::env {

inline constexpr int kMaxGraphNodes = 8;

/// Directed graph on up to 8 nodes; bit (i * nodes + j) marks the edge i -> j.
struct Dag {
  int nodes = 0;
  std::uint64_t edges = 0;

  bool has_edge(int from, int to) const { return (edges >> bit(from, to)) & 1u; }
  void add_edge(int from, int to) { edges |= std::uint64_t{1} << bit(from, to); }
  int num_edges() const;
  /// Bit mask over nodes of the parents of `node`.
  std::uint32_t parents(int node) const;
  bool reaches(int from, int to) const;
  bool is_acyclic() const;
  std::vector<std::pair<int, int>> edge_list() const;
  Dag with_edges(std::span<const std::pair<int, int>> list) const;

  bool operator==(const Dag& other) const = default;
  bool operator<(const Dag& other) const { return edges < other.edges; }

  nlohmann::json to_json() const;
  static Dag from_json(const nlohmann::json& doc);

 private:
  int bit(int from, int to) const { return from * nodes + to; }
};

/// Linear Gaussian structural equation model x_j = sum_i w_ij x_i + eps_j.
struct LinearGaussianNetwork {
  Dag graph;
  Matrix weights;  // nodes x nodes, weights(i, j) on edge i -> j
  double noise_variance = 0.01;

  /// Draws one N(0, 1) weight per edge.
  static LinearGaussianNetwork sample(const Dag& graph, double noise_variance, Rng& rng);
  /// Analytic covariance (I - W)^{-T} Sigma (I - W)^{-1}.
  Matrix covariance() const;
};

/// Ancestral sampling; returns n x nodes.
Matrix sample_dataset(const LinearGaussianNetwork& net, int n, Rng& rng);

/// The default 7-edge ground-truth graph on 5 nodes.
Dag default_ground_truth();

int encode_edge_action(int source, int target, int nodes);
/// std::nullopt for the terminate action nodes^2.
std::optional<std::pair<int, int>> decode_edge_action(int action, int nodes);

/// Masks self-loops, present edges and cycle-creating edges; terminate always valid.
gfn::ActionMask structure_valid_actions(const Dag& g);

struct BgeHyperparams {
  double alpha_mu = 1.0;
  double alpha_w = 0.0;
  Vector nu;
  Matrix t;

  /// alpha_mu = 1, alpha_w = nodes + 2, nu = 0, T = alpha_mu (alpha_w - nodes - 1) / (alpha_mu + 1) I.
  static BgeHyperparams defaults(int nodes);
};

/// Posterior scale matrix T + S_N + n alpha_mu / (n + alpha_mu) (nu - mean)(nu - mean)^T.
Matrix r_matrix(const Matrix& data, const BgeHyperparams& hyper);

/// BGe marginal likelihood of Gaussian data, decomposed over nodes.
class BgeScore {
 public:
  BgeScore(Matrix data, BgeHyperparams hyper);

  int nodes() const { return nodes_; }
  const Matrix& r() const { return r_; }
  /// log P(d^Y) for the variable subset Y (bit mask); 0 for the empty set.
  double log_marginal(std::uint32_t subset) const { return subset_scores_[subset]; }
  /// log P(d^{Pa + i}) - log P(d^{Pa}).
  double local_score(int node, std::uint32_t parents) const;
  /// log P(D | G).
  double score(const Dag& g) const;

 private:
  double compute_subset(std::uint32_t subset) const;

  int nodes_;
  int samples_;
  BgeHyperparams hyper_;
  Matrix r_;
  std::vector<double> subset_scores_;
};

/// Every DAG on `nodes` labelled nodes (nodes <= 5).
std::vector<Dag> enumerate_dags(int nodes);

/// Edge-by-edge DAG construction with a BGe reward under a uniform graph prior.
/// log rewards are offset by the empty graph's score (a constant factor).
class StructureEnv {
 public:
  struct State {
    Dag graph;
    bool done = false;

    bool operator==(const State& other) const = default;
  };

  explicit StructureEnv(BgeScore score);

  const BgeScore& bge() const { return score_; }
  int nodes() const { return score_.nodes(); }

  int num_actions() const { return nodes() * nodes() + 1; }
  State initial_state(Rng&) const { return {Dag{nodes(), 0}, false}; }
  gfn::ActionMask valid_actions(const State& s) const;
  State step(const State& s, int action) const;
  bool is_terminal(const State& s) const { return s.done; }
  double log_reward(const State& s) const { return score_.score(s.graph) - offset_; }
  /// Uniform over the edges of the child graph; 1 for the terminate transition.
  double log_backward(const State& parent, const State& child) const;

  int encoding_size() const { return nodes() * nodes(); }
  Matrix encode(std::span<const State> states) const;

  std::vector<State> follow(std::span<const int> actions) const;

 private:
  BgeScore score_;
  double offset_;
};

}  // namespace uqgfn::env
