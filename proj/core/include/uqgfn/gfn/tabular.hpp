#pragma once

#include <span>
#include <utility>
#include <vector>

#include "uqgfn/gfn/losses.hpp"

namespace uqgfn::gfn {

/// Explicit small DAG: state 0 is the source, sinks carry positive rewards.
struct TabularDag {
  int num_states = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<double> reward;
  std::vector<std::vector<int>> out_edges;
  std::vector<std::vector<int>> in_edges;

  /// Validates acyclicity, reachability from the source and sink rewards.
  static TabularDag make(int num_states, std::vector<std::pair<int, int>> edges, std::vector<double> reward);

  bool is_sink(int s) const { return out_edges[static_cast<std::size_t>(s)].empty(); }
  int edge_id(int from, int to) const;
  /// Every source-to-sink path as a state list.
  std::vector<std::vector<int>> complete_trajectories() const;
  /// Edge flows of the flow that splits R(x) evenly over the paths ending in x.
  std::vector<double> path_split_edge_flows() const;
};

/// Fully tabulated GFN parameters over a TabularDag.
class TabularFlowModel {
 public:
  explicit TabularFlowModel(const TabularDag& dag);
  /// Parameters of the Markovian flow with the given positive edge flows.
  static TabularFlowModel from_edge_flows(const TabularDag& dag, std::span<const double> edge_flows);

  const TabularDag& dag() const { return *dag_; }

  /// log P_F of every edge (1 x E), normalised over each state's out-edges.
  nn::Var log_pf(nn::Tape& tape);
  /// log P_B of every edge (1 x E), normalised over each state's in-edges.
  nn::Var log_pb(nn::Tape& tape);
  /// Terms for a batch of source-to-sink paths given as state lists.
  BatchTerms terms(nn::Tape& tape, std::span<const std::vector<int>> paths);
  /// Mean flow-matching loss over all non-source states.
  nn::Var flow_matching(nn::Tape& tape);

  nn::Parameter log_flow;         // 1 x S
  nn::Parameter forward_logits;   // 1 x E
  nn::Parameter backward_logits;  // 1 x E
  nn::Parameter log_z;            // 1 x 1

 private:
  nn::Var grouped_log_softmax(nn::Tape& tape, nn::Parameter& logits, const std::vector<std::vector<int>>& groups);

  const TabularDag* dag_;
};

}  // namespace uqgfn::gfn
