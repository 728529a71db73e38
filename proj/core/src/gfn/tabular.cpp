#include "uqgfn/gfn/tabular.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::gfn {

TabularDag TabularDag::make(int num_states, std::vector<std::pair<int, int>> edges, std::vector<double> reward) {
  if (num_states < 2) throw UsageError("a DAG needs at least two states");
  if (static_cast<int>(reward.size()) != num_states) throw UsageError("one reward entry per state required");
  TabularDag d;
  d.num_states = num_states;
  d.edges = std::move(edges);
  d.reward = std::move(reward);
  d.out_edges.assign(static_cast<std::size_t>(num_states), {});
  d.in_edges.assign(static_cast<std::size_t>(num_states), {});
  for (std::size_t e = 0; e < d.edges.size(); ++e) {
    const auto [u, v] = d.edges[e];
    if (u < 0 || v < 0 || u >= num_states || v >= num_states || u == v) throw UsageError("invalid DAG edge");
    d.out_edges[static_cast<std::size_t>(u)].push_back(static_cast<int>(e));
    d.in_edges[static_cast<std::size_t>(v)].push_back(static_cast<int>(e));
  }
  // Kahn's algorithm for acyclicity.
  std::vector<int> indeg(static_cast<std::size_t>(num_states));
  for (int s = 0; s < num_states; ++s) indeg[static_cast<std::size_t>(s)] = static_cast<int>(d.in_edges[static_cast<std::size_t>(s)].size());
  std::vector<int> queue;
  for (int s = 0; s < num_states; ++s)
    if (indeg[static_cast<std::size_t>(s)] == 0) queue.push_back(s);
  if (queue != std::vector<int>{0}) throw UsageError("state 0 must be the only state without parents");
  std::size_t seen = 0;
  while (seen < queue.size()) {
    const int s = queue[seen++];
    for (int e : d.out_edges[static_cast<std::size_t>(s)]) {
      const int v = d.edges[static_cast<std::size_t>(e)].second;
      if (--indeg[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
    }
  }
  if (static_cast<int>(seen) != num_states) throw UsageError("edge list contains a cycle");
  for (int s = 0; s < num_states; ++s) {
    const double r = d.reward[static_cast<std::size_t>(s)];
    if (d.is_sink(s) != (r > 0.0)) throw UsageError("rewards must be positive exactly on sink states");
  }
  return d;
}

int TabularDag::edge_id(int from, int to) const {
  for (int e : out_edges.at(static_cast<std::size_t>(from)))
    if (edges[static_cast<std::size_t>(e)].second == to) return e;
  throw UsageError("no edge " + std::to_string(from) + "->" + std::to_string(to));
}

std::vector<std::vector<int>> TabularDag::complete_trajectories() const {
  std::vector<std::vector<int>> out;
  std::vector<int> path{0};
  std::function<void()> walk = [&] {
    const int s = path.back();
    if (is_sink(s)) {
      out.push_back(path);
      return;
    }
    for (int e : out_edges[static_cast<std::size_t>(s)]) {
      path.push_back(edges[static_cast<std::size_t>(e)].second);
      walk();
      path.pop_back();
    }
  };
  walk();
  return out;
}

std::vector<double> TabularDag::path_split_edge_flows() const {
  const auto paths = complete_trajectories();
  std::vector<int> paths_to(static_cast<std::size_t>(num_states), 0);
  for (const auto& p : paths) ++paths_to[static_cast<std::size_t>(p.back())];
  std::vector<double> flow(edges.size(), 0.0);
  for (const auto& p : paths) {
    const double share = reward[static_cast<std::size_t>(p.back())] / paths_to[static_cast<std::size_t>(p.back())];
    for (std::size_t t = 0; t + 1 < p.size(); ++t) flow[static_cast<std::size_t>(edge_id(p[t], p[t + 1]))] += share;
  }
  return flow;
}

TabularFlowModel::TabularFlowModel(const TabularDag& dag)
    : log_flow(Matrix::Zero(1, dag.num_states)),
      forward_logits(Matrix::Zero(1, static_cast<Eigen::Index>(dag.edges.size()))),
      backward_logits(Matrix::Zero(1, static_cast<Eigen::Index>(dag.edges.size()))),
      log_z(Matrix::Zero(1, 1)),
      dag_(&dag) {}

TabularFlowModel TabularFlowModel::from_edge_flows(const TabularDag& dag, std::span<const double> edge_flows) {
  if (edge_flows.size() != dag.edges.size()) throw UsageError("one flow per edge required");
  TabularFlowModel m(dag);
  for (int s = 0; s < dag.num_states; ++s) {
    double f = 0.0;
    const auto& through = s == 0 ? dag.out_edges[0] : dag.in_edges[static_cast<std::size_t>(s)];
    for (int e : through) f += edge_flows[static_cast<std::size_t>(e)];
    m.log_flow.value(0, s) = std::log(f);
  }
  for (std::size_t e = 0; e < dag.edges.size(); ++e) {
    const double l = std::log(edge_flows[e]);
    m.forward_logits.value(0, static_cast<Eigen::Index>(e)) = l;
    m.backward_logits.value(0, static_cast<Eigen::Index>(e)) = l;
  }
  m.log_z.value(0, 0) = m.log_flow.value(0, 0);
  return m;
}

nn::Var TabularFlowModel::grouped_log_softmax(nn::Tape& tape, nn::Parameter& logits,
                                              const std::vector<std::vector<int>>& groups) {
  std::vector<int> order, sizes, group_of(dag_->edges.size());
  for (const auto& g : groups) {
    if (g.empty()) continue;
    for (int e : g) {
      group_of[static_cast<std::size_t>(e)] = static_cast<int>(sizes.size());
      order.push_back(e);
    }
    sizes.push_back(static_cast<int>(g.size()));
  }
  nn::Var x = tape.parameter(logits);
  nn::Var lse = nn::log(nn::segment_sum(nn::exp(nn::gather_cols(x, order)), sizes));
  return nn::sub(x, nn::gather_cols(lse, group_of));
}

nn::Var TabularFlowModel::log_pf(nn::Tape& tape) { return grouped_log_softmax(tape, forward_logits, dag_->out_edges); }

nn::Var TabularFlowModel::log_pb(nn::Tape& tape) { return grouped_log_softmax(tape, backward_logits, dag_->in_edges); }

BatchTerms TabularFlowModel::terms(nn::Tape& tape, std::span<const std::vector<int>> paths) {
  std::vector<int> edge_ids, sources;
  BatchTerms t;
  for (const auto& p : paths) {
    if (p.size() < 2 || p.front() != 0 || !dag_->is_sink(p.back())) throw UsageError("path must run from source to a sink");
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      edge_ids.push_back(dag_->edge_id(p[k], p[k + 1]));
      sources.push_back(p[k]);
    }
    t.lengths.push_back(static_cast<int>(p.size() - 1));
    t.log_reward.push_back(std::log(dag_->reward[static_cast<std::size_t>(p.back())]));
  }
  t.log_pf = nn::gather_cols(log_pf(tape), edge_ids);
  t.log_pb = nn::gather_cols(log_pb(tape), edge_ids);
  t.log_flow = nn::gather_cols(tape.parameter(log_flow), sources);
  t.log_z = tape.parameter(log_z);
  return t;
}

nn::Var TabularFlowModel::flow_matching(nn::Tape& tape) {
  const TabularDag& d = *dag_;
  std::vector<int> src(d.edges.size());
  for (std::size_t e = 0; e < d.edges.size(); ++e) src[e] = d.edges[e].first;
  nn::Var edge_flow = nn::exp(nn::add(nn::gather_cols(tape.parameter(log_flow), src), log_pf(tape)));

  std::vector<int> in_order, in_sizes, out_order, out_sizes;
  for (int s = 1; s < d.num_states; ++s) {
    for (int e : d.in_edges[static_cast<std::size_t>(s)]) in_order.push_back(e);
    in_sizes.push_back(static_cast<int>(d.in_edges[static_cast<std::size_t>(s)].size()));
  }
  // Out-flow per non-source state: R(s) at sinks, summed edge flow elsewhere.
  Matrix reward_row = Matrix::Zero(1, d.num_states - 1);
  for (int s = 1; s < d.num_states; ++s) {
    if (d.is_sink(s)) {
      reward_row(0, s - 1) = d.reward[static_cast<std::size_t>(s)];
      out_sizes.push_back(0);
    } else {
      for (int e : d.out_edges[static_cast<std::size_t>(s)]) out_order.push_back(e);
      out_sizes.push_back(static_cast<int>(d.out_edges[static_cast<std::size_t>(s)].size()));
    }
  }
  const double hi = std::numeric_limits<double>::max();
  nn::Var in = nn::segment_sum(nn::gather_cols(edge_flow, in_order), in_sizes);
  nn::Var out = nn::add(nn::segment_sum(nn::gather_cols(edge_flow, out_order), out_sizes),
                        tape.constant(std::move(reward_row)));
  nn::Var residual = nn::sub(nn::log(nn::clamp(in, kFlowFloor, hi)), nn::log(nn::clamp(out, kFlowFloor, hi)));
  return nn::mean(nn::square(residual));
}

}  // namespace uqgfn::gfn
