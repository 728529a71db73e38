#pragma once

#include <span>
#include <vector>

#include "uqgfn/nn/tape.hpp"

namespace uqgfn::gfn {

/// Floor applied to flows and probabilities before taking logs.
inline constexpr double kFlowFloor = 1e-30;

struct ScalarLoss {
  double value = 0.0;
  /// Set when a flow sum fell below kFlowFloor and was clamped.
  bool floored = false;
};

/// (log sum(in) / sum(out))^2. For a terminating state pass {R(s)} as `out_flows`.
ScalarLoss flow_matching_loss(std::span<const double> in_flows, std::span<const double> out_flows);
/// (log F(s) P_F(s'|s) / (F(s') P_B(s|s')))^2 from log quantities.
double detailed_balance_loss(double log_flow, double log_pf, double log_flow_next, double log_pb);
/// (log Z prod P_F / (R prod P_B))^2.
double trajectory_balance_loss(double log_z, std::span<const double> log_pf, double log_reward,
                               std::span<const double> log_pb);
/// Sub-trajectory s_m .. s_n. `log_flow` has one entry per state s_0 .. s_L; the last
/// entry is log R at a terminal state.
double subtrajectory_balance_loss(std::span<const double> log_flow, std::span<const double> log_pf,
                                  std::span<const double> log_pb, std::size_t m, std::size_t n);
/// Unweighted mean of subtrajectory_balance_loss over all 0 <= m < n <= L.
double subtrajectory_balance_mean(std::span<const double> log_flow, std::span<const double> log_pf,
                                  std::span<const double> log_pb);

/// Batched per-transition quantities recorded on a tape. Transitions of a trajectory
/// are contiguous; `lengths` gives the number of transitions per trajectory.
struct BatchTerms {
  nn::Var log_pf;    // 1 x N
  nn::Var log_pb;    // 1 x N
  nn::Var log_flow;  // 1 x N, flow of each transition's source state (optional)
  nn::Var log_z;     // 1 x 1 (optional)
  std::vector<int> lengths;
  std::vector<double> log_reward;
};

/// Mean over trajectories of the squared trajectory-balance residual.
nn::Var trajectory_balance(const BatchTerms& terms);
/// Mean over all sub-trajectories (m, n) pooled across the batch.
nn::Var subtrajectory_balance(const BatchTerms& terms);
/// Mean over all transitions; the terminal flow is the reward.
nn::Var detailed_balance(const BatchTerms& terms);

}  // namespace uqgfn::gfn
