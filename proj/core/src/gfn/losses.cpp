#include "uqgfn/gfn/losses.hpp"

#include <cmath>
#include <numeric>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::gfn {

namespace {

double floored_log(double x, bool& floored) {
  if (x < kFlowFloor) {
    floored = true;
    x = kFlowFloor;
  }
  return std::log(x);
}

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("forward and backward log-probabilities differ in length");
}

}  // namespace

ScalarLoss flow_matching_loss(std::span<const double> in_flows, std::span<const double> out_flows) {
  ScalarLoss out;
  const double in = floored_log(std::accumulate(in_flows.begin(), in_flows.end(), 0.0), out.floored);
  const double o = floored_log(std::accumulate(out_flows.begin(), out_flows.end(), 0.0), out.floored);
  out.value = (in - o) * (in - o);
  return out;
}

double detailed_balance_loss(double log_flow, double log_pf, double log_flow_next, double log_pb) {
  const double r = (log_flow + log_pf) - (log_flow_next + log_pb);
  return r * r;
}

double trajectory_balance_loss(double log_z, std::span<const double> log_pf, double log_reward,
                               std::span<const double> log_pb) {
  check_lengths(log_pf, log_pb);
  double r = log_z - log_reward;
  for (std::size_t t = 0; t < log_pf.size(); ++t) r += log_pf[t] - log_pb[t];
  return r * r;
}

double subtrajectory_balance_loss(std::span<const double> log_flow, std::span<const double> log_pf,
                                  std::span<const double> log_pb, std::size_t m, std::size_t n) {
  check_lengths(log_pf, log_pb);
  if (log_flow.size() != log_pf.size() + 1) throw UsageError("need one flow per state");
  if (!(m < n) || n > log_pf.size()) throw UsageError("sub-trajectory range out of bounds");
  double r = log_flow[m] - log_flow[n];
  for (std::size_t t = m; t < n; ++t) r += log_pf[t] - log_pb[t];
  return r * r;
}

double subtrajectory_balance_mean(std::span<const double> log_flow, std::span<const double> log_pf,
                                  std::span<const double> log_pb) {
  const std::size_t len = log_pf.size();
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t m = 0; m < len; ++m)
    for (std::size_t n = m + 1; n <= len; ++n) {
      total += subtrajectory_balance_loss(log_flow, log_pf, log_pb, m, n);
      ++pairs;
    }
  if (pairs == 0) throw UsageError("sub-trajectory mean of an empty trajectory");
  return total / static_cast<double>(pairs);
}

namespace {

void check_terms(const BatchTerms& terms) {
  if (terms.lengths.size() != terms.log_reward.size()) throw UsageError("one reward per trajectory required");
  const auto n = std::accumulate(terms.lengths.begin(), terms.lengths.end(), 0);
  if (!terms.log_pf.valid() || !terms.log_pb.valid()) throw UsageError("batch terms lack log-probabilities");
  if (terms.log_pf.cols() != n || terms.log_pb.cols() != n) throw UsageError("batch terms do not match lengths");
  for (int l : terms.lengths)
    if (l < 1) throw UsageError("trajectories need at least one transition");
}

// h_t = log F(s_t) - sum_{k<t} (log P_F - log P_B) over every state of every trajectory,
// with F(s_L) = R. Returned as a 1 x (N + B) row with per-trajectory runs of L + 1.
nn::Var state_potentials(const BatchTerms& terms, std::vector<int>& runs, std::vector<int>& source_pos) {
  if (!terms.log_flow.valid()) throw UsageError("this loss needs a state-flow head");
  nn::Tape& tape = *terms.log_pf.tape();
  const std::size_t b = terms.lengths.size();
  Eigen::Index total = 0;
  runs.clear();
  source_pos.clear();
  for (std::size_t i = 0; i < b; ++i) {
    const int l = terms.lengths[i];
    for (int t = 0; t < l; ++t) source_pos.push_back(static_cast<int>(total) + t);
    runs.push_back(l + 1);
    total += l + 1;
  }
  Matrix reward_row = Matrix::Zero(1, total);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < b; ++i) {
    off += terms.lengths[i];
    reward_row(0, off) = terms.log_reward[i];
    off += 1;
  }
  nn::Var flows = nn::add(nn::scatter_cols(terms.log_flow, source_pos, total), tape.constant(std::move(reward_row)));
  nn::Var steps = nn::scatter_cols(nn::sub(terms.log_pf, terms.log_pb), source_pos, total);
  return nn::sub(flows, nn::segment_cumsum_exclusive(steps, runs));
}

}  // namespace

nn::Var trajectory_balance(const BatchTerms& terms) {
  check_terms(terms);
  if (!terms.log_z.valid()) throw UsageError("trajectory balance needs log Z");
  nn::Tape& tape = *terms.log_pf.tape();
  Matrix reward(1, static_cast<Eigen::Index>(terms.log_reward.size()));
  for (std::size_t i = 0; i < terms.log_reward.size(); ++i) reward(0, static_cast<Eigen::Index>(i)) = terms.log_reward[i];
  nn::Var ratio = nn::segment_sum(nn::sub(terms.log_pf, terms.log_pb), terms.lengths);
  nn::Var residual = nn::sub(nn::add(ratio, terms.log_z), tape.constant(std::move(reward)));
  return nn::mean(nn::square(residual));
}

nn::Var subtrajectory_balance(const BatchTerms& terms) {
  check_terms(terms);
  std::vector<int> runs, source_pos;
  nn::Var h = state_potentials(terms, runs, source_pos);
  // sum_{m<n} (h_m - h_n)^2 = (L + 1) sum_t (h_t - mean h)^2 within each trajectory.
  double pairs = 0.0;
  for (int l : terms.lengths) pairs += 0.5 * l * (l + 1.0);
  Matrix weight(1, h.cols());
  Eigen::Index off = 0;
  for (int r : runs) {
    weight.middleCols(off, r).setConstant(static_cast<double>(r) / pairs);
    off += r;
  }
  nn::Tape& tape = *terms.log_pf.tape();
  return nn::sum(nn::mul(nn::square(nn::segment_center(h, runs)), tape.constant(std::move(weight))));
}

nn::Var detailed_balance(const BatchTerms& terms) {
  check_terms(terms);
  std::vector<int> runs, source_pos;
  nn::Var h = state_potentials(terms, runs, source_pos);
  std::vector<int> next_pos(source_pos.size());
  for (std::size_t k = 0; k < source_pos.size(); ++k) next_pos[k] = source_pos[k] + 1;
  return nn::mean(nn::square(nn::sub(nn::gather_cols(h, source_pos), nn::gather_cols(h, next_pos))));
}

}  // namespace uqgfn::gfn
