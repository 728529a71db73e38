#include "uqgfn/gfn/continuous.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/nn/ops.hpp"

namespace uqgfn::gfn {

namespace {

std::vector<int> head_dims(const std::vector<int>& hidden) {
  std::vector<int> dims{3};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(4);
  return dims;
}

nn::DenseNet make_head(const std::vector<int>& hidden, Rng& rng) {
  nn::DenseNet net(head_dims(hidden), nn::Activation::kRelu, nn::Activation::kIdentity, rng);
  auto& bias = net.layers().back().bias.value;
  bias(1, 0) = std::log(0.5);
  bias(3, 0) = std::log(0.5);
  return net;
}

}  // namespace

ContinuousGfnModel::ContinuousGfnModel(const std::vector<int>& hidden, Rng& rng, double min_variance,
                                       double max_variance)
    : forward_(make_head(hidden, rng)),
      backward_(make_head(hidden, rng)),
      min_variance_(min_variance),
      max_variance_(max_variance) {
  if (!(min_variance > 0.0) || !(max_variance >= min_variance)) throw UsageError("invalid variance bounds");
}

Matrix encode_continuous(const Matrix& positions, int t) {
  if (positions.rows() != 2) throw UsageError("positions must be 2 x B");
  Matrix enc(3, positions.cols());
  enc.topRows(2) = positions;
  enc.row(2).setConstant(static_cast<double>(t));
  return enc;
}

Matrix ContinuousGfnModel::decode(const Matrix& raw) const {
  Matrix out = raw;
  const double lo = std::log(min_variance_), hi = std::log(max_variance_);
  for (Eigen::Index r : {1, 3})
    for (Eigen::Index c = 0; c < raw.cols(); ++c) out(r, c) = std::exp(std::clamp(raw(r, c), lo, hi));
  return out;
}

Matrix ContinuousGfnModel::forward_policy(const Matrix& encoded) const { return decode(forward_.forward(encoded)); }

Matrix ContinuousGfnModel::backward_policy(const Matrix& encoded) const { return decode(backward_.forward(encoded)); }

nn::Var ContinuousGfnModel::log_density(nn::Tape& tape, nn::Var raw, const Matrix& delta) const {
  // Rows of raw: mean_x, log var_x, mean_y, log var_y; delta is 2 x B.
  const double lo = std::log(min_variance_), hi = std::log(max_variance_);
  nn::Var total;
  for (Eigen::Index d = 0; d < 2; ++d) {
    nn::Var mean = nn::slice_rows(raw, 2 * d, 1);
    nn::Var log_var = nn::clamp(nn::slice_rows(raw, 2 * d + 1, 1), lo, hi);
    nn::Var diff = nn::sub(tape.constant(delta.row(d)), mean);
    nn::Var term = nn::add(log_var, nn::mul(nn::square(diff), nn::exp(nn::neg(log_var))));
    total = total.valid() ? nn::add(total, term) : term;
  }
  return nn::add_scalar(nn::scale(total, -0.5), -std::log(2.0 * std::numbers::pi));
}

std::pair<nn::Var, nn::Var> ContinuousGfnModel::log_probabilities(nn::Tape& tape,
                                                                   std::span<const ContinuousTrajectory> batch) {
  if (batch.empty()) throw UsageError("empty continuous batch");
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index steps = batch[0].positions.cols() - 1;
  // Transition (i, t) sits in column i * steps + t.
  Matrix fwd_in(3, b * steps), fwd_delta(2, b * steps);
  Matrix bwd_in(3, b * steps), bwd_delta(2, b * steps);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Matrix& p = batch[static_cast<std::size_t>(i)].positions;
    if (p.cols() != steps + 1) throw UsageError("continuous trajectories differ in length");
    for (Eigen::Index t = 0; t < steps; ++t) {
      const Eigen::Index c = i * steps + t;
      fwd_in.col(c) << p(0, t), p(1, t), static_cast<double>(t);
      fwd_delta.col(c) = p.col(t + 1) - p.col(t);
      bwd_in.col(c) << p(0, t + 1), p(1, t + 1), static_cast<double>(t + 1);
      bwd_delta.col(c) = p.col(t + 1) - p.col(t);
    }
  }
  nn::Var log_pf = log_density(tape, forward_.forward(tape, tape.constant(fwd_in)), fwd_delta);
  nn::Var log_pb = log_density(tape, backward_.forward(tape, tape.constant(bwd_in)), bwd_delta);
  // The step back to the origin is deterministic.
  Matrix keep = Matrix::Ones(1, b * steps);
  for (Eigen::Index i = 0; i < b; ++i) keep(0, i * steps) = 0.0;
  log_pb = nn::mul(log_pb, tape.constant(std::move(keep)));
  return {log_pf, log_pb};
}

std::vector<nn::Parameter*> ContinuousGfnModel::network_parameters() {
  auto p = forward_.parameters();
  for (auto* q : backward_.parameters()) p.push_back(q);
  return p;
}

nlohmann::json ContinuousGfnModel::to_json() const {
  return {{"type", "continuous-gfn"},
          {"min_variance", min_variance_},
          {"max_variance", max_variance_},
          {"log_z", log_z_.value(0, 0)},
          {"forward", forward_.to_json()},
          {"backward", backward_.to_json()}};
}

ContinuousGfnModel ContinuousGfnModel::from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "continuous-gfn") throw UsageError("not a continuous-gfn checkpoint");
  ContinuousGfnModel m;
  m.forward_ = nn::DenseNet::from_json(doc.at("forward"));
  m.backward_ = nn::DenseNet::from_json(doc.at("backward"));
  m.min_variance_ = doc.at("min_variance").get<double>();
  m.max_variance_ = doc.at("max_variance").get<double>();
  m.log_z_ = nn::Parameter(Matrix::Constant(1, 1, doc.at("log_z").get<double>()));
  return m;
}

std::vector<ContinuousTrajectory> sample_continuous(const ContinuousGfnModel& model, const ContinuousTask& task,
                                                    std::size_t count, const ExplorationConfig& explore, Rng& rng) {
  if (task.steps < 1 || !task.log_reward) throw UsageError("continuous task needs steps >= 1 and a reward");
  const auto n = static_cast<Eigen::Index>(count);
  std::vector<ContinuousTrajectory> out(count);
  for (auto& t : out) t.positions = Matrix::Zero(2, task.steps + 1);
  Matrix pos = Matrix::Zero(2, n);
  const double temperature = explore.temperature > 0.0 ? explore.temperature : 0.0;
  for (int t = 0; t < task.steps; ++t) {
    const Matrix policy = model.forward_policy(encode_continuous(pos, t));
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool uniform = explore.epsilon > 0.0 && uniform01(rng) < explore.epsilon;
      for (Eigen::Index d = 0; d < 2; ++d) {
        const double z = standard_normal(rng);
        const double step =
            uniform ? z : policy(2 * d, i) + std::sqrt(policy(2 * d + 1, i) * temperature) * z;
        pos(d, i) += step;
      }
      out[static_cast<std::size_t>(i)].positions.col(t + 1) = pos.col(i);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)].log_reward = task.log_reward(pos(0, i), pos(1, i));
  return out;
}

nn::Var continuous_trajectory_balance(nn::Tape& tape, ContinuousGfnModel& model,
                                      std::span<const ContinuousTrajectory> batch) {
  auto [log_pf, log_pb] = model.log_probabilities(tape, batch);
  BatchTerms terms;
  terms.log_pf = log_pf;
  terms.log_pb = log_pb;
  terms.log_z = tape.parameter(model.log_z());
  const int steps = static_cast<int>(batch[0].positions.cols() - 1);
  for (const auto& t : batch) {
    terms.lengths.push_back(steps);
    terms.log_reward.push_back(t.log_reward);
  }
  return trajectory_balance(terms);
}

TrainResult train_continuous(ContinuousGfnModel& model, const ContinuousTask& task, const TrainConfig& config,
                             Rng& rng) {
  if (config.batch_size == 0) throw UsageError("batch size must be positive");
  if (config.loss != LossKind::kTrajectoryBalance) throw UsageError("the continuous trainer supports tb only");
  nn::Adam opt;
  opt.add(model.network_parameters(), config.learning_rate);
  opt.add(model.log_z(), config.log_z_learning_rate);
  TrainResult result;
  result.losses.reserve(config.episodes);
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const ExplorationConfig explore{
        annealed_epsilon(episode, config.epsilon_start, config.epsilon_decay, config.epsilon_floor),
        config.temperature};
    const auto batch = sample_continuous(model, task, config.batch_size, explore, rng);
    nn::Tape tape;
    nn::Var loss = continuous_trajectory_balance(tape, model, batch);
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

Matrix extract_continuous_policy(const ContinuousGfnModel& model, const Matrix& positions) {
  if (positions.rows() != 2 || positions.cols() < 2) throw UsageError("a path needs at least one step");
  const Eigen::Index steps = positions.cols() - 1;
  Matrix out(steps, 4);
  for (Eigen::Index t = 0; t < steps; ++t)
    out.row(t) = model.forward_policy(encode_continuous(positions.col(t), static_cast<int>(t))).transpose();
  return out;
}

}  // namespace uqgfn::gfn
