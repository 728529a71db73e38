#include "uqgfn/env/symreg.hpp"

#include <cmath>
#include <numbers>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::env {

namespace {

constexpr std::string_view kNames[] = {"x", "1", "2", "3", "+", "-", "*", "sin", "cos", "end"};

int precedence(int token) {
  if (is_unary(token)) return 3;
  if (token == kTimes) return 2;
  return 1;
}

}  // namespace

std::string_view token_name(int token) {
  if (token < 0 || token >= kNumSymActions) throw UsageError("token id out of range");
  return kNames[token];
}

int token_from_name(std::string_view name) {
  for (int t = 0; t < kNumSymActions; ++t)
    if (kNames[t] == name) return t;
  if (name == "−" || name == "—") return kMinus;
  if (name == "×") return kTimes;
  throw UsageError("unknown token '" + std::string(name) + "'");
}

std::vector<int> tokens_from_names(const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& n : names) out.push_back(token_from_name(n));
  return out;
}

std::vector<std::string> token_names(std::span<const int> tokens) {
  std::vector<std::string> out;
  for (int t : tokens) out.emplace_back(token_name(t));
  return out;
}

bool is_operand(int token) { return token >= kX && token <= kThree; }
bool is_unary(int token) { return token == kSin || token == kCos; }
bool is_binary(int token) { return token == kPlus || token == kMinus || token == kTimes; }

std::vector<int> shunting_yard(std::span<const int> tokens) {
  std::vector<int> out, ops;
  bool expect_operand = true;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (is_operand(t)) {
      if (!expect_operand) throw ParseError("operand where an operator was expected", i);
      out.push_back(t);
      expect_operand = false;
    } else if (is_unary(t)) {
      if (!expect_operand) throw ParseError("function where an operator was expected", i);
      ops.push_back(t);
    } else if (is_binary(t)) {
      if (expect_operand) throw ParseError("operator where an operand was expected", i);
      while (!ops.empty() && precedence(ops.back()) >= precedence(t)) {
        out.push_back(ops.back());
        ops.pop_back();
      }
      ops.push_back(t);
      expect_operand = true;
    } else {
      throw ParseError("token is not part of an expression", i);
    }
  }
  if (expect_operand) throw ParseError("expression ends without an operand", tokens.size());
  while (!ops.empty()) {
    out.push_back(ops.back());
    ops.pop_back();
  }
  return out;
}

double eval_rpn(std::span<const int> rpn, double x) {
  double stack[64];
  std::size_t top = 0;
  for (std::size_t i = 0; i < rpn.size(); ++i) {
    const int t = rpn[i];
    if (is_operand(t)) {
      if (top == 64) throw ParseError("expression too deep", i);
      stack[top++] = t == kX ? x : static_cast<double>(t);
    } else if (is_unary(t)) {
      if (top < 1) throw ParseError("stack underflow", i);
      stack[top - 1] = t == kSin ? std::sin(stack[top - 1]) : std::cos(stack[top - 1]);
    } else if (is_binary(t)) {
      if (top < 2) throw ParseError("stack underflow", i);
      const double b = stack[--top];
      double& a = stack[top - 1];
      a = t == kPlus ? a + b : t == kMinus ? a - b : a * b;
    } else {
      throw ParseError("token is not part of an expression", i);
    }
  }
  if (top != 1) throw ParseError("malformed expression leaves " + std::to_string(top) + " values", rpn.size());
  return stack[0];
}

std::vector<double> eval_rpn(std::span<const int> rpn, std::span<const double> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(eval_rpn(rpn, x));
  return out;
}

bool is_complete_expression(std::span<const int> tokens) {
  if (tokens.empty()) return false;
  bool expect_operand = true;
  for (int t : tokens) {
    if (is_operand(t)) {
      if (!expect_operand) return false;
      expect_operand = false;
    } else if (is_unary(t)) {
      if (!expect_operand) return false;
    } else if (is_binary(t)) {
      if (expect_operand) return false;
      expect_operand = true;
    } else {
      return false;
    }
  }
  return !expect_operand;
}

gfn::ActionMask valid_next_tokens(std::span<const int> prefix, int max_length) {
  gfn::ActionMask mask(kNumSymActions, 0);
  const int len = static_cast<int>(prefix.size());
  const bool complete = is_complete_expression(prefix);
  if (complete) {
    mask[kTerminate] = 1;
    // An operator needs an operand after it.
    if (len + 2 <= max_length)
      for (int t : {kPlus, kMinus, kTimes}) mask[static_cast<std::size_t>(t)] = 1;
    return mask;
  }
  if (len + 1 <= max_length)
    for (int t : {kX, kOne, kTwo, kThree}) mask[static_cast<std::size_t>(t)] = 1;
  if (len + 2 <= max_length)
    for (int t : {kSin, kCos}) mask[static_cast<std::size_t>(t)] = 1;
  return mask;
}

double symreg_target_function(double x) { return std::sin(x) + 2.0 - x; }

std::vector<double> symreg_grid(int points) {
  if (points < 2) throw UsageError("need at least two grid points");
  std::vector<double> x(static_cast<std::size_t>(points));
  const double lo = std::numbers::pi, hi = 4.0 * std::numbers::pi;
  for (int i = 0; i < points; ++i) x[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  return x;
}

std::vector<double> NoisyTarget::noise() const {
  std::vector<double> n(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) n[i] = values[i] - clean[i];
  return n;
}

std::vector<double> sample_wiener_path(std::span<const double> grid, Rng& rng) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i)
    w[i] = w[i - 1] + std::sqrt(grid[i] - grid[i - 1]) * standard_normal(rng);
  return w;
}

NoisyTarget noisy_target_from_path(double sigma, std::span<const double> wiener, int points) {
  if (sigma < 0.0) throw UsageError("noise scale must be non-negative");
  NoisyTarget t;
  t.sigma = sigma;
  t.x = symreg_grid(points);
  if (wiener.size() != t.x.size()) throw UsageError("Wiener path length does not match the grid");
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    t.clean.push_back(symreg_target_function(t.x[i]));
    t.values.push_back(t.clean.back() + sigma * wiener[i]);
  }
  return t;
}

NoisyTarget make_noisy_target(double sigma, Rng& rng, int points) {
  const auto grid = symreg_grid(points);
  return noisy_target_from_path(sigma, sample_wiener_path(grid, rng), points);
}

double expression_reward(const NoisyTarget& target, std::span<const int> tokens) {
  const auto rpn = shunting_yard(tokens);
  double sse = 0.0;
  for (std::size_t i = 0; i < target.x.size(); ++i) {
    const double g = eval_rpn(rpn, target.x[i]);
    if (!std::isfinite(g)) return kSymRegRewardFloor;
    sse += (target.values[i] - g) * (target.values[i] - g);
  }
  const double mse = sse / static_cast<double>(target.x.size());
  const double r = (1.0 + 0.2 * static_cast<double>(tokens.size())) / (1.0 + mse);
  return std::isfinite(r) && r > kSymRegRewardFloor ? r : kSymRegRewardFloor;
}

SymRegEnv::SymRegEnv(NoisyTarget target, int max_length) : target_(std::move(target)), max_length_(max_length) {
  if (max_length_ < 1) throw UsageError("expression length cap must be positive");
  if (target_.x.empty() || target_.x.size() != target_.values.size()) throw UsageError("malformed noisy target");
}

gfn::ActionMask SymRegEnv::valid_actions(const State& s) const {
  if (s.done) return gfn::ActionMask(kNumSymActions, 0);
  return valid_next_tokens(s.tokens, max_length_);
}

SymRegEnv::State SymRegEnv::step(const State& s, int action) const {
  const auto mask = valid_actions(s);
  if (action < 0 || action >= kNumSymActions || !mask[static_cast<std::size_t>(action)])
    throw UsageError("invalid token action " + std::to_string(action));
  State next = s;
  if (action == kTerminate) next.done = true;
  else next.tokens.push_back(action);
  return next;
}

double SymRegEnv::log_reward(const State& s) const { return std::log(expression_reward(target_, s.tokens)); }

std::vector<SymRegEnv::State> SymRegEnv::follow(std::span<const int> actions) const {
  std::vector<State> path{State{}};
  for (int a : actions) path.push_back(step(path.back(), a));
  return path;
}

}  // namespace uqgfn::env
