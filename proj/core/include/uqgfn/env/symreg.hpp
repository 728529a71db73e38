#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uqgfn/common/rng.hpp"
#include "uqgfn/gfn/trajectory.hpp"

namespace uqgfn::env {

/// Expression tokens; kTerminate is an action only and never part of an expression.
enum SymToken { kX = 0, kOne, kTwo, kThree, kPlus, kMinus, kTimes, kSin, kCos, kTerminate };

inline constexpr int kNumExpressionTokens = 9;
inline constexpr int kNumSymActions = 10;
inline constexpr int kDefaultMaxExpressionLength = 10;

std::string_view token_name(int token);
int token_from_name(std::string_view name);
std::vector<int> tokens_from_names(const std::vector<std::string>& names);
std::vector<std::string> token_names(std::span<const int> tokens);

bool is_operand(int token);
bool is_unary(int token);
bool is_binary(int token);

/// Infix (unary functions prefix-style) to reverse Polish notation. Multiplication
/// binds tighter than + and -, unary functions tightest, binary operators associate
/// left. Throws ParseError on a malformed sequence.
std::vector<int> shunting_yard(std::span<const int> tokens);

/// Stack evaluation of an RPN sequence. Throws ParseError on underflow or leftovers.
double eval_rpn(std::span<const int> rpn, double x);
std::vector<double> eval_rpn(std::span<const int> rpn, std::span<const double> xs);

/// True when `tokens` is a complete expression.
bool is_complete_expression(std::span<const int> tokens);

/// Grammar mask over the 10 actions: a token is valid only if the expression can
/// still be completed within `max_length`; terminate only for a complete expression.
gfn::ActionMask valid_next_tokens(std::span<const int> prefix, int max_length = kDefaultMaxExpressionLength);

/// sin x + 2 - x.
double symreg_target_function(double x);
/// `points` equispaced values covering [pi, 4 pi].
std::vector<double> symreg_grid(int points = 100);

struct NoisyTarget {
  std::vector<double> x;
  std::vector<double> clean;
  std::vector<double> values;
  double sigma = 0.0;

  /// values - clean, i.e. sigma * W(x).
  std::vector<double> noise() const;
};

/// Brownian path on `grid` with W(grid[0]) = 0 and independent increments of variance dx.
std::vector<double> sample_wiener_path(std::span<const double> grid, Rng& rng);
NoisyTarget make_noisy_target(double sigma, Rng& rng, int points = 100);
NoisyTarget noisy_target_from_path(double sigma, std::span<const double> wiener, int points = 100);

inline constexpr double kSymRegRewardFloor = 1e-12;

/// (1 + 0.2 n) / (1 + MSE) for a complete expression of n tokens; the floor if any value is non-finite.
double expression_reward(const NoisyTarget& target, std::span<const int> tokens);

/// Sequential expression construction. States are token prefixes; each has one parent.
class SymRegEnv {
 public:
  struct State {
    std::vector<int> tokens;
    bool done = false;

    bool operator==(const State& other) const = default;
  };

  explicit SymRegEnv(NoisyTarget target, int max_length = kDefaultMaxExpressionLength);

  const NoisyTarget& target() const { return target_; }
  int max_length() const { return max_length_; }

  int num_actions() const { return kNumSymActions; }
  State initial_state(Rng&) const { return {}; }
  gfn::ActionMask valid_actions(const State& s) const;
  State step(const State& s, int action) const;
  bool is_terminal(const State& s) const { return s.done; }
  double log_reward(const State& s) const;
  double log_backward(const State&, const State&) const { return 0.0; }

  int vocabulary_size() const { return kNumExpressionTokens; }
  std::vector<int> tokens(const State& s) const { return s.tokens; }

  /// States visited by an action sequence (terminate included) from the empty prefix.
  std::vector<State> follow(std::span<const int> actions) const;

 private:
  NoisyTarget target_;
  int max_length_;
};

}  // namespace uqgfn::env
