#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "uqgfn/common/errors.hpp"
#include "uqgfn/env/continuous_grid.hpp"
#include "uqgfn/env/discrete_grid.hpp"
#include "uqgfn/env/structlearn.hpp"
#include "uqgfn/env/symreg.hpp"
#include "uqgfn/gfn/models.hpp"
#include "uqgfn/gfn/sampler.hpp"

using namespace uqgfn;
using namespace uqgfn::env;

static_assert(gfn::VectorEncodedEnvironment<DiscreteGridEnv>);
static_assert(gfn::VectorEncodedEnvironment<StructureEnv>);
static_assert(gfn::TokenEncodedEnvironment<SymRegEnv>);

namespace {

int count_valid(const gfn::ActionMask& m) {
  int n = 0;
  for (auto v : m) n += v;
  return n;
}

// Recursive-descent evaluator over the infix tokens:
// expr := term (('+' | '-') term)*, term := factor ('*' factor)*, factor := unary factor | operand.
class DescentEvaluator {
 public:
  DescentEvaluator(std::span<const int> t, double x) : t_(t), x_(x) {}
  double run() {
    const double v = expr();
    if (pos_ != t_.size()) throw std::runtime_error("trailing tokens");
    return v;
  }

 private:
  double expr() {
    double v = term();
    while (pos_ < t_.size() && (t_[pos_] == kPlus || t_[pos_] == kMinus)) {
      const int op = t_[pos_++];
      const double r = term();
      v = op == kPlus ? v + r : v - r;
    }
    return v;
  }
  double term() {
    double v = factor();
    while (pos_ < t_.size() && t_[pos_] == kTimes) {
      ++pos_;
      v *= factor();
    }
    return v;
  }
  double factor() {
    if (pos_ >= t_.size()) throw std::runtime_error("unexpected end");
    switch (t_[pos_++]) {
      case kX: return x_;
      case kOne: return 1.0;
      case kTwo: return 2.0;
      case kThree: return 3.0;
      case kSin: return std::sin(factor());
      case kCos: return std::cos(factor());
      default: throw std::runtime_error("unexpected token");
    }
  }

  std::span<const int> t_;
  double x_;
  std::size_t pos_ = 0;
};

Matrix sample_covariance(const Matrix& x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

}  // namespace

// ---------------------------------------------------------------- discrete grid

TEST(RewardGrid, GroundTruthLayout) {
  GridRewardConfig cfg;
  const std::vector<Shift> none(4, Shift::kNone);
  RewardGrid g(cfg, none);
  EXPECT_EQ(g.value(2, 2), 200.0);
  EXPECT_EQ(g.value(1, 2), 40.0);
  EXPECT_EQ(g.value(7, 8), 40.0);
  EXPECT_EQ(g.value(0, 0), 0.1);
  for (double v : g.cells()) EXPECT_TRUE(v == 0.1 || v == 40.0 || v == 200.0);
}

TEST(RewardGrid, ShiftMovesThePlus) {
  GridRewardConfig cfg;
  const std::vector<Shift> s{Shift::kUp, Shift::kNone, Shift::kNone, Shift::kRight};
  RewardGrid g(cfg, s);
  EXPECT_EQ(g.value(1, 2), 200.0);
  EXPECT_EQ(g.value(2, 2), 40.0);
  EXPECT_EQ(g.value(7, 8), 200.0);
  EXPECT_EQ(g.shifts()[0], Shift::kUp);
}

TEST(RewardGrid, BoundaryShiftIsClippedToNone) {
  GridRewardConfig cfg;
  cfg.centres = {{1, 1}};
  const std::vector<Shift> s{Shift::kUp};
  RewardGrid g(cfg, s);
  EXPECT_EQ(g.shifts()[0], Shift::kNone);
  EXPECT_EQ(g.value(1, 1), 200.0);
}

TEST(RewardGrid, ZeroShiftProbabilityKeepsGroundTruth) {
  GridRewardConfig cfg;
  cfg.p_shift = 0.0;
  Rng rng(1);
  const RewardGrid truth(cfg, std::vector<Shift>(4, Shift::kNone));
  for (int k = 0; k < 20; ++k) EXPECT_EQ(sample_discrete_reward(cfg, rng), truth);
}

TEST(RewardGrid, EnumerationGivesSixHundredTwentyFiveDistinctGrids) {
  const auto grids = enumerate_reward_grids(GridRewardConfig{});
  ASSERT_EQ(grids.size(), 625u);
  std::set<std::vector<double>> distinct;
  for (const auto& g : grids) distinct.insert(g.cells());
  EXPECT_EQ(distinct.size(), 625u);
}

TEST(RewardGrid, ShiftFrequencyMatchesProbability) {
  GridRewardConfig cfg;
  Rng rng(2);
  std::vector<double> shifted(4, 0.0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const auto g = sample_discrete_reward(cfg, rng);
    for (std::size_t p = 0; p < 4; ++p) shifted[p] += g.shifts()[p] != Shift::kNone;
  }
  for (double s : shifted) EXPECT_NEAR(s / draws, 0.5, 0.02);
}

TEST(RewardGrid, JsonRoundTripAndOneHot) {
  GridRewardConfig cfg;
  Rng rng(3);
  const auto g = sample_discrete_reward(cfg, rng);
  const auto copy = RewardGrid::from_json(g.to_json());
  EXPECT_EQ(copy, g);
  EXPECT_EQ(copy.shifts(), g.shifts());
  const Vector oh = g.one_hot();
  ASSERT_EQ(oh.size(), 300);
  EXPECT_DOUBLE_EQ(oh.sum(), 100.0);
  EXPECT_EQ(oh(2 * 100 + 2 * 10 + 2), g.level(2, 2) == 2 ? 1.0 : 0.0);
  EXPECT_EQ(GridRewardConfig::from_json(cfg.to_json()).centres, cfg.centres);
  for (auto s : {Shift::kNone, Shift::kUp, Shift::kDown, Shift::kLeft, Shift::kRight})
    EXPECT_EQ(shift_from_string(to_string(s)), s);
}

TEST(DiscreteGrid, CornerLowCellHasTwoMovesAndNoStop) {
  DiscreteGridEnv env(RewardGrid(GridRewardConfig{}, std::vector<Shift>(4, Shift::kNone)));
  const auto m = env.valid_actions(env.state_at({0, 0}));
  EXPECT_EQ(m, (gfn::ActionMask{0, 1, 0, 1, 0}));
}

TEST(DiscreteGrid, HighCellAllowsStopAndMasksRevisits) {
  DiscreteGridEnv env(RewardGrid(GridRewardConfig{}, std::vector<Shift>(4, Shift::kNone)));
  const auto fresh = env.valid_actions(env.state_at({2, 2}));
  EXPECT_EQ(count_valid(fresh), 5);
  const int path[] = {kRight, kLeft};
  EXPECT_THROW(env.follow({2, 1}, path), UsageError);
  const int ok[] = {kRight};
  const auto states = env.follow({2, 1}, ok);
  const auto m = env.valid_actions(states.back());
  EXPECT_EQ(m[kLeft], 0);
  EXPECT_EQ(m[kStop], 1);
}

TEST(DiscreteGrid, TrappedStateOnlyStops) {
  DiscreteGridEnv env(RewardGrid(GridRewardConfig{}, std::vector<Shift>(4, Shift::kNone)));
  // Walk around so both neighbours of the corner (0,0) are visited.
  const int trap[] = {kRight, kUp, kLeft};
  const auto t = env.follow({1, 0}, trap);
  EXPECT_EQ(t.back().row, 0);
  EXPECT_EQ(t.back().col, 0);
  EXPECT_EQ(env.valid_actions(t.back()), (gfn::ActionMask{0, 0, 0, 0, 1}));
}

TEST(DiscreteGrid, RandomWalksAreShortSimplePaths) {
  DiscreteGridEnv env(RewardGrid(GridRewardConfig{}, std::vector<Shift>(4, Shift::kNone)));
  Rng rng(4);
  Rng model_rng(5);
  gfn::MlpGfnModel model(env.encoding_size(), 5, {16}, false, model_rng);
  const auto trajs = gfn::sample_trajectories(model, env, 500, {1.0, 1.0}, rng);
  for (const auto& t : trajs) {
    ASSERT_LE(t.length(), 20u);
    std::set<std::pair<int, int>> cells;
    for (std::size_t k = 0; k + 1 < t.states.size(); ++k) cells.insert({t.states[k].row, t.states[k].col});
    EXPECT_EQ(cells.size(), t.states.size() - 1);
    const auto& last = t.states.back();
    const double r = std::exp(t.log_reward);
    const auto& prev = t.states[t.states.size() - 2];
    const bool trapped = count_valid(env.valid_actions(prev)) == 1;
    if (!trapped) EXPECT_GE(r, 40.0 - 1e-9);
    EXPECT_TRUE(last.done);
  }
}

TEST(DiscreteGrid, EncodingLayout) {
  DiscreteGridEnv env(RewardGrid(GridRewardConfig{}, std::vector<Shift>(4, Shift::kNone)));
  const int path[] = {kRight};
  const auto states = env.follow({3, 4}, path);
  const Matrix x = env.encode(states);
  ASSERT_EQ(x.rows(), 201);
  EXPECT_EQ(x(3 * 10 + 5, 1), 1.0);
  EXPECT_EQ(x.col(1).head(100).sum(), 1.0);
  EXPECT_EQ(x(100 + 3 * 10 + 4, 1), 1.0);
  EXPECT_EQ(x(100 + 3 * 10 + 5, 1), 1.0);
  EXPECT_DOUBLE_EQ(x(200, 1), 1.0 / 20.0);
}

// ---------------------------------------------------------------- continuous grid

TEST(ContinuousReward, DensityAtModeAndSymmetry) {
  ContinuousRewardSpec spec;
  spec.means << -5, -5, 5, 5;
  EXPECT_NEAR(spec.density(5, 5), 0.5 / (2 * std::numbers::pi * 0.3), 1e-12);
  spec.means << -1, 0, 1, 0;
  EXPECT_NEAR(spec.density(0, 0.3), 2 * 0.5 / (2 * std::numbers::pi * 0.3) * std::exp(-(1 + 0.09) / 0.6), 1e-12);
}

TEST(ContinuousReward, MatchesDirectFormula) {
  Rng rng(6);
  const auto spec = sample_continuous_spec(ContinuousRewardConfig{}, rng);
  for (int k = 0; k < 100; ++k) {
    const double x = 3 * standard_normal(rng), y = 3 * standard_normal(rng);
    const double v = spec.variance;
    const double d1 = std::pow(x - spec.means(0), 2) + std::pow(y - spec.means(1), 2);
    const double d2 = std::pow(x - spec.means(2), 2) + std::pow(y - spec.means(3), 2);
    const double expected = 0.5 * (std::exp(-d1 / (2 * v)) + std::exp(-d2 / (2 * v))) / (2 * std::numbers::pi * v);
    EXPECT_NEAR(spec.density(x, y), expected, 1e-14);
    EXPECT_NEAR(spec.log_reward(x, y), std::log(expected + 1e-12), 1e-12);
  }
}

TEST(ContinuousReward, IntegratesToOne) {
  Rng rng(7);
  const auto spec = sample_continuous_spec(ContinuousRewardConfig{}, rng);
  const int n = 200000;
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += spec.density(-5 + 10 * uniform01(rng), -5 + 10 * uniform01(rng));
  EXPECT_NEAR(100.0 * s / n, 1.0, 0.02);
}

TEST(ContinuousReward, SpecSamplingMoments) {
  Rng rng(8);
  const int n = 10000;
  Matrix m(n, 4);
  for (int k = 0; k < n; ++k) m.row(k) = sample_continuous_spec(ContinuousRewardConfig{}, rng).latent().transpose();
  const Vector mean = m.colwise().mean().transpose();
  const Vector expected = (Vector(4) << -1, -1, 1, 1).finished();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(mean(i), expected(i), 0.02);
  const Matrix cov = sample_covariance(m);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(cov(i, i), 0.1, 0.01);
  Rng a(9), b(9);
  EXPECT_EQ(sample_continuous_spec(ContinuousRewardConfig{}, a).means,
            sample_continuous_spec(ContinuousRewardConfig{}, b).means);
}

TEST(ContinuousReward, JsonRoundTripAndTask) {
  Rng rng(10);
  const auto spec = sample_continuous_spec(ContinuousRewardConfig{}, rng);
  const auto copy = ContinuousRewardSpec::from_json(spec.to_json());
  EXPECT_EQ(copy.means, spec.means);
  EXPECT_EQ(copy.variance, spec.variance);
  const auto task = make_continuous_task(spec);
  EXPECT_EQ(task.steps, 5);
  EXPECT_DOUBLE_EQ(task.log_reward(0.2, -0.4), spec.log_reward(0.2, -0.4));
  EXPECT_EQ(ContinuousRewardConfig::from_json(ContinuousRewardConfig{}.to_json()).mean_variance, 0.1);
}

// ---------------------------------------------------------------- symbolic regression

TEST(SymReg, TokenNamesRoundTrip) {
  for (int t = 0; t < kNumSymActions; ++t) EXPECT_EQ(token_from_name(token_name(t)), t);
  EXPECT_THROW(token_from_name("tan"), UsageError);
}

TEST(SymReg, ShuntingYardExamples) {
  const auto r = [](std::vector<int> t) { return shunting_yard(t); };
  EXPECT_EQ(r({kTwo, kMinus, kX}), (std::vector<int>{kTwo, kX, kMinus}));
  EXPECT_EQ(r({kSin, kX}), (std::vector<int>{kX, kSin}));
  EXPECT_EQ(r({kTwo, kMinus, kX, kPlus, kSin, kX}), (std::vector<int>{kTwo, kX, kMinus, kX, kSin, kPlus}));
  EXPECT_EQ(r({kX, kPlus, kTwo, kTimes, kX}), (std::vector<int>{kX, kTwo, kX, kTimes, kPlus}));
}

TEST(SymReg, ShuntingYardRejectsMalformedInput) {
  const std::vector<int> bad1{kPlus, kX}, bad2{kX, kX}, bad3{kX, kMinus}, bad4{kSin};
  for (const auto* b : {&bad1, &bad2, &bad3, &bad4}) EXPECT_THROW(shunting_yard(*b), ParseError);
  try {
    shunting_yard(bad2);
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 1u);
  }
}

TEST(SymReg, EvalRpnExamples) {
  const std::vector<int> rpn{kTwo, kX, kMinus, kX, kSin, kPlus};
  EXPECT_NEAR(eval_rpn(rpn, std::numbers::pi), 2.0 - std::numbers::pi, 1e-15);
  const std::vector<int> three{kThree};
  EXPECT_EQ(eval_rpn(three, 17.0), 3.0);
  const std::vector<int> under{kPlus}, left{kX, kX};
  EXPECT_THROW(eval_rpn(under, 0.0), ParseError);
  EXPECT_THROW(eval_rpn(left, 0.0), ParseError);
}

TEST(SymReg, ShuntingYardAgreesWithRecursiveDescent) {
  const auto grid = symreg_grid();
  int checked = 0;
  // Exhaustive over every grammar-valid complete expression up to five tokens.
  std::vector<int> prefix;
  std::function<void()> walk = [&] {
    if (is_complete_expression(prefix)) {
      const auto rpn = shunting_yard(prefix);
      for (std::size_t i = 0; i < grid.size(); i += 9) {
        DescentEvaluator ref(prefix, grid[i]);
        ASSERT_NEAR(eval_rpn(rpn, grid[i]), ref.run(), 1e-12);
      }
      ++checked;
    }
    if (prefix.size() == 5) return;
    const auto mask = valid_next_tokens(prefix, 5);
    for (int t = 0; t < kNumExpressionTokens; ++t)
      if (mask[static_cast<std::size_t>(t)]) {
        prefix.push_back(t);
        walk();
        prefix.pop_back();
      }
  };
  walk();
  EXPECT_GT(checked, 1000);

  // Sampled lengths 6 to 10.
  Rng rng(11);
  for (int k = 0; k < 2000; ++k) {
    std::vector<int> t;
    for (;;) {
      const auto mask = valid_next_tokens(t);
      std::vector<int> options;
      for (int a = 0; a < kNumSymActions; ++a)
        if (mask[static_cast<std::size_t>(a)]) options.push_back(a);
      ASSERT_FALSE(options.empty());
      const int a = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
      if (a == kTerminate) break;
      t.push_back(a);
    }
    ASSERT_LE(t.size(), 10u);
    ASSERT_TRUE(is_complete_expression(t));
    const auto rpn = shunting_yard(t);
    for (std::size_t i = 0; i < grid.size(); i += 11) {
      DescentEvaluator ref(t, grid[i]);
      ASSERT_NEAR(eval_rpn(rpn, grid[i]), ref.run(), 1e-12);
    }
  }
}

TEST(SymReg, ValidNextTokensGrammar) {
  const auto empty = valid_next_tokens({});
  for (int t : {kX, kOne, kTwo, kThree, kSin, kCos}) EXPECT_EQ(empty[static_cast<std::size_t>(t)], 1);
  for (int t : {kPlus, kMinus, kTimes, kTerminate}) EXPECT_EQ(empty[static_cast<std::size_t>(t)], 0);
  const std::vector<int> two_minus{kTwo, kMinus};
  const auto m = valid_next_tokens(two_minus);
  EXPECT_EQ(m[kX], 1);
  EXPECT_EQ(m[kSin], 1);
  EXPECT_EQ(m[kTerminate], 0);
  EXPECT_EQ(m[kPlus], 0);
  const std::vector<int> done{kX};
  EXPECT_EQ(valid_next_tokens(done)[kTerminate], 1);
}

TEST(SymReg, CapMasksUncompletableContinuations) {
  // Nine tokens needing one operand: only operands complete within ten.
  const std::vector<int> nine{kX, kPlus, kX, kPlus, kX, kPlus, kX, kPlus, kSin};
  const auto m = valid_next_tokens(nine);
  for (int t = 0; t < kNumSymActions; ++t) EXPECT_EQ(m[static_cast<std::size_t>(t)], is_operand(t) ? 1 : 0);
  // Eight tokens ending in an operator: a unary function would need two more tokens.
  const std::vector<int> eight{kX, kPlus, kX, kPlus, kX, kPlus, kX, kTimes};
  const auto e = valid_next_tokens(eight);
  EXPECT_EQ(e[kSin], 1);
  const std::vector<int> nine_op{kX, kPlus, kX, kPlus, kX, kPlus, kX, kPlus, kX};
  const auto f = valid_next_tokens(nine_op);
  EXPECT_EQ(f[kPlus], 0);
  EXPECT_EQ(f[kTerminate], 1);
  // Every single-token extension against a bounded completion search.
  const std::vector<int> prefix8{kSin, kX, kTimes, kX, kMinus, kCos, kX, kPlus};
  const auto mask = valid_next_tokens(prefix8);
  for (int t = 0; t < kNumExpressionTokens; ++t) {
    std::vector<int> p = prefix8;
    p.push_back(t);
    std::function<bool(std::size_t)> dfs = [&](std::size_t depth) {
      if (is_complete_expression(p)) return true;
      if (p.size() >= 10 || depth == 0) return false;
      for (int u = 0; u < kNumExpressionTokens; ++u) {
        p.push_back(u);
        const bool r = dfs(depth - 1);
        p.pop_back();
        if (r) return true;
      }
      return false;
    };
    EXPECT_EQ(mask[static_cast<std::size_t>(t)], dfs(1) ? 1 : 0) << token_name(t);
  }
}

TEST(SymReg, RewardFormula) {
  Rng rng0(1);
  NoisyTarget exact = make_noisy_target(0.0, rng0);
  const std::vector<int> f{kSin, kX, kPlus, kTwo, kMinus, kX};
  EXPECT_NEAR(expression_reward(exact, f), 2.2, 1e-12);
  NoisyTarget flat = exact;
  std::fill(flat.values.begin(), flat.values.end(), 5.0);
  const std::vector<int> two{kTwo};
  EXPECT_NEAR(expression_reward(flat, two), 1.2 / 10.0, 1e-12);
  Rng rng(12);
  const auto noisy = make_noisy_target(0.5, rng);
  const std::vector<int> g{kX, kTimes, kCos, kX};
  double mse = 0.0;
  for (std::size_t i = 0; i < noisy.x.size(); ++i) mse += std::pow(noisy.x[i] * std::cos(noisy.x[i]) - noisy.values[i], 2);
  mse /= static_cast<double>(noisy.x.size());
  EXPECT_NEAR(expression_reward(noisy, g), 1.8 / (1.0 + mse), 1e-12);
}

TEST(SymReg, TargetGridAndZeroNoise) {
  const auto grid = symreg_grid();
  ASSERT_EQ(grid.size(), 100u);
  EXPECT_DOUBLE_EQ(grid.front(), std::numbers::pi);
  EXPECT_NEAR(grid.back(), 4 * std::numbers::pi, 1e-12);
  Rng rng(13);
  const auto t = make_noisy_target(0.0, rng);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(t.values[i], symreg_target_function(grid[i]));
}

TEST(SymReg, WienerEndpointVarianceAndIncrements) {
  Rng rng(14);
  const auto grid = symreg_grid();
  const int n = 10000;
  const double sigma = 0.7;
  double s = 0.0, s2 = 0.0, cov = 0.0, v1 = 0.0, v2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto t = make_noisy_target(sigma, rng);
    const auto w = t.noise();
    EXPECT_EQ(w.front(), 0.0);
    s += w.back();
    s2 += w.back() * w.back();
    const double a = w[50] - w[49], b = w[51] - w[50];
    cov += a * b;
    v1 += a * a;
    v2 += b * b;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var / (sigma * sigma * 3 * std::numbers::pi), 1.0, 0.05);
  EXPECT_NEAR(cov / std::sqrt(v1 * v2), 0.0, 0.05);
}

TEST(SymReg, EnvRolloutsTerminateWithinCap) {
  Rng rng(15);
  SymRegEnv env(make_noisy_target(0.5, rng));
  Rng mrng(16);
  gfn::RecurrentGfnModel model(env.vocabulary_size(), 8, 16, {16}, env.num_actions(), false, mrng);
  const auto trajs = gfn::sample_trajectories(model, env, 300, {0.5, 1.5}, rng);
  for (const auto& t : trajs) {
    const auto& toks = t.states.back().tokens;
    EXPECT_LE(toks.size(), 10u);
    EXPECT_TRUE(is_complete_expression(toks));
    EXPECT_NEAR(t.log_reward, std::log(expression_reward(env.target(), toks)), 1e-12);
  }
  const int actions[] = {kTwo, kMinus, kX, kPlus, kSin, kX, kTerminate};
  const auto path = env.follow(actions);
  EXPECT_EQ(path.size(), 8u);
  EXPECT_TRUE(path.back().done);
}

// ---------------------------------------------------------------- structure learning

TEST(StructLearn, ActionCodec) {
  EXPECT_EQ(encode_edge_action(2, 3, 5), 13);
  EXPECT_EQ(encode_edge_action(0, 0, 5), 0);
  for (int a = 0; a < 25; ++a) {
    const auto e = decode_edge_action(a, 5);
    ASSERT_TRUE(e.has_value());
    EXPECT_EQ(encode_edge_action(e->first, e->second, 5), a);
  }
  EXPECT_FALSE(decode_edge_action(25, 5).has_value());
  EXPECT_THROW(decode_edge_action(26, 5), UsageError);
}

TEST(StructLearn, ValidActionMasks) {
  Dag g{5, 0};
  auto m = structure_valid_actions(g);
  EXPECT_EQ(count_valid(m), 21);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(m[static_cast<std::size_t>(6 * i)], 0);
  g.add_edge(0, 1);
  m = structure_valid_actions(g);
  EXPECT_EQ(m[5], 0);
  EXPECT_EQ(m[1], 0);
  g.add_edge(1, 2);
  m = structure_valid_actions(g);
  EXPECT_EQ(m[static_cast<std::size_t>(encode_edge_action(2, 0, 5))], 0);
  EXPECT_EQ(m[25], 1);
}

TEST(StructLearn, RandomTrajectoriesEndAcyclic) {
  Rng rng(17);
  const auto net = LinearGaussianNetwork::sample(default_ground_truth(), 0.01, rng);
  StructureEnv env(BgeScore(sample_dataset(net, 100, rng), BgeHyperparams::defaults(5)));
  gfn::MlpGfnModel model(env.encoding_size(), env.num_actions(), {16}, false, rng);
  for (const auto& t : gfn::sample_trajectories(model, env, 200, {0.7, 1.0}, rng)) {
    EXPECT_TRUE(t.states.back().graph.is_acyclic());
    EXPECT_NEAR(t.log_reward, env.bge().score(t.states.back().graph) - env.bge().score(Dag{5, 0}), 1e-9);
    for (std::size_t k = 0; k + 1 < t.length(); ++k)
      EXPECT_NEAR(t.log_backward[k], -std::log(static_cast<double>(t.states[k + 1].graph.num_edges())), 1e-15);
  }
}

TEST(StructLearn, DatasetMoments) {
  Rng rng(18);
  LinearGaussianNetwork empty{Dag{5, 0}, Matrix::Zero(5, 5), 0.01};
  const Matrix x = sample_dataset(empty, 10000, rng);
  const Matrix c = sample_covariance(x);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(c(i, i) / 0.01, 1.0, 0.15);

  LinearGaussianNetwork chain{Dag{2, 0}.with_edges(std::vector<std::pair<int, int>>{{0, 1}}), Matrix::Zero(2, 2), 0.01};
  chain.weights(0, 1) = 1.0;
  const Matrix cx = sample_covariance(sample_dataset(chain, 10000, rng));
  EXPECT_NEAR(cx(1, 1), cx(0, 0) + 0.01, 0.002);

  LinearGaussianNetwork three{Dag{3, 0}.with_edges(std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}}),
                              Matrix::Zero(3, 3), 0.5};
  three.weights(0, 1) = 0.8;
  three.weights(0, 2) = -1.2;
  three.weights(1, 2) = 0.5;
  const Matrix emp = sample_covariance(sample_dataset(three, 10000, rng));
  // (I - B)^{-T} Sigma (I - B)^{-1} computed independently by propagating x = B^T x + e.
  Matrix b = three.weights;
  Matrix a = (Matrix::Identity(3, 3) - b.transpose()).inverse();
  const Matrix analytic = a * (0.5 * Matrix::Identity(3, 3)) * a.transpose();
  EXPECT_TRUE(analytic.isApprox(three.covariance(), 1e-12));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(emp(i, j), analytic(i, j), 0.1 * std::abs(analytic(i, i)));
}

TEST(StructLearn, RMatrixCases) {
  const auto h = BgeHyperparams::defaults(3);
  EXPECT_DOUBLE_EQ(h.alpha_w, 5.0);
  EXPECT_DOUBLE_EQ(h.t(0, 0), 0.5);
  EXPECT_EQ(r_matrix(Matrix(0, 3), h), h.t);
  Rng rng(19);
  Matrix x = Matrix::Random(20, 3);
  auto centred = h;
  centred.nu = x.colwise().mean().transpose();
  const Matrix c = x.rowwise() - x.colwise().mean();
  EXPECT_TRUE(r_matrix(x, centred).isApprox(h.t + c.transpose() * c, 1e-12));
  for (int k = 0; k < 1000; ++k) {
    const Matrix d = Matrix::Random(8, 3);
    const Matrix r = r_matrix(d, h);
    EXPECT_TRUE(r.isApprox(r.transpose(), 1e-14));
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(r).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(StructLearn, BgeScoreEquivalence) {
  Rng rng(20);
  Matrix x = Matrix::Random(50, 2);
  x.col(1) += 2.0 * x.col(0);
  BgeScore s(x, BgeHyperparams::defaults(2));
  const Dag fwd = Dag{2, 0}.with_edges(std::vector<std::pair<int, int>>{{0, 1}});
  const Dag bwd = Dag{2, 0}.with_edges(std::vector<std::pair<int, int>>{{1, 0}});
  EXPECT_NEAR(s.score(fwd), s.score(bwd), 1e-9);
  EXPECT_GT(s.score(fwd), s.score(Dag{2, 0}));
}

TEST(StructLearn, BgeScoreLabelPermutationInvariance) {
  Rng rng(21);
  const auto net = LinearGaussianNetwork::sample(default_ground_truth(), 0.01, rng);
  const Matrix x = sample_dataset(net, 100, rng);
  const BgeScore s(x, BgeHyperparams::defaults(5));
  const int perm[] = {3, 0, 4, 1, 2};
  Matrix xp(x.rows(), 5);
  for (int i = 0; i < 5; ++i) xp.col(perm[i]) = x.col(i);
  const BgeScore sp(xp, BgeHyperparams::defaults(5));
  Dag gp{5, 0};
  for (const auto& [i, j] : net.graph.edge_list()) gp.add_edge(perm[i], perm[j]);
  EXPECT_NEAR(s.score(net.graph), sp.score(gp), 1e-9);
}

TEST(StructLearn, BgeOneNodeMatchesNormalGammaClosedForm) {
  Rng rng(22);
  Matrix x(30, 1);
  for (int i = 0; i < 30; ++i) x(i, 0) = 0.3 + 0.8 * standard_normal(rng);
  const auto h = BgeHyperparams::defaults(1);
  const BgeScore s(x, h);
  // Normal-gamma conjugate marginal with kappa0 = alpha_mu, a0 = alpha_w / 2, b0 = t / 2.
  const double n = 30, k0 = h.alpha_mu, a0 = h.alpha_w / 2, b0 = h.t(0, 0) / 2;
  const double mean = x.mean();
  const double ss = (x.array() - mean).square().sum();
  const double bn = b0 + 0.5 * ss + k0 * n * mean * mean / (2 * (k0 + n));
  const double expected = std::lgamma(a0 + n / 2) - std::lgamma(a0) + a0 * std::log(b0) - (a0 + n / 2) * std::log(bn) +
                          0.5 * std::log(k0 / (k0 + n)) - 0.5 * n * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(s.score(Dag{1, 0}), expected, 1e-9);
}

TEST(StructLearn, StrongCouplingIsDetected) {
  Rng rng(23);
  int wins = 0;
  const Dag edge = Dag{2, 0}.with_edges(std::vector<std::pair<int, int>>{{0, 1}});
  for (int k = 0; k < 100; ++k) {
    LinearGaussianNetwork net{edge, Matrix::Zero(2, 2), 0.01};
    net.weights(0, 1) = 2.0;
    const BgeScore s(sample_dataset(net, 100, rng), BgeHyperparams::defaults(2));
    wins += s.score(edge) > s.score(Dag{2, 0});
  }
  EXPECT_GE(wins, 95);
}

TEST(StructLearn, DagEnumerationCounts) {
  EXPECT_EQ(enumerate_dags(1).size(), 1u);
  EXPECT_EQ(enumerate_dags(2).size(), 3u);
  EXPECT_EQ(enumerate_dags(3).size(), 25u);
  EXPECT_EQ(enumerate_dags(4).size(), 543u);
}

TEST(StructLearn, DagJsonAndValidation) {
  const Dag g = default_ground_truth();
  EXPECT_EQ(g.num_edges(), 7);
  EXPECT_EQ(Dag::from_json(g.to_json()), g);
  nlohmann::json cyclic = {{"nodes", 2}, {"edges", {{0, 1}, {1, 0}}}};
  EXPECT_THROW(Dag::from_json(cyclic), UsageError);
  EXPECT_EQ(g.parents(4), (1u << 1) | (1u << 2) | (1u << 3));
}

TEST(StructLearn, NonPositiveDefiniteIsNumericalError) {
  auto h = BgeHyperparams::defaults(2);
  h.t = Matrix::Zero(2, 2);
  EXPECT_THROW(BgeScore(Matrix::Zero(3, 2), h), NumericalError);
}
