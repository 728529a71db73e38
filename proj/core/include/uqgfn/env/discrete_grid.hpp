#pragma once

#include <bitset>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uqgfn/common/rng.hpp"
#include "uqgfn/gfn/trajectory.hpp"

namespace uqgfn::env {

using Cell = std::pair<int, int>;  // (row, col)

enum class Shift { kNone, kUp, kDown, kLeft, kRight };
std::string_view to_string(Shift s);
Shift shift_from_string(std::string_view name);

struct GridRewardConfig {
  int size = 10;
  std::vector<Cell> centres{{2, 2}, {2, 7}, {7, 2}, {7, 7}};
  double low = 0.1;
  double mid = 40.0;
  double high = 200.0;
  double p_shift = 0.5;

  nlohmann::json to_json() const;
  static GridRewardConfig from_json(const nlohmann::json& doc);
};

/// Square reward grid built from plus shapes (high centre, mid arms) on a low background.
class RewardGrid {
 public:
  RewardGrid() = default;
  /// Places each plus at its centre moved by one cell in the direction of its shift.
  /// A shift that would push part of the plus off the grid is replaced by kNone.
  RewardGrid(const GridRewardConfig& config, std::span<const Shift> shifts);

  int size() const { return size_; }
  double value(int row, int col) const { return cells_[index(row, col)]; }
  /// 0 = low, 1 = mid, 2 = high.
  int level(int row, int col) const { return levels_[index(row, col)]; }
  const std::vector<Shift>& shifts() const { return shifts_; }
  const std::vector<double>& cells() const { return cells_; }

  /// Level one-hot, level-major: entry level * size^2 + row * size + col.
  Vector one_hot() const;
  /// Same layout as one_hot for a level table (size^2 entries in 0..2).
  static Vector one_hot_levels(std::span<const int> levels);

  bool operator==(const RewardGrid& other) const { return cells_ == other.cells_; }

  nlohmann::json to_json() const;
  static RewardGrid from_json(const nlohmann::json& doc);

 private:
  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row * size_ + col); }

  int size_ = 0;
  std::vector<double> cells_;
  std::vector<int> levels_;
  std::vector<Shift> shifts_;
};

/// Each plus shifts with probability p_shift, direction uniform over the four.
RewardGrid sample_discrete_reward(const GridRewardConfig& config, Rng& rng);
/// The grid for every shift tuple (5^k of them), in lexicographic shift order.
std::vector<RewardGrid> enumerate_reward_grids(const GridRewardConfig& config);

enum GridAction { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kStop = 4 };

/// Self-avoiding walk on a RewardGrid. The state is the whole path (cell, visited set,
/// step count), so every state has exactly one parent and P_B = 1.
class DiscreteGridEnv {
 public:
  static constexpr int kMaxCells = 128;

  struct State {
    int row = 0;
    int col = 0;
    int steps = 0;
    bool done = false;
    std::bitset<kMaxCells> visited;

    bool operator==(const State& other) const {
      return row == other.row && col == other.col && steps == other.steps && done == other.done &&
             visited == other.visited;
    }
  };

  DiscreteGridEnv(RewardGrid grid, int max_length = 20, std::optional<Cell> start = std::nullopt);

  const RewardGrid& grid() const { return grid_; }
  int max_length() const { return max_length_; }

  int num_actions() const { return 5; }
  State initial_state(Rng& rng) const;
  State state_at(const Cell& start) const;
  gfn::ActionMask valid_actions(const State& s) const;
  State step(const State& s, int action) const;
  bool is_terminal(const State& s) const { return s.done; }
  double log_reward(const State& s) const;
  double log_backward(const State&, const State&) const { return 0.0; }

  int encoding_size() const { return 2 * cells() + 1; }
  /// One-hot position, visited mask and steps / max_length per column.
  Matrix encode(std::span<const State> states) const;

  /// Follows a move/Stop sequence from `start`; throws UsageError on an invalid action.
  std::vector<State> follow(const Cell& start, std::span<const int> actions) const;

 private:
  int cells() const { return grid_.size() * grid_.size(); }

  RewardGrid grid_;
  int max_length_;
  std::optional<Cell> start_;
};

}  // namespace uqgfn::env
