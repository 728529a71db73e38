#include "uqgfn/env/discrete_grid.hpp"

#include <cmath>
#include <string>

#include "uqgfn/common/errors.hpp"

namespace uqgfn::env {

namespace {

constexpr int kDeltaRow[] = {0, 0, -1, 1};
constexpr int kDeltaCol[] = {-1, 1, 0, 0};

Cell shifted(const Cell& c, Shift s) {
  switch (s) {
    case Shift::kNone: return c;
    case Shift::kUp: return {c.first - 1, c.second};
    case Shift::kDown: return {c.first + 1, c.second};
    case Shift::kLeft: return {c.first, c.second - 1};
    case Shift::kRight: return {c.first, c.second + 1};
  }
  return c;
}

bool plus_fits(const Cell& c, int size) {
  return c.first - 1 >= 0 && c.first + 1 < size && c.second - 1 >= 0 && c.second + 1 < size;
}

}  // namespace

std::string_view to_string(Shift s) {
  switch (s) {
    case Shift::kNone: return "none";
    case Shift::kUp: return "up";
    case Shift::kDown: return "down";
    case Shift::kLeft: return "left";
    case Shift::kRight: return "right";
  }
  return "none";
}

Shift shift_from_string(std::string_view name) {
  for (Shift s : {Shift::kNone, Shift::kUp, Shift::kDown, Shift::kLeft, Shift::kRight})
    if (to_string(s) == name) return s;
  throw UsageError("unknown shift '" + std::string(name) + "'");
}

nlohmann::json GridRewardConfig::to_json() const {
  nlohmann::json c = nlohmann::json::array();
  for (const auto& [r, col] : centres) c.push_back({r, col});
  return {{"size", size}, {"centres", c}, {"low", low}, {"mid", mid}, {"high", high}, {"p_shift", p_shift}};
}

GridRewardConfig GridRewardConfig::from_json(const nlohmann::json& doc) {
  GridRewardConfig c;
  c.size = doc.value("size", c.size);
  if (doc.contains("centres")) {
    c.centres.clear();
    for (const auto& p : doc.at("centres")) c.centres.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  }
  c.low = doc.value("low", c.low);
  c.mid = doc.value("mid", c.mid);
  c.high = doc.value("high", c.high);
  c.p_shift = doc.value("p_shift", c.p_shift);
  if (c.size < 2 || c.size * c.size > DiscreteGridEnv::kMaxCells) throw UsageError("grid size out of range");
  if (!(c.p_shift >= 0.0 && c.p_shift <= 1.0)) throw UsageError("p_shift must lie in [0, 1]");
  return c;
}

RewardGrid::RewardGrid(const GridRewardConfig& config, std::span<const Shift> shifts)
    : size_(config.size),
      cells_(static_cast<std::size_t>(config.size * config.size), config.low),
      levels_(static_cast<std::size_t>(config.size * config.size), 0) {
  if (shifts.size() != config.centres.size()) throw UsageError("one shift per plus required");
  if (size_ * size_ > DiscreteGridEnv::kMaxCells) throw UsageError("grid too large");
  for (std::size_t p = 0; p < shifts.size(); ++p) {
    if (!plus_fits(config.centres[p], size_)) throw UsageError("plus centre too close to the boundary");
    Shift s = shifts[p];
    if (!plus_fits(shifted(config.centres[p], s), size_)) s = Shift::kNone;
    shifts_.push_back(s);
  }
  auto set = [&](int r, int c, int level, double v) {
    if (levels_[index(r, c)] < level) {
      levels_[index(r, c)] = level;
      cells_[index(r, c)] = v;
    }
  };
  for (std::size_t p = 0; p < shifts_.size(); ++p) {
    const Cell c = shifted(config.centres[p], shifts_[p]);
    for (int d = 0; d < 4; ++d) set(c.first + kDeltaRow[d], c.second + kDeltaCol[d], 1, config.mid);
    set(c.first, c.second, 2, config.high);
  }
}

Vector RewardGrid::one_hot_levels(std::span<const int> levels) {
  const auto n = static_cast<Eigen::Index>(levels.size());
  Vector v = Vector::Zero(3 * n);
  for (Eigen::Index k = 0; k < n; ++k) v(levels[static_cast<std::size_t>(k)] * n + k) = 1.0;
  return v;
}

Vector RewardGrid::one_hot() const { return one_hot_levels(levels_); }

nlohmann::json RewardGrid::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < size_; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < size_; ++c) row.push_back(value(r, c));
    rows.push_back(row);
  }
  nlohmann::json shifts = nlohmann::json::array();
  for (Shift s : shifts_) shifts.push_back(std::string(to_string(s)));
  nlohmann::json levels = levels_;
  return {{"cells", rows}, {"levels", levels}, {"shifts", shifts}};
}

RewardGrid RewardGrid::from_json(const nlohmann::json& doc) {
  RewardGrid g;
  const auto& rows = doc.at("cells");
  g.size_ = static_cast<int>(rows.size());
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != g.size_) throw UsageError("reward grid must be square");
    for (const auto& v : row) g.cells_.push_back(v.get<double>());
  }
  g.levels_ = doc.at("levels").get<std::vector<int>>();
  if (g.levels_.size() != g.cells_.size()) throw UsageError("reward grid level table size mismatch");
  for (const auto& s : doc.at("shifts")) g.shifts_.push_back(shift_from_string(s.get<std::string>()));
  return g;
}

RewardGrid sample_discrete_reward(const GridRewardConfig& config, Rng& rng) {
  std::vector<Shift> shifts;
  for (std::size_t p = 0; p < config.centres.size(); ++p) {
    Shift s = Shift::kNone;
    if (uniform01(rng) < config.p_shift) s = static_cast<Shift>(1 + std::uniform_int_distribution<int>(0, 3)(rng));
    shifts.push_back(s);
  }
  return RewardGrid(config, shifts);
}

std::vector<RewardGrid> enumerate_reward_grids(const GridRewardConfig& config) {
  const std::size_t k = config.centres.size();
  std::size_t total = 1;
  for (std::size_t p = 0; p < k; ++p) total *= 5;
  std::vector<RewardGrid> out;
  out.reserve(total);
  std::vector<Shift> shifts(k);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    for (std::size_t p = k; p-- > 0;) {
      shifts[p] = static_cast<Shift>(rest % 5);
      rest /= 5;
    }
    out.emplace_back(config, shifts);
  }
  return out;
}

DiscreteGridEnv::DiscreteGridEnv(RewardGrid grid, int max_length, std::optional<Cell> start)
    : grid_(std::move(grid)), max_length_(max_length), start_(start) {
  if (grid_.size() < 1) throw UsageError("empty reward grid");
  if (max_length_ < 1) throw UsageError("max path length must be positive");
  if (start_ && (start_->first < 0 || start_->first >= grid_.size() || start_->second < 0 ||
                 start_->second >= grid_.size()))
    throw UsageError("start cell outside the grid");
}

DiscreteGridEnv::State DiscreteGridEnv::state_at(const Cell& start) const {
  State s;
  s.row = start.first;
  s.col = start.second;
  s.visited.set(static_cast<std::size_t>(s.row * grid_.size() + s.col));
  return s;
}

DiscreteGridEnv::State DiscreteGridEnv::initial_state(Rng& rng) const {
  if (start_) return state_at(*start_);
  const int cell = std::uniform_int_distribution<int>(0, cells() - 1)(rng);
  return state_at({cell / grid_.size(), cell % grid_.size()});
}

gfn::ActionMask DiscreteGridEnv::valid_actions(const State& s) const {
  gfn::ActionMask mask(5, 0);
  if (s.done) return mask;
  bool any_move = false;
  // The Stop action counts towards the path length.
  if (s.steps + 1 < max_length_) {
    for (int a = 0; a < 4; ++a) {
      const int r = s.row + kDeltaRow[a], c = s.col + kDeltaCol[a];
      if (r < 0 || c < 0 || r >= grid_.size() || c >= grid_.size()) continue;
      if (s.visited.test(static_cast<std::size_t>(r * grid_.size() + c))) continue;
      mask[static_cast<std::size_t>(a)] = 1;
      any_move = true;
    }
  }
  if (!any_move || grid_.level(s.row, s.col) >= 1) mask[kStop] = 1;
  return mask;
}

DiscreteGridEnv::State DiscreteGridEnv::step(const State& s, int action) const {
  const auto mask = valid_actions(s);
  if (action < 0 || action >= 5 || !mask[static_cast<std::size_t>(action)])
    throw UsageError("invalid grid action " + std::to_string(action));
  State next = s;
  next.steps += 1;
  if (action == kStop) {
    next.done = true;
    return next;
  }
  next.row += kDeltaRow[action];
  next.col += kDeltaCol[action];
  next.visited.set(static_cast<std::size_t>(next.row * grid_.size() + next.col));
  return next;
}

double DiscreteGridEnv::log_reward(const State& s) const { return std::log(grid_.value(s.row, s.col)); }

Matrix DiscreteGridEnv::encode(std::span<const State> states) const {
  const int n = cells();
  Matrix x = Matrix::Zero(encoding_size(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t k = 0; k < states.size(); ++k) {
    const State& s = states[k];
    const auto col = static_cast<Eigen::Index>(k);
    x(s.row * grid_.size() + s.col, col) = 1.0;
    for (int c = 0; c < n; ++c)
      if (s.visited.test(static_cast<std::size_t>(c))) x(n + c, col) = 1.0;
    x(2 * n, col) = static_cast<double>(s.steps) / max_length_;
  }
  return x;
}

std::vector<DiscreteGridEnv::State> DiscreteGridEnv::follow(const Cell& start, std::span<const int> actions) const {
  std::vector<State> path{state_at(start)};
  for (int a : actions) path.push_back(step(path.back(), a));
  return path;
}

}  // namespace uqgfn::env
