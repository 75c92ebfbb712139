#include "cgrpo/gridworld.hpp"

#include "cgrpo/rng.hpp"

#include <algorithm>
#include <cmath>

namespace cgrpo {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("GridConfig.") + field + ": " + what);
}

bool is_ratio(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

// Snap to a 1e-12 grid so repeated drains land on thresholds exactly
// (1.0 - 18 * 0.05 must compare equal to 0.10, not just below it).
double snap_battery(double b) {
  b = std::clamp(b, 0.0, 1.0);
  return std::round(b * 1e12) / 1e12;
}

}  // namespace

void GridConfig::validate() const {
  require(width >= 1 && height >= 1, "width/height", "must be >= 1");
  require(num_cells() >= 2, "width*height", "need at least two cells");
  require(std::isfinite(lava_fraction) && lava_fraction >= 0.0 && lava_fraction < 1.0,
          "lava_fraction", "must be in [0, 1)");
  require(max_steps >= 1, "max_steps", "must be >= 1");
  require(is_ratio(battery_drain), "battery_drain", "must be in [0, 1]");
  require(is_ratio(battery_recharge), "battery_recharge", "must be in [0, 1]");
  require(is_ratio(battery_low_threshold), "battery_low_threshold", "must be in [0, 1]");
  require(std::isfinite(goal_reward) && goal_reward >= 0.0, "goal_reward", "must be finite and >= 0");
  require(num_lava_cells() <= num_cells() - 1, "lava_fraction", "leaves no room for the goal");
}

int GridConfig::num_lava_cells() const {
  return static_cast<int>(std::lround(lava_fraction * num_cells()));
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::North: return "North";
    case Action::South: return "South";
    case Action::East: return "East";
    case Action::West: return "West";
    case Action::Stay: return "Stay";
  }
  return "?";
}

GridWorld::GridWorld(GridConfig config) : config_(config) { config_.validate(); }

bool GridWorld::in_bounds(Cell c) const {
  return c.x >= 0 && c.y >= 0 && c.x < config_.width && c.y < config_.height;
}

bool GridWorld::is_lava(const EpisodeState& state, Cell c) const {
  return in_bounds(c) && state.lava[static_cast<std::size_t>(c.y * config_.width + c.x)] != 0;
}

EpisodeState GridWorld::reset(std::uint64_t seed) const {
  Rng rng(seed);
  const int n = config_.num_cells();
  const auto cell_of = [&](int idx) { return Cell{idx % config_.width, idx / config_.width}; };

  EpisodeState s;
  const int goal_idx = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
  s.goal = cell_of(goal_idx);

  // Partial Fisher-Yates over the non-goal cells.
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    if (i != goal_idx) candidates.push_back(i);
  }
  s.lava.assign(static_cast<std::size_t>(n), 0);
  const int lava_count = config_.num_lava_cells();
  for (int i = 0; i < lava_count; ++i) {
    const auto remaining = static_cast<std::uint64_t>(candidates.size() - static_cast<std::size_t>(i));
    const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.index(remaining));
    std::swap(candidates[static_cast<std::size_t>(i)], candidates[j]);
    s.lava[static_cast<std::size_t>(candidates[static_cast<std::size_t>(i)])] = 1;
  }

  int start_idx = static_cast<int>(rng.index(static_cast<std::uint64_t>(n - 1)));
  if (start_idx >= goal_idx) ++start_idx;
  s.agent = cell_of(start_idx);
  s.battery = 1.0;
  s.step_count = 0;
  s.done = false;
  return s;
}

StepOutcome GridWorld::step(EpisodeState& state, Action action) const {
  if (state.done) throw EpisodeDone();

  Cell next = state.agent;
  switch (action) {
    case Action::North: --next.y; break;
    case Action::South: ++next.y; break;
    case Action::East: ++next.x; break;
    case Action::West: --next.x; break;
    case Action::Stay: break;
  }
  if (!in_bounds(next)) next = state.agent;
  state.agent = next;

  if (action == Action::Stay) {
    state.battery = snap_battery(state.battery + config_.battery_recharge);
  } else {
    state.battery = snap_battery(state.battery - config_.battery_drain);
  }
  ++state.step_count;

  StepOutcome out;
  out.cost_lava = is_lava(state, state.agent) ? 1 : 0;
  out.cost_battery = state.battery < config_.battery_low_threshold ? 1 : 0;
  if (state.agent == state.goal) {
    out.reward = config_.goal_reward;
    out.terminal = true;
  } else if (state.step_count >= config_.max_steps) {
    out.truncated = true;
  }
  state.done = out.terminal || out.truncated;
  out.observation = observe(state);
  return out;
}

Observation GridWorld::observe(const EpisodeState& state) const {
  Observation obs{};
  const auto norm = [](int v, int dim) { return dim > 1 ? v / static_cast<double>(dim - 1) : 0.0; };
  obs[0] = norm(state.agent.x, config_.width);
  obs[1] = norm(state.agent.y, config_.height);
  obs[2] = norm(state.goal.x, config_.width);
  obs[3] = norm(state.goal.y, config_.height);
  obs[4] = state.battery;
  constexpr int half = kWindow / 2;
  int k = 5;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      obs[static_cast<std::size_t>(k++)] =
          is_lava(state, Cell{state.agent.x + dx, state.agent.y + dy}) ? 1.0 : 0.0;
    }
  }
  return obs;
}

std::string GridWorld::render(const EpisodeState& state) const {
  std::string out;
  out.reserve(static_cast<std::size_t>((config_.width + 1) * config_.height));
  for (int y = 0; y < config_.height; ++y) {
    for (int x = 0; x < config_.width; ++x) {
      const Cell c{x, y};
      if (c == state.agent) {
        out.push_back('A');
      } else if (c == state.goal) {
        out.push_back('G');
      } else if (is_lava(state, c)) {
        out.push_back('#');
      } else {
        out.push_back('.');
      }
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace cgrpo
