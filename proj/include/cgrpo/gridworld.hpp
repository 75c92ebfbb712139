#ifndef CGRPO_GRIDWORLD_HPP_
#define CGRPO_GRIDWORLD_HPP_

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgrpo {

inline constexpr int kNumActions = 5;
inline constexpr int kWindow = 5;
inline constexpr int kObsDim = 5 + kWindow * kWindow;

struct GridConfig {
  int width = 10;
  int height = 10;
  double lava_fraction = 0.20;
  int max_steps = 80;
  double battery_drain = 0.05;          // per movement step
  double battery_recharge = 0.20;       // net gain per Stay step
  double battery_low_threshold = 0.10;  // cost when battery falls below
  double goal_reward = 1.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  int num_cells() const { return width * height; }
  int num_lava_cells() const;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

/// North decreases y (up in the ASCII render), East increases x.
enum class Action : std::uint8_t { North = 0, South = 1, East = 2, West = 3, Stay = 4 };

std::string_view action_name(Action a);

/// Layout: agent xy, goal xy (both normalized by dimension-1), battery,
/// then the 5x5 lava window around the agent in row-major order (dy outer).
using Observation = std::array<double, kObsDim>;

struct EpisodeState {
  Cell agent;
  Cell goal;
  double battery = 1.0;
  std::vector<std::uint8_t> lava;  // row-major, width*height
  int step_count = 0;
  bool done = false;

  bool operator==(const EpisodeState&) const = default;
};

struct StepOutcome {
  Observation observation{};
  double reward = 0.0;
  int cost_lava = 0;
  int cost_battery = 0;
  bool terminal = false;
  bool truncated = false;
};

class EpisodeDone : public std::logic_error {
 public:
  EpisodeDone() : std::logic_error("step() called on a finished episode") {}
};

class GridWorld {
 public:
  explicit GridWorld(GridConfig config = {});

  const GridConfig& config() const { return config_; }

  EpisodeState reset(std::uint64_t seed) const;
  /// Advances `state` in place. Throws EpisodeDone if the episode is over.
  StepOutcome step(EpisodeState& state, Action action) const;
  Observation observe(const EpisodeState& state) const;

  bool in_bounds(Cell c) const;
  bool is_lava(const EpisodeState& state, Cell c) const;

  /// Debug render: `A` agent, `G` goal, `#` lava, `.` free. Row 0 first.
  std::string render(const EpisodeState& state) const;

 private:
  GridConfig config_;
};

}  // namespace cgrpo

#endif  // CGRPO_GRIDWORLD_HPP_
