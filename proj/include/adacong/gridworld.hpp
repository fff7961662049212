#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adacong/rng.hpp"
#include "adacong/tinylearn.hpp"

namespace adacong::grid {

inline constexpr int kNumActions = 5;
inline constexpr int kMaxSteps = 100;

enum class Action : int { Left = 0, Right = 1, Up = 2, Down = 3, Stay = 4 };

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

enum class Tile : std::uint8_t { Free, Wall, Lava, Door };

enum class Variant { Lava1, Lava2, Door };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Fully observable gridworld. Movement into walls or out of bounds leaves the
// agent in place; doors are passable; lava terminates the episode.
struct GridEnv {
  int width = 0;
  int height = 0;
  std::vector<Tile> tiles;  // row-major, y * width + x
  Cell start;
  Cell goal;
  int max_steps = kMaxSteps;
  Variant variant = Variant::Lava1;

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
  }
  Tile tile(Cell c) const { return tiles[static_cast<std::size_t>(c.y) * width + c.x]; }
  bool walkable(Cell c) const {
    return in_bounds(c) && tile(c) != Tile::Wall;
  }
  int state_id(Cell c) const { return c.y * width + c.x; }
  Cell cell_of(int state) const { return {state % width, state / width}; }
  int num_states() const { return width * height; }
  int manhattan_to_goal(Cell c) const;
};

// Parses a text grid. Characters: '.' free, '#' wall, 'L' lava, 'D' door,
// 'S' start, 'G' goal. Rows must share one width; exactly one S and one G.
GridEnv parse_grid(const std::string& text, Variant variant);

// Built-in layouts (the same maps as the fixture files under envs/).
GridEnv make_env(Variant variant);
std::string layout_text(Variant variant);

struct StepResult {
  Cell next;
  double reward = 0.0;
  bool done = false;
};

// One transition. `step_index` is the 1-based count of actions taken in the
// episode including this one; it sets the terminal goal reward
// 10 - 9 * step_index / max_steps. Lava gives -1 and ends the episode; any
// other move costs the normalized Manhattan distance of the resulting cell.
StepResult step(const GridEnv& env, Cell state, Action action, int step_index);

// Per-state distribution over the five actions. Rows are mixed with the
// uniform distribution so every entry stays at or above the floor while still
// summing to one; -log prob therefore stays finite.
class CategoricalPolicy {
 public:
  CategoricalPolicy(int num_states, double floor = 1e-6);

  static CategoricalPolicy uniform(int num_states, double floor = 1e-6);

  void set_row(int state, std::array<double, kNumActions> probs);
  std::span<const double> row(int state) const { return table_.row(state); }
  double prob(int state, Action a) const {
    return table_.at(state, static_cast<std::size_t>(a));
  }
  double floor() const { return floor_; }
  int num_states() const { return static_cast<int>(table_.rows); }
  int sample(int state, rng::Stream& stream) const;

 private:
  tinylearn::Matrix table_;
  double floor_;
};

// One expert trajectory as executed (state, action) pairs; the final goal
// state itself is not recorded since no action is taken there.
using Trajectory = std::vector<std::pair<int, Action>>;

// BFS shortest-path expert. Where several actions tie on remaining distance
// one is drawn uniformly, so demonstrations carry genuine ambiguity.
// Throws std::runtime_error if the goal is unreachable from the start.
std::vector<Trajectory> generate_expert_demos(const GridEnv& env, std::size_t n_episodes,
                                              rng::Stream& stream);

// Count-based behavior cloning with additive smoothing:
// pi(a|s) = (count(s,a) + smoothing) / (count(s) + 5 * smoothing).
// States never visited in the demos fall back to uniform.
CategoricalPolicy behavior_clone(const std::vector<Trajectory>& demos, int num_states,
                                 double smoothing = 0.0, double floor = 1e-6);

// Distance-to-goal table (BFS over walkable, lava-free cells); -1 where the
// goal is unreachable.
std::vector<int> goal_distances(const GridEnv& env);

}  // namespace adacong::grid
