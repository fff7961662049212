#include "adacong/gridworld.hpp"

#include <cmath>
#include <cstdlib>
#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace adacong::grid {

namespace {

constexpr std::array<std::pair<int, int>, kNumActions> kDeltas = {{
    {-1, 0},  // Left
    {+1, 0},  // Right
    {0, -1},  // Up
    {0, +1},  // Down
    {0, 0},   // Stay
}};

Cell moved(Cell c, Action a) {
  const auto [dx, dy] = kDeltas[static_cast<std::size_t>(a)];
  return {c.x + dx, c.y + dy};
}

constexpr const char* kLava1 =
    "S.........\n"
    "..........\n"
    "LLLLLLLL..\n"
    "..........\n"
    "..........\n"
    "..LLLLLLLL\n"
    "..........\n"
    "..........\n"
    "LLLLLLLL..\n"
    ".........G\n";

// Shifted variant of Lava 1: the first lava band matches, the later bands and
// the goal move, so a policy cloned on Lava 1 is only partially transferable.
constexpr const char* kLava2 =
    "S.........\n"
    "..........\n"
    "LLLLLLLL..\n"
    "..........\n"
    "..........\n"
    "LLLL..LLLL\n"
    "..........\n"
    "..........\n"
    "..LLLLLLLL\n"
    "G.........\n";

constexpr const char* kDoor =
    "S...#..#..\n"
    "....#..#..\n"
    "....D..#..\n"
    "....#..#..\n"
    "....#..#..\n"
    "....#..#..\n"
    "....#..D..\n"
    "....#..#..\n"
    "....#..#..\n"
    "....#..#.G\n";

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Lava1: return "lava1";
    case Variant::Lava2: return "lava2";
    case Variant::Door: return "door";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "lava1") return Variant::Lava1;
  if (name == "lava2") return Variant::Lava2;
  if (name == "door") return Variant::Door;
  throw std::invalid_argument("unknown environment '" + name + "'");
}

int GridEnv::manhattan_to_goal(Cell c) const {
  return std::abs(c.x - goal.x) + std::abs(c.y - goal.y);
}

GridEnv parse_grid(const std::string& text, Variant variant) {
  GridEnv env;
  env.variant = variant;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("grid text is empty");
  env.height = static_cast<int>(rows.size());
  env.width = static_cast<int>(rows.front().size());
  env.tiles.assign(static_cast<std::size_t>(env.width) * env.height, Tile::Free);

  bool have_start = false;
  bool have_goal = false;
  for (int y = 0; y < env.height; ++y) {
    if (static_cast<int>(rows[y].size()) != env.width) {
      throw std::invalid_argument("grid rows have inconsistent widths");
    }
    for (int x = 0; x < env.width; ++x) {
      Tile t = Tile::Free;
      switch (rows[y][static_cast<std::size_t>(x)]) {
        case '.': t = Tile::Free; break;
        case '#': t = Tile::Wall; break;
        case 'L': t = Tile::Lava; break;
        case 'D': t = Tile::Door; break;
        case 'S':
          if (have_start) throw std::invalid_argument("grid has multiple start cells");
          env.start = {x, y};
          have_start = true;
          break;
        case 'G':
          if (have_goal) throw std::invalid_argument("grid has multiple goal cells");
          env.goal = {x, y};
          have_goal = true;
          break;
        default:
          throw std::invalid_argument(std::string("unknown grid character '") +
                                      rows[y][static_cast<std::size_t>(x)] + "'");
      }
      env.tiles[static_cast<std::size_t>(y) * env.width + x] = t;
    }
  }
  if (!have_start || !have_goal) throw std::invalid_argument("grid needs one S and one G");
  if (goal_distances(env)[static_cast<std::size_t>(env.state_id(env.start))] < 0) {
    throw std::invalid_argument("no path from start to goal");
  }
  return env;
}

std::string layout_text(Variant variant) {
  switch (variant) {
    case Variant::Lava1: return kLava1;
    case Variant::Lava2: return kLava2;
    case Variant::Door: return kDoor;
  }
  throw std::logic_error("unreachable variant");
}

GridEnv make_env(Variant variant) { return parse_grid(layout_text(variant), variant); }

StepResult step(const GridEnv& env, Cell state, Action action, int step_index) {
  if (!env.in_bounds(state)) throw std::invalid_argument("step: state out of bounds");
  if (step_index < 1) throw std::invalid_argument("step: step index must be >= 1");

  Cell next = moved(state, action);
  if (!env.walkable(next)) next = state;  // blocked by wall or bounds

  StepResult result;
  result.next = next;
  if (env.tile(next) == Tile::Lava) {
    result.reward = -1.0;
    result.done = true;
    return result;
  }
  if (next == env.goal) {
    result.reward =
        10.0 - 9.0 * static_cast<double>(step_index) / static_cast<double>(env.max_steps);
    result.done = true;
    return result;
  }
  result.reward = -static_cast<double>(env.manhattan_to_goal(next)) /
                  static_cast<double>(env.max_steps);
  return result;
}

CategoricalPolicy::CategoricalPolicy(int num_states, double floor)
    : table_(static_cast<std::size_t>(num_states), kNumActions), floor_(floor) {
  if (floor < 0.0 || floor * kNumActions >= 1.0) {
    throw std::invalid_argument("policy floor must lie in [0, 1/5)");
  }
  for (std::size_t s = 0; s < table_.rows; ++s) {
    for (std::size_t a = 0; a < kNumActions; ++a) table_.at(s, a) = 1.0 / kNumActions;
  }
}

CategoricalPolicy CategoricalPolicy::uniform(int num_states, double floor) {
  return CategoricalPolicy(num_states, floor);
}

void CategoricalPolicy::set_row(int state, std::array<double, kNumActions> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("policy probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("policy row must sum to 1");
  }
  // Mix with uniform so each entry is >= floor while the row still sums to 1.
  const double keep = 1.0 - kNumActions * floor_;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    table_.at(static_cast<std::size_t>(state), a) = keep * probs[a] + floor_;
  }
}

int CategoricalPolicy::sample(int state, rng::Stream& stream) const {
  return stream.categorical(row(state));
}

std::vector<int> goal_distances(const GridEnv& env) {
  std::vector<int> dist(static_cast<std::size_t>(env.num_states()), -1);
  std::deque<Cell> queue;
  dist[static_cast<std::size_t>(env.state_id(env.goal))] = 0;
  queue.push_back(env.goal);
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(env.state_id(c))];
    for (int a = 0; a < 4; ++a) {  // Stay never shortens a path
      const Cell n = moved(c, static_cast<Action>(a));
      if (!env.walkable(n) || env.tile(n) == Tile::Lava) continue;
      auto& dn = dist[static_cast<std::size_t>(env.state_id(n))];
      if (dn < 0) {
        dn = d + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

std::vector<Trajectory> generate_expert_demos(const GridEnv& env, std::size_t n_episodes,
                                              rng::Stream& stream) {
  const auto dist = goal_distances(env);
  const int start_d = dist[static_cast<std::size_t>(env.state_id(env.start))];
  if (start_d < 0) throw std::runtime_error("expert demos: goal unreachable from start");

  std::vector<Trajectory> demos;
  demos.reserve(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Trajectory traj;
    Cell c = env.start;
    while (!(c == env.goal)) {
      const int d = dist[static_cast<std::size_t>(env.state_id(c))];
      std::array<Action, 4> ties{};
      std::size_t n_ties = 0;
      for (int a = 0; a < 4; ++a) {
        const Cell n = moved(c, static_cast<Action>(a));
        if (!env.walkable(n) || env.tile(n) == Tile::Lava) continue;
        if (dist[static_cast<std::size_t>(env.state_id(n))] == d - 1) {
          ties[n_ties++] = static_cast<Action>(a);
        }
      }
      const Action a = ties[n_ties == 1 ? 0 : stream.uniform_index(n_ties)];
      traj.emplace_back(env.state_id(c), a);
      c = moved(c, a);
    }
    demos.push_back(std::move(traj));
  }
  return demos;
}

CategoricalPolicy behavior_clone(const std::vector<Trajectory>& demos, int num_states,
                                 double smoothing, double floor) {
  if (demos.empty()) throw std::invalid_argument("behavior_clone: no demonstrations");
  if (smoothing < 0.0) throw std::invalid_argument("behavior_clone: negative smoothing");

  std::vector<std::array<double, kNumActions>> counts(
      static_cast<std::size_t>(num_states), std::array<double, kNumActions>{});
  std::vector<double> totals(static_cast<std::size_t>(num_states), 0.0);
  for (const auto& traj : demos) {
    for (const auto& [state, action] : traj) {
      counts[static_cast<std::size_t>(state)][static_cast<std::size_t>(action)] += 1.0;
      totals[static_cast<std::size_t>(state)] += 1.0;
    }
  }

  CategoricalPolicy policy(num_states, floor);
  for (int s = 0; s < num_states; ++s) {
    const double total = totals[static_cast<std::size_t>(s)];
    if (total == 0.0 && smoothing == 0.0) continue;  // stays uniform
    std::array<double, kNumActions> probs{};
    const double denom = total + kNumActions * smoothing;
    for (std::size_t a = 0; a < kNumActions; ++a) {
      probs[a] = (counts[static_cast<std::size_t>(s)][a] + smoothing) / denom;
    }
    policy.set_row(s, probs);
  }
  return policy;
}

}  // namespace adacong::grid
