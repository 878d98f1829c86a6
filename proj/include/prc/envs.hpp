#ifndef PRC_ENVS_HPP_
#define PRC_ENVS_HPP_

#include "prc/common.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <queue>

namespace prc {

enum class EnvId { PointReach, NarrowPath, GridWorld5x5 };

inline std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::PointReach: return "point-reach";
    case EnvId::NarrowPath: return "narrow-path";
    case EnvId::GridWorld5x5: return "gridworld";
  }
  return "?";
}

inline EnvId parse_env_id(std::string_view name) {
  if (name == "point-reach") return EnvId::PointReach;
  if (name == "narrow-path") return EnvId::NarrowPath;
  if (name == "gridworld") return EnvId::GridWorld5x5;
  throw ConfigError("unknown env '" + std::string(name) +
                    "' (expected point-reach|narrow-path|gridworld)");
}

struct EnvSpec {
  EnvId env_id = EnvId::PointReach;
  int state_dim = 0;
  int action_dim = 0;
  Vec action_low;
  Vec action_high;
  int horizon = 1;
  double dt = 0.0;
  // Monte-Carlo score anchors (uniform-random and scripted-expert policies).
  double random_return = 0.0;
  double expert_return = 1.0;

  bool discrete() const { return env_id == EnvId::GridWorld5x5; }
};

struct StepResult {
  Vec next_state;
  double true_reward = 0.0;
  bool done = false;
};

namespace point_reach {
inline constexpr double kGoalX = 0.8;
inline constexpr double kGoalY = 0.8;
// Diagonal of the [-1,1]^2 start box; rewards saturate at -1 beyond it.
inline const double kMaxDist = 2.0 * std::sqrt(2.0);
inline constexpr double kMaxSpeed = 1.0;
}  // namespace point_reach

namespace narrow_path {
inline constexpr double kHalfWidth = 0.5;
inline constexpr double kProgressScale = 1.0;
inline constexpr double kCliffReward = -1.0;
}  // namespace narrow_path

namespace grid {
inline constexpr int kSide = 5;
// Action indices: up (y+1), down (y-1), right (x+1), left (x-1).
inline constexpr int kUp = 0, kDown = 1, kRight = 2, kLeft = 3;
inline constexpr int kNumActions = 4;

inline int cell_index(int x, int y, int side = kSide) { return y * side + x; }

/// Moves one cell, staying put when the move would leave the grid.
inline std::array<int, 2> move(int x, int y, int action, int side = kSide) {
  switch (action) {
    case kUp: y = std::min(y + 1, side - 1); break;
    case kDown: y = std::max(y - 1, 0); break;
    case kRight: x = std::min(x + 1, side - 1); break;
    case kLeft: x = std::max(x - 1, 0); break;
    default: throw ContractViolation("gridworld: invalid action index");
  }
  return {x, y};
}

inline Vec one_hot(int cell, int n_cells = kSide * kSide) {
  Vec s = Vec::Zero(n_cells);
  s[cell] = 1.0;
  return s;
}

inline int decode_cell(const Vec& state) {
  Eigen::Index idx = 0;
  state.maxCoeff(&idx);
  require(state[idx] == 1.0, "gridworld: state is not one-hot");
  return static_cast<int>(idx);
}

inline int decode_action(const Vec& action) {
  const double rounded = std::round(action[0]);
  require(rounded >= 0 && rounded < kNumActions, "gridworld: action out of range");
  return static_cast<int>(rounded);
}
}  // namespace grid

// Frozen by tools/compute_anchors (10,000 episodes per policy, seed 2024).
namespace anchors {
inline constexpr double kPointReachRandom = -66.0331230837343;
inline constexpr double kPointReachExpert = -5.519618637698842;
inline constexpr double kNarrowPathRandom = -0.7196739495731054;
inline constexpr double kNarrowPathExpert = 9.999999999999998;
inline constexpr double kGridWorldRandom = 0.3236;
inline constexpr double kGridWorldExpert = 1.0;
}  // namespace anchors

inline EnvSpec make_env_spec(EnvId id) {
  EnvSpec spec;
  spec.env_id = id;
  switch (id) {
    case EnvId::PointReach:
      spec.state_dim = 4;
      spec.action_dim = 2;
      spec.action_low = Vec::Constant(2, -1.0);
      spec.action_high = Vec::Constant(2, 1.0);
      spec.horizon = 100;
      spec.dt = 0.1;
      spec.random_return = anchors::kPointReachRandom;
      spec.expert_return = anchors::kPointReachExpert;
      break;
    case EnvId::NarrowPath:
      spec.state_dim = 2;
      spec.action_dim = 2;
      spec.action_low = Vec::Constant(2, -1.0);
      spec.action_high = Vec::Constant(2, 1.0);
      spec.horizon = 100;
      spec.dt = 0.1;
      spec.random_return = anchors::kNarrowPathRandom;
      spec.expert_return = anchors::kNarrowPathExpert;
      break;
    case EnvId::GridWorld5x5:
      spec.state_dim = grid::kSide * grid::kSide;
      spec.action_dim = 1;
      spec.action_low = Vec::Constant(1, 0.0);
      spec.action_high = Vec::Constant(1, grid::kNumActions - 1);
      spec.horizon = 50;
      spec.dt = 0.0;
      spec.random_return = anchors::kGridWorldRandom;
      spec.expert_return = anchors::kGridWorldExpert;
      break;
  }
  return spec;
}

inline Vec reset(const EnvSpec& spec, RandomStream& rng) {
  switch (spec.env_id) {
    case EnvId::PointReach: {
      Vec s = Vec::Zero(4);
      s[0] = rng.uniform(-1.0, 1.0);
      s[1] = rng.uniform(-1.0, 1.0);
      return s;
    }
    case EnvId::NarrowPath: {
      Vec s(2);
      s[0] = 0.0;
      s[1] = rng.uniform(-0.1, 0.1);
      return s;
    }
    case EnvId::GridWorld5x5:
      return grid::one_hot(grid::cell_index(0, 0));
  }
  return {};
}

/// One transition. `step_index` is the zero-based index of this step within
/// the episode; the episode ends once step_index + 1 reaches the horizon.
inline StepResult step(const EnvSpec& spec, const Vec& state, const Vec& action,
                       int step_index) {
  require(state.size() == spec.state_dim, "step: state dimension mismatch");
  require(action.size() == spec.action_dim, "step: action dimension mismatch");
  StepResult out;
  bool terminal = false;
  switch (spec.env_id) {
    case EnvId::PointReach: {
      using namespace point_reach;
      Vec next(4);
      for (int i = 0; i < 2; ++i) {
        const double v = std::clamp(state[2 + i] + action[i] * spec.dt, -kMaxSpeed, kMaxSpeed);
        next[2 + i] = v;
        next[i] = state[i] + v * spec.dt;
      }
      const double dist = std::hypot(next[0] - kGoalX, next[1] - kGoalY);
      out.true_reward = -std::min(1.0, dist / kMaxDist);
      out.next_state = std::move(next);
      break;
    }
    case EnvId::NarrowPath: {
      using namespace narrow_path;
      Vec next(2);
      next[0] = state[0] + action[0] * spec.dt;
      next[1] = state[1] + action[1] * spec.dt;
      if (std::abs(next[1]) <= kHalfWidth) {
        out.true_reward = action[0] * spec.dt * kProgressScale;
      } else {
        out.true_reward = kCliffReward;
        terminal = true;
      }
      out.next_state = std::move(next);
      break;
    }
    case EnvId::GridWorld5x5: {
      const int cell = grid::decode_cell(state);
      const auto [x, y] = grid::move(cell % grid::kSide, cell / grid::kSide,
                                     grid::decode_action(action));
      const int next_cell = grid::cell_index(x, y);
      terminal = next_cell == grid::cell_index(grid::kSide - 1, grid::kSide - 1);
      out.true_reward = terminal ? 1.0 : 0.0;
      out.next_state = grid::one_hot(next_cell);
      break;
    }
  }
  out.done = terminal || step_index + 1 >= spec.horizon;
  return out;
}

inline double normalized_score(const EnvSpec& spec, double raw_return) {
  return 100.0 * (raw_return - spec.random_return) /
         (spec.expert_return - spec.random_return);
}

/// BFS from the start cell; returns the shortest step count to the goal,
/// or nullopt when unreachable.
inline std::optional<int> gridworld_shortest_path(int side = grid::kSide) {
  const int n = side * side;
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::queue<int> frontier;
  dist[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const int c = frontier.front();
    frontier.pop();
    if (c == n - 1) return dist[static_cast<std::size_t>(c)];
    for (int a = 0; a < grid::kNumActions; ++a) {
      const auto [x, y] = grid::move(c % side, c / side, a, side);
      const int nc = grid::cell_index(x, y, side);
      if (dist[static_cast<std::size_t>(nc)] < 0) {
        dist[static_cast<std::size_t>(nc)] = dist[static_cast<std::size_t>(c)] + 1;
        frontier.push(nc);
      }
    }
  }
  return std::nullopt;
}

inline nlohmann::json to_json(const EnvSpec& spec) {
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"env_id", to_string(spec.env_id)},
          {"state_dim", spec.state_dim},
          {"action_dim", spec.action_dim},
          {"action_low", vec(spec.action_low)},
          {"action_high", vec(spec.action_high)},
          {"horizon", spec.horizon},
          {"dt", spec.dt},
          {"random_return", spec.random_return},
          {"expert_return", spec.expert_return}};
}

/// Hash of the full serialized spec; artifacts built against a different
/// environment definition fail this check.
inline std::string env_fingerprint(EnvId id) { return fingerprint(to_json(make_env_spec(id)).dump()); }

inline EnvSpec env_spec_from_json(const nlohmann::json& j) {
  EnvSpec spec;
  spec.env_id = parse_env_id(j.at("env_id").get<std::string>());
  spec.state_dim = j.at("state_dim").get<int>();
  spec.action_dim = j.at("action_dim").get<int>();
  const auto low = j.at("action_low").get<std::vector<double>>();
  const auto high = j.at("action_high").get<std::vector<double>>();
  spec.action_low = Eigen::Map<const Vec>(low.data(), static_cast<Eigen::Index>(low.size()));
  spec.action_high = Eigen::Map<const Vec>(high.data(), static_cast<Eigen::Index>(high.size()));
  spec.horizon = j.at("horizon").get<int>();
  spec.dt = j.at("dt").get<double>();
  spec.random_return = j.at("random_return").get<double>();
  spec.expert_return = j.at("expert_return").get<double>();
  require(spec.action_low.size() == spec.action_dim &&
              (spec.action_low.array() < spec.action_high.array()).all(),
          "EnvSpec: invalid action bounds");
  require(spec.horizon >= 1, "EnvSpec: horizon must be >= 1");
  require(spec.expert_return > spec.random_return, "EnvSpec: anchors out of order");
  return spec;
}

}  // namespace prc

#endif  // PRC_ENVS_HPP_
