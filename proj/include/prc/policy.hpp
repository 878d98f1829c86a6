#ifndef PRC_POLICY_HPP_
#define PRC_POLICY_HPP_

#include "prc/envs.hpp"

namespace prc {

/// A (possibly stochastic) state-to-action map. `act` must draw all of its
/// randomness from the stream it is handed.
class Policy {
 public:
  virtual ~Policy() = default;
  // Called once per episode before the first action.
  virtual void begin_episode(RandomStream& /*rng*/) {}
  virtual Vec act(const Vec& state, RandomStream& rng) const = 0;
};

enum class BehaviorTag { Random, Medium, Replay, Expert };

inline std::string to_string(BehaviorTag tag) {
  switch (tag) {
    case BehaviorTag::Random: return "random";
    case BehaviorTag::Medium: return "medium";
    case BehaviorTag::Replay: return "replay";
    case BehaviorTag::Expert: return "expert";
  }
  return "?";
}

inline BehaviorTag parse_behavior_tag(std::string_view name) {
  if (name == "random") return BehaviorTag::Random;
  if (name == "medium") return BehaviorTag::Medium;
  if (name == "replay") return BehaviorTag::Replay;
  if (name == "expert") return BehaviorTag::Expert;
  throw ConfigError("unknown quality '" + std::string(name) +
                    "' (expected random|medium|replay|expert)");
}

// states has one more entry than actions/true_rewards (the final state).
struct Trajectory {
  EnvId env_id = EnvId::PointReach;
  BehaviorTag behavior_tag = BehaviorTag::Random;
  std::vector<Vec> states;
  std::vector<Vec> actions;
  std::vector<double> true_rewards;

  std::size_t length() const { return actions.size(); }
  double true_return() const {
    double total = 0.0;
    for (double r : true_rewards) total += r;
    return total;
  }
};

/// Runs one episode from a fresh reset. Actions are clamped into the
/// environment's bounds before stepping.
inline Trajectory rollout(const EnvSpec& spec, Policy& policy, RandomStream& rng) {
  Trajectory traj;
  traj.env_id = spec.env_id;
  Vec state = reset(spec, rng);
  policy.begin_episode(rng);
  traj.states.push_back(state);
  for (int t = 0; t < spec.horizon; ++t) {
    Vec action = clamp_box(policy.act(state, rng), spec.action_low, spec.action_high);
    StepResult res = step(spec, state, action, t);
    traj.actions.push_back(std::move(action));
    traj.true_rewards.push_back(res.true_reward);
    traj.states.push_back(res.next_state);
    state = std::move(res.next_state);
    if (res.done) break;
  }
  return traj;
}

}  // namespace prc

#endif  // PRC_POLICY_HPP_
