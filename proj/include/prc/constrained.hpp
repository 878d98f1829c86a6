#ifndef PRC_CONSTRAINED_HPP_
#define PRC_CONSTRAINED_HPP_

#include "prc/models.hpp"

#include <atomic>
#include <memory>
#include <optional>

namespace prc {

/// Base environment re-parameterized around a frozen deterministic clone:
/// the agent acts with a' in [-r, r]^N and the environment executes
/// f(s, a') = clamp(bc(s) + a', action_low, action_high).
class ConstrainedEnv {
 public:
  ConstrainedEnv(EnvSpec base, std::shared_ptr<const DetPolicy> bc, double radius)
      : ConstrainedEnv(std::move(base), std::move(bc), Vec::Constant(1, radius)) {}

  ConstrainedEnv(EnvSpec base, std::shared_ptr<const DetPolicy> bc, Vec radius)
      : base_(std::move(base)), bc_(std::move(bc)) {
    require(bc_ != nullptr, "ConstrainedEnv: missing behavior clone");
    require(!base_.discrete(), "ConstrainedEnv: box remapping needs a continuous action space");
    require(bc_->action_low.size() == base_.action_dim, "ConstrainedEnv: clone/action dim mismatch");
    if (radius.size() == 1 && base_.action_dim > 1) radius = Vec::Constant(base_.action_dim, radius[0]);
    require(radius.size() == base_.action_dim, "ConstrainedEnv: radius dimension mismatch");
    require((radius.array() >= 0.0).all() && radius.allFinite(), "ConstrainedEnv: radius must be >= 0");
    radius_ = std::move(radius);
  }

  ConstrainedEnv(const ConstrainedEnv& other)
      : base_(other.base_), bc_(other.bc_), radius_(other.radius_) {}

  /// Quarter of the action half-width per dimension.
  static Vec default_radius(const EnvSpec& spec) {
    return 0.25 * 0.5 * (spec.action_high - spec.action_low);
  }

  const EnvSpec& base_spec() const { return base_; }
  const DetPolicy& bc_policy() const { return *bc_; }
  std::shared_ptr<const DetPolicy> bc_ptr() const { return bc_; }
  const Vec& radius() const { return radius_; }
  Vec wrapped_low() const { return -radius_; }
  Vec wrapped_high() const { return radius_; }
  std::size_t clamp_warnings() const { return warnings_.load(); }

  Vec clamp_wrapped(const Vec& a_prime) const {
    require(a_prime.size() == base_.action_dim, "ConstrainedEnv: action dimension mismatch");
    Vec clamped = clamp_box(a_prime, wrapped_low(), wrapped_high());
    if (clamped != a_prime) warnings_.fetch_add(1);
    return clamped;
  }

 private:
  EnvSpec base_;
  std::shared_ptr<const DetPolicy> bc_;
  Vec radius_;
  mutable std::atomic<std::size_t> warnings_{0};
};

/// f(s, a'). Out-of-range a' is first clamped into [-r, r] (and counted).
inline Vec remap_action(const ConstrainedEnv& env, const Vec& state, const Vec& a_prime) {
  const Vec a = env.clamp_wrapped(a_prime);
  const auto& spec = env.base_spec();
  return clamp_box(env.bc_policy().action(state) + a, spec.action_low, spec.action_high);
}

/// P'(s, a') = P(s, f(s, a')).
inline StepResult wrapped_step(const ConstrainedEnv& env, const Vec& state, const Vec& a_prime,
                               int step_index) {
  return step(env.base_spec(), state, remap_action(env, state, a_prime), step_index);
}

/// Pushforward of a wrapped-space policy: draw a' from it, emit f(s, a').
class TranslatedPolicy : public Policy {
 public:
  TranslatedPolicy(std::shared_ptr<const ConstrainedEnv> env, std::shared_ptr<Policy> wrapped)
      : env_(std::move(env)), wrapped_(std::move(wrapped)) {}

  void begin_episode(RandomStream& rng) override { wrapped_->begin_episode(rng); }

  Vec act(const Vec& state, RandomStream& rng) const override {
    return remap_action(*env_, state, wrapped_->act(state, rng));
  }

  const ConstrainedEnv& env() const { return *env_; }

 private:
  std::shared_ptr<const ConstrainedEnv> env_;
  std::shared_ptr<Policy> wrapped_;
};

inline TranslatedPolicy translate_policy(std::shared_ptr<const ConstrainedEnv> env,
                                         std::shared_ptr<Policy> wrapped_policy) {
  return TranslatedPolicy(std::move(env), std::move(wrapped_policy));
}

/// Episode in the wrapped MDP. `actions` holds the wrapped actions a';
/// states and rewards are those of the base environment.
inline Trajectory wrapped_rollout(const ConstrainedEnv& env, Policy& wrapped, RandomStream& rng) {
  const auto& spec = env.base_spec();
  Trajectory traj;
  traj.env_id = spec.env_id;
  Vec state = reset(spec, rng);
  wrapped.begin_episode(rng);
  traj.states.push_back(state);
  for (int t = 0; t < spec.horizon; ++t) {
    Vec a_prime = wrapped.act(state, rng);
    StepResult res = wrapped_step(env, state, a_prime, t);
    traj.actions.push_back(std::move(a_prime));
    traj.true_rewards.push_back(res.true_reward);
    traj.states.push_back(res.next_state);
    state = std::move(res.next_state);
    if (res.done) break;
  }
  return traj;
}

// ---- tabular action sets ----

/// Deterministic finite MDP: next[s * n_actions + a]; terminal states are
/// absorbing and never acted from.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  int start = 0;
  std::vector<int> next;
  std::vector<char> terminal;

  int successor(int s, int a) const {
    return next[static_cast<std::size_t>(s * n_actions + a)];
  }
};

/// side x side grid, start (0,0), terminal goal (side-1, side-1).
inline TabularMdp make_grid_mdp(int side = grid::kSide) {
  require(side >= 2, "make_grid_mdp: side must be >= 2");
  TabularMdp mdp;
  mdp.n_states = side * side;
  mdp.n_actions = grid::kNumActions;
  mdp.start = 0;
  mdp.terminal.assign(static_cast<std::size_t>(mdp.n_states), 0);
  mdp.terminal.back() = 1;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const auto [x, y] = grid::move(s % side, s / side, a, side);
      mdp.next.push_back(grid::cell_index(x, y, side));
    }
  return mdp;
}

/// allowed(s, a) <=> behavior(s, a) >= threshold, with the argmax action
/// kept for any state that would otherwise have none.
struct TabularMask {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> allowed;  // states x actions
  double threshold = 0.0;
  Matrix behavior;
  std::vector<int> fallback_states;

  int n_allowed(int s) const { return static_cast<int>(allowed.row(s).count()); }
};

inline TabularMask build_tabular_mask(const TabularMdp& mdp, const Matrix& behavior, double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractViolation("build_tabular_mask: threshold must lie in (0,1)");
  require(behavior.rows() == mdp.n_states && behavior.cols() == mdp.n_actions,
          "build_tabular_mask: behavior table shape mismatch");
  for (Eigen::Index s = 0; s < behavior.rows(); ++s)
    require(std::abs(behavior.row(s).sum() - 1.0) < 1e-9 && (behavior.row(s).array() >= 0.0).all(),
            "build_tabular_mask: behavior rows must be distributions");
  TabularMask mask;
  mask.threshold = p;
  mask.behavior = behavior;
  mask.allowed = behavior.array() >= p;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mask.n_allowed(s) == 0) {
      Eigen::Index best = 0;
      behavior.row(s).maxCoeff(&best);
      mask.allowed(s, best) = true;
      mask.fallback_states.push_back(s);
    }
  }
  return mask;
}

struct SupportWitness {
  int state = 0;
  int action = 0;
};

/// Detects the infinite-penalty branch of the support constraint: some
/// action with positive policy probability lies outside the allowed set.
inline std::optional<SupportWitness> cp_violation(const Matrix& policy_probs, const TabularMask& mask) {
  require(policy_probs.rows() == mask.allowed.rows() && policy_probs.cols() == mask.allowed.cols(),
          "cp_violation: policy table shape mismatch");
  for (Eigen::Index s = 0; s < policy_probs.rows(); ++s)
    for (Eigen::Index a = 0; a < policy_probs.cols(); ++a)
      if (policy_probs(s, a) > 0.0 && !mask.allowed(s, a))
        return SupportWitness{static_cast<int>(s), static_cast<int>(a)};
  return std::nullopt;
}

struct ContinuousWitness {
  Vec state;
  Vec action;
};

/// Sampling check of a wrapped policy's support against [-r, r]^N.
inline std::optional<ContinuousWitness> cp_violation(Policy& wrapped, const ConstrainedEnv& env,
                                                     std::span<const Vec> states, int samples_per_state,
                                                     RandomStream& rng) {
  const Vec hi = env.radius();
  for (const Vec& s : states)
    for (int k = 0; k < samples_per_state; ++k) {
      Vec a = wrapped.act(s, rng);
      if ((a.array().abs() > hi.array()).any()) return ContinuousWitness{s, a};
    }
  return std::nullopt;
}

/// Empirical per-state action frequencies of the clips; states never seen
/// get the uniform distribution.
inline Matrix estimate_tabular_behavior(const PreferenceDataset& dataset, const TabularMdp& mdp) {
  Matrix counts = Matrix::Zero(mdp.n_states, mdp.n_actions);
  for (const auto& p : dataset.pairs)
    for (const Clip* c : {&p.first, &p.second})
      for (std::size_t t = 0; t < c->size(); ++t)
        counts(grid::decode_cell(c->states[t]), grid::decode_action(c->actions[t])) += 1.0;
  for (Eigen::Index s = 0; s < counts.rows(); ++s) {
    const double total = counts.row(s).sum();
    if (total > 0.0) counts.row(s) /= total;
    else counts.row(s).setConstant(1.0 / static_cast<double>(mdp.n_actions));
  }
  return counts;
}

}  // namespace prc

#endif  // PRC_CONSTRAINED_HPP_
