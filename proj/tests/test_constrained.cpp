#include "prc/prc.hpp"

#include <gtest/gtest.h>

namespace {

using prc::Matrix;
using prc::Vec;

// Clone whose output is the constant `value` on every dimension.
std::shared_ptr<prc::DetPolicy> constant_clone(const prc::EnvSpec& spec, double value) {
  auto p = std::make_shared<prc::DetPolicy>();
  p->net = prc::Mlp::zeros(prc::standard_layer_dims(spec.state_dim, spec.action_dim), prc::Head::Tanh);
  p->action_low = spec.action_low;
  p->action_high = spec.action_high;
  p->net.layers().back().bias.setConstant(std::atanh(value));
  return p;
}

std::shared_ptr<prc::DetPolicy> random_clone(const prc::EnvSpec& spec, std::uint64_t seed) {
  prc::RandomStream rng(seed);
  return std::make_shared<prc::DetPolicy>(prc::DetPolicy::create(spec, rng));
}

struct FixedWrapped : prc::Policy {
  Vec a;
  explicit FixedWrapped(Vec v) : a(std::move(v)) {}
  Vec act(const Vec&, prc::RandomStream&) const override { return a; }
};

std::vector<Vec> sample_states(const prc::EnvSpec& spec, int n, std::uint64_t seed) {
  prc::UniformRandomPolicy random(spec);
  std::vector<Vec> out;
  const auto trajs = prc::collect_trajectories(spec, random, 1 + n / spec.horizon, prc::RandomStream(seed));
  for (const auto& t : trajs)
    for (const auto& s : t.states)
      if (static_cast<int>(out.size()) < n) out.push_back(s);
  return out;
}

const prc::EnvSpec kPoint = prc::make_env_spec(prc::EnvId::PointReach);

TEST(RemapAction, InRangeSum) {
  const prc::ConstrainedEnv env(kPoint, constant_clone(kPoint, 0.3), 0.5);
  const Vec a = prc::remap_action(env, Vec::Zero(4), Vec::Constant(2, 0.5));
  EXPECT_NEAR(a[0], 0.8, 1e-15);
  EXPECT_NEAR(a[1], 0.8, 1e-15);
  EXPECT_EQ(env.clamp_warnings(), 0u);
}

TEST(RemapAction, BoundaryClamp) {
  const prc::ConstrainedEnv env(kPoint, constant_clone(kPoint, 0.9), 0.5);
  EXPECT_EQ(prc::remap_action(env, Vec::Zero(4), Vec::Constant(2, 0.5)), Vec::Constant(2, 1.0));
}

TEST(RemapAction, ZeroRadiusIsClone) {
  const auto bc = random_clone(kPoint, 1);
  const prc::ConstrainedEnv env(kPoint, bc, 0.0);
  for (const auto& s : sample_states(kPoint, 50, 2))
    EXPECT_EQ(prc::remap_action(env, s, Vec::Zero(2)), bc->action(s));
}

TEST(RemapAction, OutOfRangeIsClampedAndCounted) {
  const prc::ConstrainedEnv env(kPoint, constant_clone(kPoint, 0.0), 0.25);
  Vec a(2);
  a << 0.9, -0.1;
  const Vec out = prc::remap_action(env, Vec::Zero(4), a);
  EXPECT_NEAR(out[0], 0.25, 1e-15);
  EXPECT_NEAR(out[1], -0.1, 1e-15);
  EXPECT_EQ(env.clamp_warnings(), 1u);
}

TEST(ConstrainedEnv, RejectsBadConstruction) {
  EXPECT_THROW(prc::ConstrainedEnv(kPoint, constant_clone(kPoint, 0.0), -0.1), prc::ContractViolation);
  EXPECT_THROW(prc::ConstrainedEnv(kPoint, nullptr, 0.1), prc::ContractViolation);
  const auto grid = prc::make_env_spec(prc::EnvId::GridWorld5x5);
  auto bc = std::make_shared<prc::DetPolicy>();
  bc->action_low = grid.action_low;
  bc->action_high = grid.action_high;
  EXPECT_THROW(prc::ConstrainedEnv(grid, bc, 0.1), prc::ContractViolation);
}

TEST(ConstrainedEnv, DefaultRadiusIsQuarterHalfWidth) {
  const Vec r = prc::ConstrainedEnv::default_radius(kPoint);
  EXPECT_EQ(r, Vec::Constant(2, 0.25));
}

TEST(WrappedStep, IsBaseStepOfRemap) {
  const auto bc = random_clone(kPoint, 3);
  const prc::ConstrainedEnv env(kPoint, bc, 0.25);
  prc::RandomStream rng(4);
  for (const auto& s : sample_states(kPoint, 100, 5)) {
    Vec a(2);
    a << rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25);
    const auto w = prc::wrapped_step(env, s, a, 3);
    const auto b = prc::step(kPoint, s, prc::remap_action(env, s, a), 3);
    EXPECT_EQ(w.next_state, b.next_state);
    EXPECT_EQ(w.true_reward, b.true_reward);
    EXPECT_EQ(w.done, b.done);
  }
}

TEST(WrappedStep, ZeroActionFollowsClone) {
  const auto bc = random_clone(kPoint, 6);
  const prc::ConstrainedEnv env(kPoint, bc, 0.25);
  for (const auto& s : sample_states(kPoint, 50, 7)) {
    const auto w = prc::wrapped_step(env, s, Vec::Zero(2), 0);
    const auto b = prc::step(kPoint, s, bc->action(s), 0);
    EXPECT_EQ(w.next_state, b.next_state);
    EXPECT_EQ(w.true_reward, b.true_reward);
  }
}

// A stochastic wrapped policy: Gaussian in [-r, r] with post-sampling clamp.
std::shared_ptr<prc::GaussianPolicy> wrapped_gaussian(int state_dim, const Vec& r, std::uint64_t seed) {
  prc::RandomStream rng(seed);
  auto p = std::make_shared<prc::GaussianPolicy>(prc::GaussianPolicy::create(state_dim, -r, r, rng));
  p->net.layers().back().bias.tail(r.size()).setConstant(std::log(0.3));
  return p;
}

TEST(Translate, DualSimulationIsBitExact) {
  for (prc::EnvId id : {prc::EnvId::PointReach, prc::EnvId::NarrowPath}) {
    const auto spec = prc::make_env_spec(id);
    auto env = std::make_shared<const prc::ConstrainedEnv>(spec, random_clone(spec, 8), 0.25);
    auto pi_star = wrapped_gaussian(spec.state_dim, env->radius(), 9);
    auto translated = prc::translate_policy(env, pi_star);
    for (std::uint64_t k = 0; k < 20; ++k) {
      prc::RandomStream r1(100 + k), r2(100 + k);
      const auto wrapped = prc::wrapped_rollout(*env, *pi_star, r1);
      const auto base = prc::rollout(spec, translated, r2);
      ASSERT_EQ(wrapped.states, base.states);
      ASSERT_EQ(wrapped.true_rewards, base.true_rewards);
      for (std::size_t t = 0; t < base.length(); ++t)
        ASSERT_EQ(base.actions[t], prc::remap_action(*env, wrapped.states[t], wrapped.actions[t]));
    }
  }
}

TEST(Translate, MonteCarloReturnsAgree) {
  auto env = std::make_shared<const prc::ConstrainedEnv>(kPoint, random_clone(kPoint, 10), 0.25);
  auto pi_star = wrapped_gaussian(4, env->radius(), 11);
  auto translated = prc::translate_policy(env, pi_star);
  const prc::RandomStream master(12);
  double wrapped_total = 0.0;
  for (std::uint64_t k = 0; k < 200; ++k) {
    prc::RandomStream rng = master.derive(k);
    wrapped_total += prc::wrapped_rollout(*env, *pi_star, rng).true_return();
  }
  const auto rep = prc::evaluate_policy(kPoint, translated, nullptr, 200, 12);
  EXPECT_NEAR(rep.true_mean, wrapped_total / 200.0, 1e-9);
}

TEST(Translate, PointMassAtZeroIsClone) {
  const auto bc = random_clone(kPoint, 13);
  auto env = std::make_shared<const prc::ConstrainedEnv>(kPoint, bc, 0.25);
  auto translated = prc::translate_policy(env, std::make_shared<FixedWrapped>(Vec::Zero(2)));
  prc::RandomStream rng(14);
  for (const auto& s : sample_states(kPoint, 100, 15)) EXPECT_EQ(translated.act(s, rng), bc->action(s));
}

TEST(Translate, DeterministicWrappedIsClampedSum) {
  const auto bc = random_clone(kPoint, 16);
  auto env = std::make_shared<const prc::ConstrainedEnv>(kPoint, bc, 0.25);
  Vec shift(2);
  shift << 0.2, -0.25;
  auto translated = prc::translate_policy(env, std::make_shared<FixedWrapped>(shift));
  prc::RandomStream rng(17);
  for (const auto& s : sample_states(kPoint, 100, 18))
    EXPECT_EQ(translated.act(s, rng), prc::clamp_box(bc->action(s) + shift, kPoint.action_low, kPoint.action_high));
}

TEST(Support, TranslatedActionsStayWithinRadius) {
  const auto bc = random_clone(kPoint, 19);
  auto env = std::make_shared<const prc::ConstrainedEnv>(kPoint, bc, 0.25);
  auto pi_star = wrapped_gaussian(4, env->radius(), 20);
  auto translated = prc::translate_policy(env, pi_star);
  const auto states = sample_states(kPoint, 10000, 21);
  ASSERT_EQ(states.size(), 10000u);
  prc::RandomStream rng(22);
  for (const auto& s : states) {
    const Vec a = translated.act(s, rng);
    const Vec b = bc->action(s);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 0.25 + 1e-12);
  }
}

TEST(Support, NestedRadii) {
  const auto bc = random_clone(kPoint, 23);
  const prc::ConstrainedEnv small(kPoint, bc, 0.1), large(kPoint, bc, 0.3);
  prc::RandomStream rng(24);
  for (const auto& s : sample_states(kPoint, 500, 25)) {
    // Under the larger radius the same wrapped action is admissible and maps
    // to the same base action, so every r1-reachable action is r2-reachable.
    Vec a(2);
    a << rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1);
    EXPECT_EQ(prc::remap_action(small, s, a), prc::remap_action(large, s, a));
    // The reachable sets are boxes clamp(bc(s) +- r); compare their corners.
    const Vec b = bc->action(s);
    const Vec lo1 = prc::clamp_box(b.array() - 0.1, kPoint.action_low, kPoint.action_high);
    const Vec hi1 = prc::clamp_box(b.array() + 0.1, kPoint.action_low, kPoint.action_high);
    const Vec lo2 = prc::clamp_box(b.array() - 0.3, kPoint.action_low, kPoint.action_high);
    const Vec hi2 = prc::clamp_box(b.array() + 0.3, kPoint.action_low, kPoint.action_high);
    EXPECT_TRUE((lo2.array() <= lo1.array()).all() && (hi1.array() <= hi2.array()).all());
  }
  EXPECT_EQ(small.clamp_warnings() + large.clamp_warnings(), 0u);
}

// ---- tabular ----

Matrix uniform_table(int states, int actions) {
  return Matrix::Constant(states, actions, 1.0 / actions);
}

TEST(TabularMask, UniformBelowThresholdAllowsAll) {
  const auto mdp = prc::make_grid_mdp(5);
  const auto mask = prc::build_tabular_mask(mdp, uniform_table(25, 4), 0.2);
  EXPECT_TRUE(mask.allowed.all());
  EXPECT_TRUE(mask.fallback_states.empty());
}

TEST(TabularMask, UniformAboveThresholdFallsBack) {
  const auto mdp = prc::make_grid_mdp(5);
  const auto mask = prc::build_tabular_mask(mdp, uniform_table(25, 4), 0.3);
  EXPECT_EQ(mask.fallback_states.size(), 25u);
  for (int s = 0; s < 25; ++s) {
    EXPECT_EQ(mask.n_allowed(s), 1);
    EXPECT_TRUE(mask.allowed(s, 0));  // argmax tie resolves to the first index
  }
}

TEST(TabularMask, ThresholdComparison) {
  const auto mdp = prc::make_grid_mdp(5);
  Matrix pi(25, 4);
  pi.rowwise() = Eigen::RowVector4d(0.7, 0.1, 0.1, 0.1);
  const auto mask = prc::build_tabular_mask(mdp, pi, 0.5);
  for (int s = 0; s < 25; ++s) {
    EXPECT_EQ(mask.n_allowed(s), 1);
    EXPECT_TRUE(mask.allowed(s, 0));
  }
  EXPECT_TRUE(mask.fallback_states.empty());
}

TEST(TabularMask, ThresholdOutsideUnitIntervalThrows) {
  const auto mdp = prc::make_grid_mdp(5);
  for (double p : {0.0, 1.0, -0.5, 1.5})
    EXPECT_THROW(prc::build_tabular_mask(mdp, uniform_table(25, 4), p), prc::ContractViolation);
}

Matrix random_distribution_table(int states, int actions, prc::RandomStream& rng) {
  Matrix m(states, actions);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.01, 1.0);
  for (Eigen::Index s = 0; s < m.rows(); ++s) m.row(s) /= m.row(s).sum();
  return m;
}

TEST(TabularMask, HigherThresholdShrinks) {
  const auto mdp = prc::make_grid_mdp(5);
  prc::RandomStream rng(26);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix pi = random_distribution_table(25, 4, rng);
    const double p1 = rng.uniform(0.05, 0.5), p2 = p1 + rng.uniform(0.0, 0.4);
    const auto m1 = prc::build_tabular_mask(mdp, pi, p1);
    const auto m2 = prc::build_tabular_mask(mdp, pi, p2);
    for (int s = 0; s < 25; ++s) {
      const bool fallback = std::find(m2.fallback_states.begin(), m2.fallback_states.end(), s) != m2.fallback_states.end();
      for (int a = 0; a < 4; ++a)
        if (m2.allowed(s, a) && !fallback) EXPECT_TRUE(m1.allowed(s, a));
    }
  }
}

TEST(CpViolation, MaskedValueIterationPolicyIsClean) {
  const auto mdp = prc::make_grid_mdp(5);
  prc::RandomStream rng(27);
  const Matrix pi = random_distribution_table(25, 4, rng);
  const auto mask = prc::build_tabular_mask(mdp, pi, 0.25);
  Matrix u(25, 4);
  for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = rng.uniform(-1, 1);
  const auto sol = prc::masked_value_iteration(mdp, mask, u, 0.95, 1e-10);
  EXPECT_FALSE(prc::cp_violation(prc::TabularPolicy(sol.policy).probabilities(4), mask).has_value());
}

TEST(CpViolation, DisallowedMassIsReported) {
  const auto mdp = prc::make_grid_mdp(5);
  Matrix pi(25, 4);
  pi.rowwise() = Eigen::RowVector4d(0.7, 0.1, 0.1, 0.1);
  const auto mask = prc::build_tabular_mask(mdp, pi, 0.5);
  Matrix policy = Matrix::Zero(25, 4);
  policy.col(0).setOnes();
  policy.row(7) << 0.9, 0.0, 0.1, 0.0;
  const auto w = prc::cp_violation(policy, mask);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(w->state, 7);
  EXPECT_EQ(w->action, 2);
}

TEST(CpViolation, ClampedWrappedGaussianIsClean) {
  const prc::ConstrainedEnv env(kPoint, random_clone(kPoint, 28), 0.25);
  auto pi_star = wrapped_gaussian(4, env.radius(), 29);
  pi_star->net.layers().back().bias.tail(2).setConstant(std::log(2.0));  // wide, often clamped
  const auto states = sample_states(kPoint, 200, 30);
  prc::RandomStream rng(31);
  EXPECT_FALSE(prc::cp_violation(*pi_star, env, states, 50, rng).has_value());
  FixedWrapped outside(Vec::Constant(2, 0.3));
  EXPECT_TRUE(prc::cp_violation(outside, env, states, 1, rng).has_value());
}

TEST(TabularBehavior, EstimatedRowsAreDistributions) {
  const auto spec = prc::make_env_spec(prc::EnvId::GridWorld5x5);
  const auto ds = prc::build_preference_dataset(spec, prc::BehaviorTag::Medium, 200, 5, prc::RandomStream(32));
  const auto mdp = prc::make_grid_mdp(5);
  const Matrix pi = prc::estimate_tabular_behavior(ds, mdp);
  for (int s = 0; s < 25; ++s) EXPECT_NEAR(pi.row(s).sum(), 1.0, 1e-12);
  // The start cell is always visited and the medium policy mostly goes right.
  Eigen::Index best = 0;
  pi.row(0).maxCoeff(&best);
  EXPECT_EQ(best, prc::grid::kRight);
}

}  // namespace
