#include "prc/prc.hpp"

#include <gtest/gtest.h>

namespace {

using prc::Matrix;
using prc::Vec;

prc::Clip make_clip(const std::vector<Vec>& states, const Vec& action) {
  prc::Clip c;
  for (const auto& s : states) {
    c.states.push_back(s);
    c.actions.push_back(action);
    c.rewards.push_back(0.0);
  }
  return c;
}

std::vector<Vec> random_states(int n, int dim, prc::RandomStream& rng) {
  std::vector<Vec> out;
  for (int i = 0; i < n; ++i) {
    Vec s(dim);
    for (int k = 0; k < dim; ++k) s[k] = rng.uniform(-1.0, 1.0);
    out.push_back(s);
  }
  return out;
}

// clip_1 takes +1 actions, clip_2 takes -1 actions at the same states, and
// clip_1 is always preferred.
prc::PreferenceDataset separable_dataset(int n_pairs, prc::RandomStream& rng) {
  prc::PreferenceDataset ds;
  ds.env_id = prc::EnvId::PointReach;
  ds.clip_len = 20;
  for (int i = 0; i < n_pairs; ++i) {
    const auto states = random_states(20, 4, rng);
    prc::PreferencePair p;
    p.first = make_clip(states, Vec::Ones(2));
    p.second = make_clip(states, -Vec::Ones(2));
    p.label = prc::PreferenceLabel::FirstPreferred;
    p.p_true = 1.0;
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

double fd_check(prc::Mlp& net, const std::function<double()>& loss, const Vec& analytic,
                prc::RandomStream& rng, int samples = 200) {
  Vec theta = net.flat_parameters();
  const double h = 1e-5;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto k = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(theta.size())));
    const double saved = theta[k];
    theta[k] = saved + h;
    net.set_flat_parameters(theta);
    const double up = loss();
    theta[k] = saved - h;
    net.set_flat_parameters(theta);
    const double down = loss();
    theta[k] = saved;
    net.set_flat_parameters(theta);
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
  }
  return worst;
}

prc::DetPolicy unit_box_policy(int state_dim, int action_dim) {
  prc::DetPolicy p;
  p.net = prc::Mlp::zeros(prc::standard_layer_dims(state_dim, action_dim), prc::Head::Tanh);
  p.action_low = -Vec::Ones(action_dim);
  p.action_high = Vec::Ones(action_dim);
  return p;
}

// ---- utility sums ----

TEST(ClipUtilitySum, ZeroModelIsZero) {
  prc::UtilityModel m;
  m.state_dim = 4;
  m.action_dim = 2;
  m.net = prc::Mlp::zeros(prc::standard_layer_dims(6, 1), prc::Head::Tanh);
  prc::RandomStream rng(1);
  EXPECT_EQ(prc::clip_utility_sum(m, make_clip(random_states(20, 4, rng), Vec::Ones(2))), 0.0);
}

TEST(ClipUtilitySum, ConstantOutput) {
  prc::UtilityModel m;
  m.state_dim = 4;
  m.action_dim = 2;
  m.net = prc::Mlp::zeros(prc::standard_layer_dims(6, 1), prc::Head::Tanh);
  m.net.layers().back().bias[0] = 0.4;
  const double c = std::tanh(0.4);
  prc::RandomStream rng(2);
  EXPECT_NEAR(prc::clip_utility_sum(m, make_clip(random_states(20, 4, rng), Vec::Zero(2))), 20.0 * c, 1e-12);
}

TEST(ClipUtilitySum, MatchesPerStepAccumulation) {
  prc::RandomStream rng(3);
  const auto m = prc::UtilityModel::create(4, 2, rng);
  const auto states = random_states(20, 4, rng);
  prc::Clip clip;
  double expected = 0.0;
  for (const auto& s : states) {
    Vec a(2);
    a << rng.uniform(-1, 1), rng.uniform(-1, 1);
    clip.states.push_back(s);
    clip.actions.push_back(a);
    clip.rewards.push_back(0.0);
    expected += m(s, a);
  }
  EXPECT_NEAR(prc::clip_utility_sum(m, clip), expected, 1e-12);
}

TEST(ClipUtilitySum, DimensionMismatch) {
  prc::RandomStream rng(4);
  const auto m = prc::UtilityModel::create(4, 2, rng);
  EXPECT_THROW(prc::clip_utility_sum(m, make_clip(random_states(20, 3, rng), Vec::Zero(2))),
               prc::ContractViolation);
}

TEST(UtilityModel, OutputsBounded) {
  prc::RandomStream rng(5);
  auto m = prc::UtilityModel::create(4, 2, rng);
  for (auto& layer : m.net.layers()) layer.weight *= 20.0;
  for (int i = 0; i < 500; ++i) {
    const double u = m(Vec::Random(4) * 50.0, Vec::Random(2) * 50.0);
    EXPECT_GT(u, -1.0);
    EXPECT_LT(u, 1.0);
  }
}

// ---- preference loss ----

TEST(PreferenceLoss, EqualSumsGiveLn2) {
  prc::RandomStream rng(6);
  const auto m = prc::UtilityModel::create(4, 2, rng);
  const auto states = random_states(20, 4, rng);
  prc::PreferencePair p;
  p.first = make_clip(states, Vec::Ones(2));
  p.second = p.first;
  std::vector<prc::PreferencePair> batch{p};
  EXPECT_NEAR(prc::preference_loss(m, batch), std::log(2.0), 1e-15);
  p.label = prc::PreferenceLabel::SecondPreferred;
  batch = {p};
  EXPECT_NEAR(prc::preference_loss(m, batch), 0.693147, 1e-6);
}

TEST(PreferenceLoss, PairTermValues) {
  // Per-pair loss is softplus(U_loser - U_winner).
  EXPECT_EQ(prc::softplus(-1000.0), 0.0);
  EXPECT_TRUE(std::isfinite(prc::softplus(1000.0)));
  EXPECT_EQ(prc::softplus(1000.0), 1000.0);
  EXPECT_NEAR(prc::softplus(1.0), std::log(1.0 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(prc::softplus(1.0), 1.313262, 1e-6);
  EXPECT_EQ(prc::softplus(0.0), std::log(2.0));
}

TEST(PreferenceLoss, ShiftInvariantAndNonNegative) {
  prc::RandomStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double w = rng.normal(0, 5), l = rng.normal(0, 5), c = rng.normal(0, 5);
    EXPECT_GE(prc::softplus(l - w), 0.0);
    EXPECT_NEAR(prc::softplus((l + c) - (w + c)), prc::softplus(l - w), 1e-12);
  }
}

TEST(PreferenceLoss, MatchesRecomputedSums) {
  prc::RandomStream rng(8);
  const auto m = prc::UtilityModel::create(4, 2, rng);
  const auto ds = prc::build_preference_dataset(prc::make_env_spec(prc::EnvId::PointReach),
                                                prc::BehaviorTag::Medium, 20, 20, prc::RandomStream(9));
  double expected = 0.0;
  for (const auto& p : ds.pairs) {
    const double uw = prc::clip_utility_sum(m, p.winner()), ul = prc::clip_utility_sum(m, p.loser());
    expected += -std::log(std::exp(uw) / (std::exp(uw) + std::exp(ul)));
  }
  expected /= static_cast<double>(ds.pairs.size());
  EXPECT_NEAR(prc::preference_loss(m, ds.pairs), expected, 1e-12);
  std::vector<const prc::PreferencePair*> ptrs;
  for (const auto& p : ds.pairs) ptrs.push_back(&p);
  EXPECT_NEAR(prc::preference_loss_and_gradient(m, ptrs).first, expected, 1e-12);
}

TEST(PreferenceLoss, GradientMatchesFiniteDifferences) {
  prc::RandomStream rng(10);
  auto m = prc::UtilityModel::create(4, 2, rng);
  const auto ds = prc::build_preference_dataset(prc::make_env_spec(prc::EnvId::PointReach),
                                                prc::BehaviorTag::Replay, 6, 20, prc::RandomStream(11));
  std::vector<const prc::PreferencePair*> ptrs;
  for (const auto& p : ds.pairs) ptrs.push_back(&p);
  const Vec analytic = prc::Mlp::flatten(prc::preference_loss_and_gradient(m, ptrs).second);
  const double err = fd_check(m.net, [&] { return prc::preference_loss(m, ds.pairs); }, analytic, rng);
  EXPECT_LT(err, 1e-4);
}

TEST(PreferenceLoss, EmptyBatchThrows) {
  prc::RandomStream rng(12);
  const auto m = prc::UtilityModel::create(4, 2, rng);
  EXPECT_THROW(prc::preference_loss(m, std::span<const prc::PreferencePair>{}), prc::ContractViolation);
}

// ---- reward training ----

TEST(TrainReward, LearnsSeparablePreference) {
  prc::RandomStream rng(13);
  const auto ds = separable_dataset(200, rng);
  prc::RandomStream train_rng(14);
  const auto m = prc::train_reward_model(ds, {1e-3, 32, 20}, train_rng);
  EXPECT_LT(m.loss_history.back(), m.loss_history.front());
  const auto states = random_states(20, 4, rng);
  const double up = prc::clip_utility_sum(m, make_clip(states, Vec::Ones(2)));
  const double down = prc::clip_utility_sum(m, make_clip(states, -Vec::Ones(2)));
  EXPECT_GT(prc::bt_probability(up, down), 0.9);
}

TEST(TrainReward, RepeatedPairIsFit) {
  prc::RandomStream rng(15);
  auto ds = separable_dataset(1, rng);
  ds.pairs.resize(32, ds.pairs.front());
  prc::RandomStream train_rng(16);
  const auto m = prc::train_reward_model(ds, {1e-3, 32, 300}, train_rng);
  EXPECT_LT(m.loss_history.back(), 1e-3);
  EXPECT_LT(prc::preference_loss(m, ds.pairs), 1e-3);
}

TEST(TrainReward, DeterministicUnderSeed) {
  prc::RandomStream rng(17);
  const auto ds = separable_dataset(50, rng);
  prc::RandomStream r1(18), r2(18);
  const auto a = prc::train_reward_model(ds, {1e-3, 16, 3}, r1);
  const auto b = prc::train_reward_model(ds, {1e-3, 16, 3}, r2);
  EXPECT_EQ(prc::to_json(a).dump(), prc::to_json(b).dump());
}

TEST(TrainReward, EmptyDatasetThrows) {
  prc::RandomStream rng(19);
  EXPECT_THROW(prc::train_reward_model(prc::PreferenceDataset{}, {}, rng), prc::ContractViolation);
}

// ---- behavior cloning ----

TEST(BcLoss, ExactMatchIsZero) {
  const auto p = unit_box_policy(3, 2);
  EXPECT_EQ(prc::bc_loss(p, Matrix::Random(3, 7), Matrix::Zero(2, 7)), 0.0);
}

TEST(BcLoss, ScalarDistance) {
  const auto p = unit_box_policy(3, 1);
  EXPECT_EQ(prc::bc_loss(p, Matrix::Zero(3, 1), Matrix::Constant(1, 1, 3.0)), 3.0);
}

TEST(BcLoss, EuclideanNorm) {
  const auto p = unit_box_policy(3, 2);
  Matrix a(2, 1);
  a << 3.0, 4.0;
  EXPECT_EQ(prc::bc_loss(p, Matrix::Zero(3, 1), a), 5.0);
  EXPECT_EQ(prc::bc_loss_and_gradient(p, Matrix::Zero(3, 1), a).first, 5.0);
}

TEST(BcLoss, DimensionMismatch) {
  const auto p = unit_box_policy(3, 2);
  EXPECT_THROW(prc::bc_loss(p, Matrix::Zero(3, 4), Matrix::Zero(3, 4)), prc::ContractViolation);
}

TEST(BcLoss, GradientMatchesFiniteDifferences) {
  prc::RandomStream rng(20);
  auto p = prc::DetPolicy::create(prc::make_env_spec(prc::EnvId::NarrowPath), rng);
  Matrix s(2, 16), a(2, 16);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    s.data()[i] = rng.uniform(-1, 1);
    a.data()[i] = rng.uniform(-1, 1);
  }
  const Vec analytic = prc::Mlp::flatten(prc::bc_loss_and_gradient(p, s, a).second);
  EXPECT_LT(fd_check(p.net, [&] { return prc::bc_loss(p, s, a); }, analytic, rng), 1e-4);
}

prc::StateActionSet constant_action_data(const prc::EnvSpec& spec, const Vec& action, int episodes,
                                         std::uint64_t seed) {
  struct Constant : prc::Policy {
    Vec a;
    Vec act(const Vec&, prc::RandomStream&) const override { return a; }
  } pol;
  pol.a = action;
  std::vector<Vec> ss, as;
  const auto trajs = prc::collect_trajectories(spec, pol, episodes, prc::RandomStream(seed));
  for (const auto& t : trajs)
    for (std::size_t k = 0; k < t.length(); ++k) {
      ss.push_back(t.states[k]);
      as.push_back(t.actions[k]);
    }
  return {prc::stack_columns(ss), prc::stack_columns(as)};
}

TEST(TrainBc, RecoversConstantAction) {
  const auto spec = prc::make_env_spec(prc::EnvId::PointReach);
  Vec target(2);
  target << 0.3, -0.5;
  const auto data = constant_action_data(spec, target, 40, 21);
  prc::RandomStream rng(22);
  const auto p = prc::train_bc_deterministic(spec, data, {1e-3, 64, 20}, rng);
  const auto probe = constant_action_data(spec, target, 20, 23);
  ASSERT_GE(probe.size(), 1000);
  for (Eigen::Index i = 0; i < 1000; ++i)
    EXPECT_LE((p.action(probe.states.col(i)) - target).cwiseAbs().maxCoeff(), 0.05);
}

TEST(TrainBc, FullBatchLossIsMonotone) {
  const auto spec = prc::make_env_spec(prc::EnvId::NarrowPath);
  const auto ds = prc::build_preference_dataset(spec, prc::BehaviorTag::Medium, 10, 20, prc::RandomStream(24));
  const auto data = prc::extract_state_actions(ds);
  prc::RandomStream rng(25);
  const auto p = prc::train_bc_deterministic(spec, data, {1e-4, 100000, 60}, rng);
  for (std::size_t e = 1; e < p.loss_history.size(); ++e)
    EXPECT_LE(p.loss_history[e], p.loss_history[e - 1] + 1e-6) << "epoch " << e;
}

TEST(TrainBc, DeterministicUnderSeed) {
  const auto spec = prc::make_env_spec(prc::EnvId::NarrowPath);
  const auto ds = prc::build_preference_dataset(spec, prc::BehaviorTag::Medium, 10, 20, prc::RandomStream(26));
  prc::RandomStream r1(27), r2(27);
  const auto a = prc::train_bc_deterministic(spec, ds, {1e-3, 32, 2}, r1);
  const auto b = prc::train_bc_deterministic(spec, ds, {1e-3, 32, 2}, r2);
  EXPECT_EQ(prc::to_json(a).dump(), prc::to_json(b).dump());
}

// ---- gaussian clone ----

TEST(GaussianNll, GradientMatchesFiniteDifferences) {
  prc::RandomStream rng(28);
  auto p = prc::GaussianPolicy::create(4, -Vec::Ones(2), Vec::Ones(2), rng);
  Matrix s(4, 12), a(2, 12);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
  const Vec analytic = prc::Mlp::flatten(prc::gaussian_nll_and_gradient(p, s, a).second);
  EXPECT_LT(fd_check(p.net, [&] { return prc::gaussian_nll_and_gradient(p, s, a).first; }, analytic, rng),
            1e-4);
}

TEST(GaussianNll, MatchesLogDensity) {
  prc::RandomStream rng(29);
  const auto p = prc::GaussianPolicy::create(4, -Vec::Ones(2), Vec::Ones(2), rng);
  Matrix s = Matrix::Random(4, 5), a = Matrix::Random(2, 5);
  double expected = 0.0;
  for (int j = 0; j < 5; ++j) expected -= p.log_density(s.col(j), a.col(j));
  EXPECT_NEAR(prc::gaussian_nll_and_gradient(p, s, a).first, expected / 5.0, 1e-12);
}

TEST(TrainBcGaussian, RecoversNoiseLevel) {
  const auto spec = prc::make_env_spec(prc::EnvId::PointReach);
  prc::RandomStream data_rng(30);
  const int n = 4000;
  prc::StateActionSet data{Matrix::Zero(4, n), Matrix(2, n)};
  for (Eigen::Index i = 0; i < data.actions.size(); ++i) data.actions.data()[i] = data_rng.normal(0.0, 0.3);
  prc::RandomStream rng(31);
  const auto p = prc::train_bc_gaussian(spec, data, {1e-3, 256, 40}, rng);
  const auto [mu, sd] = p.mean_std(Vec::Zero(4));
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(mu[k], 0.0, 0.05);
    EXPECT_NEAR(sd[k], 0.3, 0.05);
  }
}

TEST(TrainBcGaussian, RepeatedSampleCollapsesToClamp) {
  const auto spec = prc::make_env_spec(prc::EnvId::PointReach);
  Vec s(4), a(2);
  s << 0.1, -0.2, 0.0, 0.3;
  a << 0.4, -0.25;
  prc::StateActionSet data{s.replicate(1, 16), a.replicate(1, 16)};
  prc::RandomStream rng(32);
  const auto p = prc::train_bc_gaussian(spec, data, {3e-3, 16, 4000}, rng);
  const auto [mu, sd] = p.mean_std(s);
  EXPECT_LE((mu - a).cwiseAbs().maxCoeff(), 1e-3);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(sd[k], std::exp(prc::kLogStdMin), 1e-12);
}

TEST(TrainBcGaussian, DeterministicUnderSeed) {
  const auto spec = prc::make_env_spec(prc::EnvId::NarrowPath);
  const auto ds = prc::build_preference_dataset(spec, prc::BehaviorTag::Medium, 10, 20, prc::RandomStream(33));
  prc::RandomStream r1(34), r2(34);
  const auto a = prc::train_bc_gaussian(spec, ds, {1e-3, 32, 2}, r1);
  const auto b = prc::train_bc_gaussian(spec, ds, {1e-3, 32, 2}, r2);
  EXPECT_EQ(prc::to_json(a).dump(), prc::to_json(b).dump());
}

// ---- checkpoints ----

TEST(Checkpoint, RoundTripsAreBitIdentical) {
  prc::RandomStream rng(35);
  const auto spec = prc::make_env_spec(prc::EnvId::PointReach);
  auto u = prc::UtilityModel::create(4, 2, rng);
  const auto d = prc::DetPolicy::create(spec, rng);
  const auto g = prc::GaussianPolicy::create(4, spec.action_low, spec.action_high, rng);
  const auto u2 = prc::utility_from_json(nlohmann::json::parse(prc::to_json(u).dump()));
  const auto d2 = prc::det_policy_from_json(nlohmann::json::parse(prc::to_json(d).dump()));
  const auto g2 = prc::gauss_policy_from_json(nlohmann::json::parse(prc::to_json(g).dump()));
  const Matrix s = Matrix::Random(4, 9);
  Matrix sa(6, 9);
  sa << s, Matrix::Random(2, 9);
  EXPECT_EQ(u.evaluate(sa), u2.evaluate(sa));
  EXPECT_EQ(d.action_batch(s), d2.action_batch(s));
  EXPECT_EQ(g.moments(s).mean, g2.moments(s).mean);
  EXPECT_EQ(g.moments(s).std, g2.moments(s).std);
}

TEST(Checkpoint, WrongKindVersionOrEnvRejected) {
  prc::RandomStream rng(36);
  const auto u = prc::UtilityModel::create(4, 2, rng);
  auto j = prc::to_json(u);
  EXPECT_THROW(prc::det_policy_from_json(j), prc::ConfigError);
  auto bad_version = j;
  bad_version["meta"]["version"] = "prc-lab/0";
  EXPECT_THROW(prc::utility_from_json(bad_version), prc::ConfigError);
  auto bad_env = j;
  bad_env["meta"]["env_fingerprint"] = "0000000000000000";
  EXPECT_THROW(prc::utility_from_json(bad_env), prc::ConfigError);
}

}  // namespace
