#include "prc/prc.hpp"

#include <gtest/gtest.h>

#include <map>

namespace {

using prc::BehaviorTag;
using prc::EnvId;
using prc::Vec;

prc::Trajectory constant_trajectory(std::size_t len, double state_value, double reward) {
  prc::Trajectory t;
  for (std::size_t i = 0; i <= len; ++i) t.states.push_back(Vec::Constant(1, state_value));
  for (std::size_t i = 0; i < len; ++i) {
    t.actions.push_back(Vec::Constant(1, static_cast<double>(i)));
    t.true_rewards.push_back(reward);
  }
  return t;
}

TEST(BehaviorPolicy, ExpertGridWorldTakesShortestPath) {
  const auto spec = prc::make_env_spec(EnvId::GridWorld5x5);
  prc::ExpertPolicy expert(spec);
  prc::RandomStream rng(1);
  const auto traj = prc::rollout(spec, expert, rng);
  EXPECT_EQ(traj.length(), 8u);
  EXPECT_EQ(traj.true_return(), 1.0);
}

TEST(BehaviorPolicy, RandomActionsAreCentered) {
  const auto spec = prc::make_env_spec(EnvId::PointReach);
  prc::UniformRandomPolicy random(spec);
  prc::RandomStream rng(2);
  Vec sum = Vec::Zero(2);
  for (int i = 0; i < 10000; ++i) {
    const Vec a = random.act(Vec::Zero(4), rng);
    EXPECT_TRUE((a.array() >= -1.0).all() && (a.array() <= 1.0).all());
    sum += a;
  }
  EXPECT_LE((sum / 10000.0).cwiseAbs().maxCoeff(), 0.03);
}

TEST(BehaviorPolicy, NoiselessMediumIsExpert) {
  for (EnvId id : {EnvId::PointReach, EnvId::NarrowPath, EnvId::GridWorld5x5}) {
    const auto spec = prc::make_env_spec(id);
    prc::MediumPolicy medium(spec, {0.0, 0.0});
    prc::ExpertPolicy expert(spec);
    prc::RandomStream r1(3), r2(3);
    const auto t1 = prc::rollout(spec, medium, r1);
    const auto t2 = prc::rollout(spec, expert, r2);
    ASSERT_EQ(t1.length(), t2.length());
    for (std::size_t i = 0; i < t1.length(); ++i) EXPECT_EQ(t1.actions[i], t2.actions[i]);
  }
}

TEST(BehaviorPolicy, ReplayStaysInBounds) {
  const auto spec = prc::make_env_spec(EnvId::NarrowPath);
  auto replay = prc::make_behavior_policy(spec, BehaviorTag::Replay);
  const auto trajs = prc::collect_trajectories(spec, *replay, 20, prc::RandomStream(8), BehaviorTag::Replay);
  for (const auto& t : trajs)
    for (const auto& a : t.actions) EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
}

TEST(CollectTrajectories, SameSeedSameSet) {
  const auto spec = prc::make_env_spec(EnvId::NarrowPath);
  auto medium = prc::make_behavior_policy(spec, BehaviorTag::Medium);
  const auto a = prc::collect_trajectories(spec, *medium, 5, prc::RandomStream(10));
  const auto b = prc::collect_trajectories(spec, *medium, 5, prc::RandomStream(10));
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].states, b[k].states);
    EXPECT_EQ(a[k].actions, b[k].actions);
    EXPECT_EQ(a[k].true_rewards, b[k].true_rewards);
  }
}

TEST(CollectTrajectories, ZeroIsContractViolation) {
  const auto spec = prc::make_env_spec(EnvId::NarrowPath);
  prc::ExpertPolicy expert(spec);
  EXPECT_THROW(prc::collect_trajectories(spec, expert, 0, prc::RandomStream(1)), prc::ContractViolation);
}

TEST(NormalizeRewards, AffineRule) {
  std::vector<prc::Trajectory> trajs(1);
  trajs[0].true_rewards = {-2.0, 0.0, 2.0};
  const auto rec = prc::normalize_rewards(trajs);
  EXPECT_EQ(trajs[0].true_rewards, (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_EQ(rec.min, -2.0);
  EXPECT_EQ(rec.max, 2.0);
}

TEST(NormalizeRewards, ConstantMapsToZero) {
  std::vector<prc::Trajectory> trajs(2);
  trajs[0].true_rewards = {0.7};
  trajs[1].true_rewards = {0.7};
  prc::normalize_rewards(trajs);
  EXPECT_EQ(trajs[0].true_rewards[0], 0.0);
  EXPECT_EQ(trajs[1].true_rewards[0], 0.0);
}

TEST(NormalizeRewards, UnitRangeUnchanged) {
  std::vector<prc::Trajectory> trajs(1);
  trajs[0].true_rewards = {-1.0, -0.25, 0.5, 1.0};
  prc::normalize_rewards(trajs);
  EXPECT_EQ(trajs[0].true_rewards, (std::vector<double>{-1.0, -0.25, 0.5, 1.0}));
}

TEST(SampleClipPair, OnlyWindowIsWholeTrajectory) {
  const std::vector<prc::Trajectory> trajs{constant_trajectory(20, 0.0, 0.1)};
  prc::RandomStream rng(4);
  const auto [a, b] = prc::sample_clip_pair(trajs, 20, rng);
  EXPECT_EQ(a.actions, trajs[0].actions);
  EXPECT_EQ(b.actions, trajs[0].actions);
}

TEST(SampleClipPair, TooShortThrows) {
  const std::vector<prc::Trajectory> trajs{constant_trajectory(19, 0.0, 0.1)};
  prc::RandomStream rng(4);
  EXPECT_THROW(prc::sample_clip_pair(trajs, 20, rng), prc::ContractViolation);
}

TEST(SampleClipPair, TrajectoriesChosenUniformly) {
  const std::vector<prc::Trajectory> trajs{constant_trajectory(30, 0.0, 0.0), constant_trajectory(30, 1.0, 0.0)};
  prc::RandomStream rng(5);
  int first = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto [a, b] = prc::sample_clip_pair(trajs, 20, rng);
    first += a.states[0][0] == 0.0;
    first += b.states[0][0] == 0.0;
  }
  EXPECT_NEAR(first / 10000.0, 0.5, 0.015);
}

TEST(SampleClipPair, WindowsAreContiguous) {
  const std::vector<prc::Trajectory> trajs{constant_trajectory(45, 0.0, 0.0)};
  prc::RandomStream rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto [a, b] = prc::sample_clip_pair(trajs, 20, rng);
    for (const auto* c : {&a, &b}) {
      ASSERT_EQ(c->size(), 20u);
      for (std::size_t t = 1; t < c->size(); ++t) EXPECT_EQ(c->actions[t][0], c->actions[t - 1][0] + 1.0);
    }
  }
}

TEST(BtProbability, Values) {
  EXPECT_EQ(prc::bt_probability(0.3, 0.3), 0.5);
  const double e = std::exp(1.0);
  EXPECT_NEAR(prc::bt_probability(1.0, 0.0), e / (1.0 + e), 1e-15);
  EXPECT_NEAR(prc::bt_probability(1.0, 0.0), 0.731059, 1e-6);
  EXPECT_EQ(prc::bt_probability(1000.0, 0.0), 1.0);
  EXPECT_EQ(prc::bt_probability(0.0, 1000.0), 0.0);
}

TEST(BtProbability, ComplementsSumToOneExactly) {
  prc::RandomStream rng(12);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.normal(0.0, 10.0), b = rng.normal(0.0, 10.0);
    EXPECT_EQ(prc::bt_probability(a, b) + prc::bt_probability(b, a), 1.0);
  }
}

TEST(LabelPair, Edges) {
  prc::RandomStream rng(13);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(prc::label_pair(1.0, rng), prc::PreferenceLabel::FirstPreferred);
    EXPECT_EQ(prc::label_pair(0.0, rng), prc::PreferenceLabel::SecondPreferred);
  }
  EXPECT_THROW(prc::label_pair(1.5, rng), prc::ContractViolation);
}

TEST(LabelPair, FrequencyMatchesProbability) {
  prc::RandomStream rng(14);
  int first = 0;
  for (int i = 0; i < 10000; ++i) first += prc::label_pair(0.7311, rng) == prc::PreferenceLabel::FirstPreferred;
  EXPECT_NEAR(first / 10000.0, 0.7311, 0.015);
}

TEST(BuildDataset, SmallDatasetIsConsistent) {
  const auto spec = prc::make_env_spec(EnvId::PointReach);
  const auto ds = prc::build_preference_dataset(spec, BehaviorTag::Medium, 5, 20, prc::RandomStream(15));
  ASSERT_EQ(ds.pairs.size(), 5u);
  for (const auto& p : ds.pairs) {
    EXPECT_EQ(p.first.size(), 20u);
    EXPECT_EQ(p.second.size(), 20u);
    EXPECT_EQ(p.p_true, prc::bt_probability(p.first.reward_sum(), p.second.reward_sum()));
    for (const auto* c : {&p.first, &p.second})
      for (double r : c->rewards) {
        EXPECT_GE(r, -1.0);
        EXPECT_LE(r, 1.0);
      }
  }
  EXPECT_FALSE(ds.fingerprint.empty());
}

TEST(BuildDataset, SameSeedByteIdenticalFile) {
  const auto spec = prc::make_env_spec(EnvId::NarrowPath);
  prc::DatagenOptions one_worker, many_workers;
  many_workers.workers = 4;
  const auto a = prc::build_preference_dataset(spec, BehaviorTag::Medium, 300, 20, prc::RandomStream(16), one_worker);
  const auto b = prc::build_preference_dataset(spec, BehaviorTag::Medium, 300, 20, prc::RandomStream(16), many_workers);
  EXPECT_EQ(prc::dataset_to_jsonl(a), prc::dataset_to_jsonl(b));
  const auto c = prc::build_preference_dataset(spec, BehaviorTag::Medium, 300, 20, prc::RandomStream(17), one_worker);
  EXPECT_NE(prc::dataset_to_jsonl(a), prc::dataset_to_jsonl(c));
}

TEST(BuildDataset, FileRoundTrip) {
  const auto spec = prc::make_env_spec(EnvId::GridWorld5x5);
  const auto ds = prc::build_preference_dataset(spec, BehaviorTag::Medium, 50, 5, prc::RandomStream(18));
  const auto path = std::filesystem::temp_directory_path() / "prc_datagen_roundtrip.jsonl";
  prc::save_dataset(ds, path);
  const auto back = prc::load_dataset(path);
  EXPECT_EQ(prc::dataset_to_jsonl(back), prc::dataset_to_jsonl(ds));
  std::filesystem::remove(path);
}

TEST(BuildDataset, VersionMismatchRejected) {
  const auto spec = prc::make_env_spec(EnvId::NarrowPath);
  const auto ds = prc::build_preference_dataset(spec, BehaviorTag::Medium, 3, 20, prc::RandomStream(19));
  std::string text = prc::dataset_to_jsonl(ds);
  const std::string version(prc::kArtifactVersion);
  text.replace(text.find(version), version.size(), "prc-lab/0");
  const auto path = std::filesystem::temp_directory_path() / "prc_datagen_version.jsonl";
  prc::write_file_atomic(path, text);
  EXPECT_THROW(prc::load_dataset(path), prc::ConfigError);
  std::filesystem::remove(path);
}

// Labels favor the clip with the larger reward sum whenever sums differ,
// since the Bradley-Terry probability is monotone in the sum difference.
TEST(BuildDataset, LabelsFavorBetterClipOnMixedData) {
  const auto spec = prc::make_env_spec(EnvId::PointReach);
  prc::ExpertPolicy expert(spec);
  prc::UniformRandomPolicy random(spec);
  auto trajs = prc::collect_trajectories(spec, expert, 50, prc::RandomStream(20), BehaviorTag::Expert);
  auto more = prc::collect_trajectories(spec, random, 50, prc::RandomStream(21));
  trajs.insert(trajs.end(), more.begin(), more.end());
  prc::normalize_rewards(trajs);
  const auto pairs = prc::sample_preference_pairs(trajs, 20000, 20, prc::RandomStream(22));
  int favored = 0, decided = 0;
  for (const auto& p : pairs) {
    const double d = p.first.reward_sum() - p.second.reward_sum();
    if (d == 0.0) continue;
    ++decided;
    favored += (d > 0.0) == (p.label == prc::PreferenceLabel::FirstPreferred);
  }
  EXPECT_GT(static_cast<double>(favored) / decided, 0.5);
}

// Within each p_true bucket the empirical first-preferred rate must sit
// within three binomial standard deviations of the bucket's mean p_true.
TEST(BuildDataset, LabelFidelityPerBucket) {
  const auto spec = prc::make_env_spec(EnvId::PointReach);
  const auto ds = prc::build_preference_dataset(spec, BehaviorTag::Replay, 20000, 20, prc::RandomStream(23));
  std::map<int, std::pair<double, int>> p_sum;  // bucket -> (sum p, count)
  std::map<int, int> first;
  for (const auto& p : ds.pairs) {
    EXPECT_GE(p.p_true, 0.0);
    EXPECT_LE(p.p_true, 1.0);
    const int b = std::min(9, static_cast<int>(p.p_true * 10.0));
    p_sum[b].first += p.p_true;
    p_sum[b].second += 1;
    first[b] += p.label == prc::PreferenceLabel::FirstPreferred;
  }
  for (const auto& [b, acc] : p_sum) {
    if (acc.second < 30) continue;
    const double n = acc.second;
    const double p = acc.first / n;
    const double sd = std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
    EXPECT_LE(std::abs(first[b] / n - p), 3.0 * sd + 1e-12) << "bucket " << b;
  }
}

}  // namespace
