#ifndef PRC_DATAGEN_HPP_
#define PRC_DATAGEN_HPP_

#include "prc/policy.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <span>

namespace prc {

// ---- behavior policies ----

struct MediumParams {
  double noise_std = 0.3;
  double random_mix = 0.2;
};

class UniformRandomPolicy : public Policy {
 public:
  explicit UniformRandomPolicy(EnvSpec spec) : spec_(std::move(spec)) {}
  Vec act(const Vec& /*state*/, RandomStream& rng) const override {
    Vec a(spec_.action_dim);
    if (spec_.discrete()) {
      a[0] = static_cast<double>(rng.index(grid::kNumActions));
      return a;
    }
    for (int i = 0; i < spec_.action_dim; ++i)
      a[i] = rng.uniform(spec_.action_low[i], spec_.action_high[i]);
    return a;
  }

 private:
  EnvSpec spec_;
};

/// Scripted controllers: PD toward the goal (PointReach), full-speed run
/// with centering (NarrowPath), right-then-up shortest path (GridWorld).
class ExpertPolicy : public Policy {
 public:
  static constexpr double kPositionGain = 2.0;
  static constexpr double kVelocityGain = 2.0;
  static constexpr double kCenteringGain = 2.0;

  explicit ExpertPolicy(EnvSpec spec) : spec_(std::move(spec)) {}

  Vec act(const Vec& state, RandomStream& /*rng*/) const override {
    Vec a(spec_.action_dim);
    switch (spec_.env_id) {
      case EnvId::PointReach:
        a[0] = kPositionGain * (point_reach::kGoalX - state[0]) - kVelocityGain * state[2];
        a[1] = kPositionGain * (point_reach::kGoalY - state[1]) - kVelocityGain * state[3];
        break;
      case EnvId::NarrowPath:
        a[0] = 1.0;
        a[1] = -kCenteringGain * state[1];
        break;
      case EnvId::GridWorld5x5: {
        const int cell = grid::decode_cell(state);
        a[0] = (cell % grid::kSide) < grid::kSide - 1 ? grid::kRight : grid::kUp;
        break;
      }
    }
    return clamp_box(a, spec_.action_low, spec_.action_high);
  }

 private:
  EnvSpec spec_;
};

/// Expert plus Gaussian noise, with a fraction of uniform-random actions.
/// GridWorld actions are discrete, so only the random mixture applies there.
class MediumPolicy : public Policy {
 public:
  MediumPolicy(EnvSpec spec, MediumParams params)
      : spec_(spec), params_(params), expert_(spec), random_(spec) {}

  Vec act(const Vec& state, RandomStream& rng) const override {
    if (params_.random_mix > 0.0 && rng.bernoulli(params_.random_mix))
      return random_.act(state, rng);
    Vec a = expert_.act(state, rng);
    if (!spec_.discrete() && params_.noise_std > 0.0) {
      for (int i = 0; i < spec_.action_dim; ++i) a[i] += rng.normal(0.0, params_.noise_std);
    }
    return clamp_box(a, spec_.action_low, spec_.action_high);
  }

 private:
  EnvSpec spec_;
  MediumParams params_;
  ExpertPolicy expert_;
  UniformRandomPolicy random_;
};

/// Per-episode mixture weight w ~ U(0,1); each step is uniform-random with
/// probability w and medium otherwise.
class ReplayPolicy : public Policy {
 public:
  ReplayPolicy(EnvSpec spec, MediumParams params) : medium_(spec, params), random_(spec) {}

  void begin_episode(RandomStream& rng) override { random_weight_ = rng.uniform(); }

  Vec act(const Vec& state, RandomStream& rng) const override {
    if (rng.bernoulli(random_weight_)) return random_.act(state, rng);
    return medium_.act(state, rng);
  }

 private:
  MediumPolicy medium_;
  UniformRandomPolicy random_;
  double random_weight_ = 0.5;
};

inline std::unique_ptr<Policy> make_behavior_policy(const EnvSpec& spec, BehaviorTag quality,
                                                    MediumParams params = {}) {
  switch (quality) {
    case BehaviorTag::Random: return std::make_unique<UniformRandomPolicy>(spec);
    case BehaviorTag::Medium: return std::make_unique<MediumPolicy>(spec, params);
    case BehaviorTag::Replay: return std::make_unique<ReplayPolicy>(spec, params);
    case BehaviorTag::Expert: return std::make_unique<ExpertPolicy>(spec);
  }
  return nullptr;
}

// ---- trajectories ----

/// Episode k is driven by rng.derive(k), so the set is reproducible and
/// independent of the order episodes are run in.
inline std::vector<Trajectory> collect_trajectories(const EnvSpec& spec, Policy& policy,
                                                    int n_trajectories, const RandomStream& rng,
                                                    BehaviorTag tag = BehaviorTag::Random) {
  require(n_trajectories >= 1, "collect_trajectories: n_trajectories must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n_trajectories));
  for (int k = 0; k < n_trajectories; ++k) {
    RandomStream episode = rng.derive(static_cast<std::uint64_t>(k));
    Trajectory traj = rollout(spec, policy, episode);
    traj.behavior_tag = tag;
    out.push_back(std::move(traj));
  }
  return out;
}

struct NormalizationRecord {
  double min = 0.0;
  double max = 0.0;

  double apply(double r) const {
    if (max == min) return 0.0;
    return 2.0 * (r - min) / (max - min) - 1.0;
  }
};

/// Dataset-global min-max map of every reward into [-1, 1], in place.
inline NormalizationRecord normalize_rewards(std::vector<Trajectory>& trajs) {
  NormalizationRecord rec{std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity()};
  std::size_t count = 0;
  for (const auto& t : trajs) {
    for (double r : t.true_rewards) {
      rec.min = std::min(rec.min, r);
      rec.max = std::max(rec.max, r);
      ++count;
    }
  }
  require(count > 0, "normalize_rewards: no rewards present");
  for (auto& t : trajs)
    for (double& r : t.true_rewards) r = rec.apply(r);
  return rec;
}

// ---- clips and preferences ----

struct Clip {
  std::vector<Vec> states;
  std::vector<Vec> actions;
  std::vector<double> rewards;

  std::size_t size() const { return actions.size(); }
  double reward_sum() const {
    double total = 0.0;
    for (double r : rewards) total += r;
    return total;
  }
};

inline Clip extract_clip(const Trajectory& traj, std::size_t start, std::size_t len) {
  Clip c;
  for (std::size_t t = start; t < start + len; ++t) {
    c.states.push_back(traj.states[t]);
    c.actions.push_back(traj.actions[t]);
    c.rewards.push_back(traj.true_rewards[t]);
  }
  return c;
}

/// Two independent draws of (trajectory, start offset) over trajectories
/// holding at least clip_len transitions.
inline std::pair<Clip, Clip> sample_clip_pair(std::span<const Trajectory> trajs, int clip_len,
                                              RandomStream& rng) {
  require(clip_len >= 1, "sample_clip_pair: clip_len must be >= 1");
  const auto len = static_cast<std::size_t>(clip_len);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < trajs.size(); ++i)
    if (trajs[i].length() >= len) eligible.push_back(i);
  require(!eligible.empty(), "sample_clip_pair: no trajectory of length >= clip_len");
  auto draw = [&] {
    const Trajectory& t = trajs[eligible[rng.index(eligible.size())]];
    const std::size_t start = rng.index(t.length() - len + 1);
    return extract_clip(t, start, len);
  };
  Clip first = draw();
  Clip second = draw();
  return {std::move(first), std::move(second)};
}

/// Bradley-Terry probability that the first item wins, in logistic form.
/// The larger side is computed once and the other as its complement, so
/// bt_probability(a, b) + bt_probability(b, a) == 1 exactly.
inline double bt_probability(double sum_u1, double sum_u2) {
  const double hi = std::max(sum_u1, sum_u2);
  const double lo = std::min(sum_u1, sum_u2);
  const double p_hi = 1.0 / (1.0 + std::exp(lo - hi));
  return sum_u1 >= sum_u2 ? p_hi : 1.0 - p_hi;
}

enum class PreferenceLabel { FirstPreferred = 0, SecondPreferred = 1 };

inline PreferenceLabel label_pair(double p_true, RandomStream& rng) {
  require(p_true >= 0.0 && p_true <= 1.0, "label_pair: p_true outside [0,1]");
  return rng.bernoulli(p_true) ? PreferenceLabel::FirstPreferred
                               : PreferenceLabel::SecondPreferred;
}

struct PreferencePair {
  Clip first;
  Clip second;
  PreferenceLabel label = PreferenceLabel::FirstPreferred;
  // Generating probability; test-only, never consumed by learners.
  double p_true = 0.5;

  const Clip& winner() const { return label == PreferenceLabel::FirstPreferred ? first : second; }
  const Clip& loser() const { return label == PreferenceLabel::FirstPreferred ? second : first; }
};

struct PreferenceDataset {
  EnvId env_id = EnvId::PointReach;
  BehaviorTag quality = BehaviorTag::Medium;
  int clip_len = 20;
  int n_trajectories = 0;
  std::uint64_t seed = 0;
  NormalizationRecord normalization;
  std::string fingerprint;
  std::vector<PreferencePair> pairs;

  int state_dim() const { return static_cast<int>(pairs.front().first.states.front().size()); }
  int action_dim() const { return static_cast<int>(pairs.front().first.actions.front().size()); }
};

struct DatagenOptions {
  int n_trajectories = 100;
  MediumParams medium;
  int workers = 1;
};

/// Labels pairs drawn from already-normalized trajectories. Pair i uses
/// the stream pair_rng.derive(i).
inline std::vector<PreferencePair> sample_preference_pairs(std::span<const Trajectory> trajs,
                                                           int n_pairs, int clip_len,
                                                           const RandomStream& pair_rng,
                                                           int workers = 1) {
  require(n_pairs >= 1, "sample_preference_pairs: n_pairs must be >= 1");
  std::vector<PreferencePair> pairs(static_cast<std::size_t>(n_pairs));
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    RandomStream rng = pair_rng.derive(i);
    auto [c1, c2] = sample_clip_pair(trajs, clip_len, rng);
    PreferencePair& p = pairs[i];
    p.p_true = bt_probability(c1.reward_sum(), c2.reward_sum());
    p.label = label_pair(p.p_true, rng);
    p.first = std::move(c1);
    p.second = std::move(c2);
  });
  return pairs;
}

struct DatasetBuild {
  PreferenceDataset dataset;
  std::vector<Trajectory> trajectories;  // normalized rewards
};

/// Collect behavior rollouts, normalize rewards, sample clip pairs and
/// label each by a Bernoulli draw on the Bradley-Terry probability of the
/// normalized reward sums.
inline DatasetBuild build_preference_dataset_with_trajectories(const EnvSpec& spec,
                                                               BehaviorTag quality, int n_pairs,
                                                               int clip_len, const RandomStream& rng,
                                                               const DatagenOptions& opts = {}) {
  require(n_pairs >= 1, "build_preference_dataset: n_pairs must be >= 1");
  auto policy = make_behavior_policy(spec, quality, opts.medium);
  DatasetBuild out;
  out.trajectories = collect_trajectories(spec, *policy, opts.n_trajectories, rng.derive(1), quality);
  auto& ds = out.dataset;
  ds.normalization = normalize_rewards(out.trajectories);
  ds.env_id = spec.env_id;
  ds.quality = quality;
  ds.clip_len = clip_len;
  ds.n_trajectories = opts.n_trajectories;
  ds.seed = rng.seed();
  ds.pairs = sample_preference_pairs(out.trajectories, n_pairs, clip_len, rng.derive(2), opts.workers);
  ds.fingerprint = fingerprint(to_string(spec.env_id) + "|" + to_string(quality) + "|" +
                               std::to_string(n_pairs) + "|" + std::to_string(clip_len) + "|" +
                               std::to_string(ds.seed) + "|" + std::to_string(opts.n_trajectories) + "|" +
                               format_double(opts.medium.noise_std) + "|" +
                               format_double(opts.medium.random_mix));
  return out;
}

inline PreferenceDataset build_preference_dataset(const EnvSpec& spec, BehaviorTag quality,
                                                  int n_pairs, int clip_len, const RandomStream& rng,
                                                  const DatagenOptions& opts = {}) {
  return build_preference_dataset_with_trajectories(spec, quality, n_pairs, clip_len, rng, opts)
      .dataset;
}

// ---- JSON-lines file format ----
// Line 1: header object {"type":"header", provenance...}.
// Lines 2..: {"clip_1":{...},"clip_2":{...},"label":0|1,"p_true":p} where
// label 0 means clip_1 is preferred.

inline nlohmann::json clip_to_json(const Clip& c) {
  auto rows = [](const std::vector<Vec>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& x : v) arr.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    return arr;
  };
  return {{"states", rows(c.states)}, {"actions", rows(c.actions)}, {"rewards", c.rewards}};
}

inline Clip clip_from_json(const nlohmann::json& j) {
  auto rows = [](const nlohmann::json& arr) {
    std::vector<Vec> out;
    for (const auto& row : arr) {
      const auto v = row.get<std::vector<double>>();
      out.emplace_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return out;
  };
  Clip c;
  c.states = rows(j.at("states"));
  c.actions = rows(j.at("actions"));
  c.rewards = j.at("rewards").get<std::vector<double>>();
  require(c.states.size() == c.actions.size() && c.actions.size() == c.rewards.size(),
          "clip_from_json: ragged clip");
  return c;
}

inline nlohmann::json dataset_header(const PreferenceDataset& ds) {
  return {{"type", "header"},
          {"version", std::string(kArtifactVersion)},
          {"env_id", to_string(ds.env_id)},
          {"env_fingerprint", env_fingerprint(ds.env_id)},
          {"quality", to_string(ds.quality)},
          {"clip_len", ds.clip_len},
          {"n_pairs", ds.pairs.size()},
          {"n_trajectories", ds.n_trajectories},
          {"seed", ds.seed},
          {"normalization", {{"min", ds.normalization.min}, {"max", ds.normalization.max}}},
          {"fingerprint", ds.fingerprint}};
}

inline std::string dataset_to_jsonl(const PreferenceDataset& ds) {
  std::string out = dataset_header(ds).dump() + "\n";
  for (const auto& p : ds.pairs) {
    nlohmann::json line = {{"clip_1", clip_to_json(p.first)},
                           {"clip_2", clip_to_json(p.second)},
                           {"label", static_cast<int>(p.label)},
                           {"p_true", p.p_true}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline void save_dataset(const PreferenceDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_jsonl(ds));
}

inline PreferenceDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset file " + path.string());
  const auto header = nlohmann::json::parse(line);
  if (header.value("type", "") != "header") throw ConfigError("dataset missing header line");
  if (header.value("version", "") != kArtifactVersion)
    throw ConfigError("dataset artifact version mismatch: " + header.value("version", ""));
  PreferenceDataset ds;
  ds.env_id = parse_env_id(header.at("env_id").get<std::string>());
  if (header.value("env_fingerprint", "") != env_fingerprint(ds.env_id))
    throw ConfigError("env fingerprint mismatch: dataset was built for a different " + to_string(ds.env_id));
  ds.quality = parse_behavior_tag(header.at("quality").get<std::string>());
  ds.clip_len = header.at("clip_len").get<int>();
  ds.n_trajectories = header.at("n_trajectories").get<int>();
  ds.seed = header.at("seed").get<std::uint64_t>();
  ds.normalization.min = header.at("normalization").at("min").get<double>();
  ds.normalization.max = header.at("normalization").at("max").get<double>();
  ds.fingerprint = header.value("fingerprint", "");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    PreferencePair p;
    p.first = clip_from_json(j.at("clip_1"));
    p.second = clip_from_json(j.at("clip_2"));
    const int label = j.at("label").get<int>();
    require(label == 0 || label == 1, "load_dataset: label must be 0 or 1");
    p.label = static_cast<PreferenceLabel>(label);
    p.p_true = j.at("p_true").get<double>();
    require(p.first.size() == static_cast<std::size_t>(ds.clip_len) &&
                p.second.size() == static_cast<std::size_t>(ds.clip_len),
            "load_dataset: clip length mismatch");
    ds.pairs.push_back(std::move(p));
  }
  require(!ds.pairs.empty(), "load_dataset: dataset has no pairs");
  return ds;
}

}  // namespace prc

#endif  // PRC_DATAGEN_HPP_
