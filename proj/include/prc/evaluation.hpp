#ifndef PRC_EVALUATION_HPP_
#define PRC_EVALUATION_HPP_

#include "prc/models.hpp"

namespace prc {

struct EvalReport {
  double true_mean = 0.0;
  double true_std = 0.0;
  double sim_mean = 0.0;
  double sim_std = 0.0;
  bool has_simulated = false;
  double normalized_score = 0.0;
  int n_episodes = 0;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;  // filled when requested

  nlohmann::json to_json() const {
    nlohmann::json j = {{"true_return_mean", true_mean},
                        {"true_return_std", true_std},
                        {"normalized_score", normalized_score},
                        {"n_episodes", n_episodes},
                        {"seed", seed}};
    if (has_simulated) {
      j["simulated_return_mean"] = sim_mean;
      j["simulated_return_std"] = sim_std;
    }
    return j;
  }
};

// Mean and sample standard deviation (0 for a single value).
inline std::pair<double, double> mean_std(std::span<const double> xs) {
  require(!xs.empty(), "mean_std: empty input");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// Seed of the evaluation streams for a run, shared by every method
// evaluated under the same run seed.
inline std::uint64_t evaluation_seed(std::uint64_t run_seed) { return mix_seed(run_seed, 0xE7A1); }

/// Monte-Carlo evaluation; episode k runs on RandomStream(seed).derive(k).
/// Simulated returns are utility sums over the executed (state, action)
/// steps, recomputable from the stored trajectories.
inline EvalReport evaluate_policy(const EnvSpec& spec, Policy& policy, const UtilityModel* utility,
                                  int n_episodes, std::uint64_t seed, bool keep_trajectories = false) {
  require(n_episodes >= 1, "evaluate_policy: n_episodes must be >= 1");
  EvalReport rep;
  rep.n_episodes = n_episodes;
  rep.seed = seed;
  rep.has_simulated = utility != nullptr;
  const RandomStream master(seed);
  std::vector<double> true_returns;
  std::vector<double> sim_returns;
  for (int k = 0; k < n_episodes; ++k) {
    RandomStream rng = master.derive(static_cast<std::uint64_t>(k));
    Trajectory traj = rollout(spec, policy, rng);
    true_returns.push_back(traj.true_return());
    if (utility) sim_returns.push_back(utility->trajectory_sum(traj));
    if (keep_trajectories) rep.trajectories.push_back(std::move(traj));
  }
  std::tie(rep.true_mean, rep.true_std) = mean_std(true_returns);
  if (utility) std::tie(rep.sim_mean, rep.sim_std) = mean_std(sim_returns);
  rep.normalized_score = normalized_score(spec, rep.true_mean);
  return rep;
}

}  // namespace prc

#endif  // PRC_EVALUATION_HPP_
