#ifndef PRC_EXPERIMENTS_HPP_
#define PRC_EXPERIMENTS_HPP_

#include "prc/rl.hpp"

#include <map>
#include <set>

namespace prc {

// ---- trend alignment ----

/// Ranks starting at 1; tied values share their average rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  // a constant input; value forced to 0
};

inline Correlation spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), "spearman: curves must have equal nonzero length");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

struct TrendReport {
  std::vector<double> simulated;
  std::vector<double> true_returns;
  Correlation correlation;
};

inline TrendReport trend_alignment(std::span<const EpochMetrics> metrics) {
  require(metrics.size() >= 3, "trend_alignment: need at least 3 epochs");
  TrendReport rep;
  for (const auto& m : metrics) {
    rep.simulated.push_back(m.simulated_return);
    rep.true_returns.push_back(m.true_return);
  }
  rep.correlation = spearman(rep.simulated, rep.true_returns);
  return rep;
}

// ---- experiment workbench ----

struct ExperimentConfig {
  EnvId env = EnvId::PointReach;
  BehaviorTag quality = BehaviorTag::Medium;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int n_pairs = 20000;
  int clip_len = 20;
  DatagenOptions datagen;
  TrainConfig reward = TrainConfig::reward_defaults();
  TrainConfig bc = TrainConfig::bc_defaults();
  RlConfig rl;          // regime, alpha, radius and seed are set per run
  double radius = -1.0; // prc; negative selects the default radius
  double alpha = 0.1;   // kl
  int anchor_episodes = 100;
  double fig3_threshold = 50.0;
  int workers = 1;
};

/// Step-one artifacts for one seed: dataset, utility model, clones.
struct SeedArtifacts {
  DatasetBuild data;
  UtilityModel utility;
  std::shared_ptr<const DetPolicy> bc;
  std::shared_ptr<const GaussianPolicy> bc_gaussian;
  EvalReport bc_eval;
};

/// Lazily builds and caches datasets, step-one models and PPO runs keyed
/// by seed and method, so several experiments can share them.
class Workbench {
 public:
  explicit Workbench(ExperimentConfig cfg) : cfg_(std::move(cfg)), spec_(make_env_spec(cfg_.env)) {}

  const ExperimentConfig& config() const { return cfg_; }
  const EnvSpec& spec() const { return spec_; }

  const SeedArtifacts& artifacts(std::uint64_t seed) {
    auto it = artifacts_.find(seed);
    if (it != artifacts_.end()) return it->second;
    SeedArtifacts a;
    DatagenOptions dopt = cfg_.datagen;
    dopt.workers = cfg_.workers;
    a.data = build_preference_dataset_with_trajectories(spec_, cfg_.quality, cfg_.n_pairs, cfg_.clip_len,
                                                        RandomStream(seed), dopt);
    RandomStream reward_rng(mix_seed(seed, 0x5E));
    a.utility = train_reward_model(a.data.dataset, cfg_.reward, reward_rng);
    RandomStream bc_rng(mix_seed(seed, 0xBC));
    const StateActionSet sa = extract_state_actions(a.data.dataset);
    a.bc = std::make_shared<const DetPolicy>(train_bc_deterministic(spec_, sa, cfg_.bc, bc_rng));
    DetPolicy bc_copy = *a.bc;
    a.bc_eval = evaluate_policy(spec_, bc_copy, &a.utility, cfg_.rl.eval_episodes, evaluation_seed(seed));
    return artifacts_.emplace(seed, std::move(a)).first->second;
  }

  const GaussianPolicy& gaussian_clone(std::uint64_t seed) {
    artifacts(seed);
    auto& a = artifacts_.at(seed);
    if (!a.bc_gaussian) {
      RandomStream rng(mix_seed(seed, 0x6A));
      a.bc_gaussian = std::make_shared<const GaussianPolicy>(
          train_bc_gaussian(spec_, extract_state_actions(a.data.dataset), cfg_.bc, rng));
    }
    return *a.bc_gaussian;
  }

  RlConfig run_config(Regime regime, std::uint64_t seed) const {
    RlConfig rc = cfg_.rl;
    rc.regime = regime;
    rc.seed = seed;
    rc.alpha = regime == Regime::Kl ? cfg_.alpha : 0.0;
    rc.radius = regime == Regime::Prc ? cfg_.radius : -1.0;
    return rc;
  }

  RlProblem problem(Regime regime, std::uint64_t seed) {
    const SeedArtifacts& a = artifacts(seed);
    RlProblem p{spec_, &a.utility, a.bc, nullptr, nullptr};
    if (regime == Regime::Kl) p.bc_gaussian = &gaussian_clone(seed);
    if (regime == Regime::Prc) {
      const Vec r = cfg_.radius >= 0.0 ? Vec::Constant(spec_.action_dim, cfg_.radius)
                                       : ConstrainedEnv::default_radius(spec_);
      p.wrapped = std::make_shared<const ConstrainedEnv>(spec_, a.bc, r);
    }
    return p;
  }

  const PpoResult& run(std::uint64_t seed, Regime regime) {
    const auto key = std::make_pair(seed, to_string(regime));
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    return runs_.emplace(key, ppo_train(problem(regime, seed), run_config(regime, seed))).first->second;
  }

  /// PPO from scratch (naive regime, no clone init) against an arbitrary
  /// utility model; used to compare reward sources.
  PpoResult run_from_scratch(std::uint64_t seed, const UtilityModel& utility) const {
    RlConfig rc = run_config(Regime::Naive, seed);
    rc.init_from_bc = false;
    RlProblem p{spec_, &utility, nullptr, nullptr, nullptr};
    return ppo_train(p, rc);
  }

 private:
  ExperimentConfig cfg_;
  EnvSpec spec_;
  std::map<std::uint64_t, SeedArtifacts> artifacts_;
  std::map<std::pair<std::uint64_t, std::string>, PpoResult> runs_;
};

// ---- pessimism alignment ----

struct MethodSeedTrend {
  Regime method = Regime::Prc;
  std::uint64_t seed = 0;
  TrendReport trend;
};

struct Fig1Result {
  std::vector<MethodSeedTrend> trends;
  std::string csv;  // method,seed,epoch,simulated_return,true_return
};

inline Fig1Result run_experiment_fig1(Workbench& wb, std::span<const Regime> methods,
                                      std::span<const std::uint64_t> seeds) {
  Fig1Result out;
  out.csv = "method,seed,epoch,simulated_return,true_return\n";
  for (Regime m : methods)
    for (std::uint64_t seed : seeds) {
      const PpoResult& run = wb.run(seed, m);
      out.trends.push_back({m, seed, trend_alignment(run.metrics)});
      for (const auto& row : run.metrics)
        out.csv += to_string(m) + "," + std::to_string(seed) + "," + std::to_string(row.epoch) + "," +
                   format_double(row.simulated_return) + "," + format_double(row.true_return) + "\n";
    }
  return out;
}

// ---- constrained-space efficiency ----

struct LearningCurve {
  Regime method = Regime::Prc;
  std::uint64_t seed = 0;
  std::vector<double> simulated;
  double start_eval = 0.0;  // deterministic evaluation before any update
  double improvement = 0.0;
};

/// Mean of the last `tail` entries minus the first entry.
inline double curve_improvement(std::span<const double> curve, std::size_t tail = 5) {
  require(!curve.empty(), "curve_improvement: empty curve");
  tail = std::min(tail, curve.size());
  double end = 0.0;
  for (std::size_t i = curve.size() - tail; i < curve.size(); ++i) end += curve[i];
  return end / static_cast<double>(tail) - curve.front();
}

struct Fig2Result {
  std::vector<LearningCurve> curves;
  std::string csv;  // method,seed,epoch,simulated_return
};

inline Fig2Result run_experiment_fig2(Workbench& wb, std::span<const Regime> methods,
                                      std::span<const std::uint64_t> seeds) {
  Fig2Result out;
  out.csv = "method,seed,epoch,simulated_return\n";
  for (Regime m : methods)
    for (std::uint64_t seed : seeds) {
      const PpoResult& run = wb.run(seed, m);
      LearningCurve c{m, seed, {}, run.evaluations.front().simulated_return, 0.0};
      for (const auto& row : run.metrics) {
        c.simulated.push_back(row.simulated_return);
        out.csv += to_string(m) + "," + std::to_string(seed) + "," + std::to_string(row.epoch) + "," +
                   format_double(row.simulated_return) + "\n";
      }
      c.improvement = curve_improvement(c.simulated);
      out.curves.push_back(std::move(c));
    }
  return out;
}

// ---- preference vs reward signal ----

struct SimulatedAnchors {
  double random = 0.0;
  double expert = 0.0;
  double normalize(double sim) const { return 100.0 * (sim - random) / (expert - random); }
};

/// Random and scripted-expert returns measured under a learned utility.
inline SimulatedAnchors simulated_anchors(const EnvSpec& spec, const UtilityModel& utility, int episodes,
                                          std::uint64_t seed) {
  UniformRandomPolicy random(spec);
  ExpertPolicy expert(spec);
  return {evaluate_policy(spec, random, &utility, episodes, seed).sim_mean,
          evaluate_policy(spec, expert, &utility, episodes, seed).sim_mean};
}

struct RewardSourceRun {
  std::string source;  // "regression" or "preference"
  std::uint64_t seed = 0;
  SimulatedAnchors anchors;
  std::vector<double> normalized_curve;
  std::optional<int> epochs_to_threshold;
  double fit_metric = 0.0;  // held-out RMS (regression) or final loss (preference)
};

struct Fig3Result {
  std::vector<RewardSourceRun> runs;
  std::string csv;  // source,seed,epoch,simulated_return,simulated_normalized
};

inline std::optional<int> first_crossing(std::span<const double> curve, double threshold) {
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve[i] >= threshold) return static_cast<int>(i);
  return std::nullopt;
}

inline Fig3Result run_experiment_fig3(Workbench& wb, std::span<const std::uint64_t> seeds) {
  const auto& cfg = wb.config();
  Fig3Result out;
  out.csv = "source,seed,epoch,simulated_return,simulated_normalized\n";
  for (std::uint64_t seed : seeds) {
    const SeedArtifacts& a = wb.artifacts(seed);
    RandomStream reg_rng(mix_seed(seed, 0x4E6));
    const RegressionFit fit = train_reward_regression(a.data.trajectories, cfg.reward, reg_rng);
    const std::pair<std::string, const UtilityModel*> sources[] = {{"regression", &fit.model},
                                                                   {"preference", &a.utility}};
    for (const auto& [name, model] : sources) {
      RewardSourceRun r;
      r.source = name;
      r.seed = seed;
      r.fit_metric = name == "regression" ? fit.heldout_rms : model->loss_history.back();
      r.anchors = simulated_anchors(wb.spec(), *model, cfg.anchor_episodes, evaluation_seed(seed));
      const PpoResult run = wb.run_from_scratch(seed, *model);
      for (const auto& row : run.metrics) {
        const double norm = r.anchors.normalize(row.simulated_return);
        r.normalized_curve.push_back(norm);
        out.csv += name + "," + std::to_string(seed) + "," + std::to_string(row.epoch) + "," +
                   format_double(row.simulated_return) + "," + format_double(norm) + "\n";
      }
      r.epochs_to_threshold = first_crossing(r.normalized_curve, cfg.fig3_threshold);
      out.runs.push_back(std::move(r));
    }
  }
  return out;
}

// ---- summary table ----

struct RunSummary {
  std::string env;
  std::string quality;
  std::string method;
  std::uint64_t seed = 0;
  double best_normalized_score = 0.0;
  double bc_normalized_score = 0.0;
  std::string bc_fingerprint;
  std::string version;
  std::filesystem::path directory;
};

inline RunSummary load_run_summary(const std::filesystem::path& run_json) {
  const auto j = nlohmann::json::parse(read_file(run_json));
  RunSummary r;
  r.env = j.at("env_id").get<std::string>();
  r.quality = j.at("quality").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.best_normalized_score = j.at("best_normalized_score").get<double>();
  r.bc_normalized_score = j.at("bc_normalized_score").get<double>();
  r.bc_fingerprint = j.value("bc_fingerprint", "");
  r.version = j.value("version", "");
  r.directory = run_json.parent_path();
  return r;
}

struct SummaryTable {
  std::string csv;
  std::vector<std::string> missing;  // "<env>/<quality>/<method>" cells without runs
  std::size_t n_runs = 0;
};

inline const std::vector<std::string>& table_methods() {
  static const std::vector<std::string> kMethods{"prc", "kl", "naive"};
  return kMethods;
}

/// Aggregates every run.json under `results` into a datasets x methods
/// table of best normalized scores (mean, std over seeds), with a BC
/// reference column and a column-sum row. Cells only come from runs whose
/// metrics.csv is present; the provenance column lists them.
inline SummaryTable report_table(const std::filesystem::path& results) {
  std::vector<RunSummary> runs;
  if (std::filesystem::exists(results)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(results))
      if (e.is_regular_file() && e.path().filename() == "run.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      RunSummary r = load_run_summary(f);
      if (!std::filesystem::exists(r.directory / "metrics.csv")) continue;
      runs.push_back(std::move(r));
    }
  }
  std::set<std::string> versions;
  for (const auto& r : runs) versions.insert(r.version);
  if (versions.size() > 1) throw ConfigError("report: runs carry mixed artifact versions");
  if (versions.size() == 1 && *versions.begin() != kArtifactVersion)
    throw ConfigError("report: runs carry artifact version " + *versions.begin());

  SummaryTable table;
  table.n_runs = runs.size();
  table.csv = "dataset,bc_mean,bc_std";
  for (const auto& m : table_methods()) table.csv += "," + m + "_mean," + m + "_std";
  table.csv += ",provenance\n";

  std::map<std::string, std::vector<const RunSummary*>> by_dataset;
  for (const auto& r : runs) by_dataset[r.env + "-" + r.quality].push_back(&r);

  std::vector<double> sums(1 + table_methods().size(), 0.0);
  for (const auto& [dataset, rs] : by_dataset) {
    std::string row = dataset;
    std::vector<std::string> provenance;
    // BC reference: one score per distinct clone.
    std::map<std::string, double> bc_scores;
    for (const auto* r : rs) bc_scores.emplace(r->bc_fingerprint + "#" + std::to_string(r->seed), r->bc_normalized_score);
    std::vector<double> bc;
    for (const auto& [k, v] : bc_scores) bc.push_back(v);
    const auto [bc_mean, bc_std] = mean_std(bc);
    row += "," + format_double(bc_mean) + "," + format_double(bc_std);
    sums[0] += bc_mean;
    for (std::size_t mi = 0; mi < table_methods().size(); ++mi) {
      std::vector<double> scores;
      for (const auto* r : rs)
        if (r->method == table_methods()[mi]) {
          scores.push_back(r->best_normalized_score);
          provenance.push_back(r->directory.filename().string());
        }
      if (scores.empty()) {
        row += ",,";
        table.missing.push_back(dataset + "/" + table_methods()[mi]);
        continue;
      }
      const auto [m, s] = mean_std(scores);
      row += "," + format_double(m) + "," + format_double(s);
      sums[mi + 1] += m;
    }
    std::string prov;
    for (const auto& p : provenance) prov += (prov.empty() ? "" : ";") + p;
    table.csv += row + "," + prov + "\n";
  }
  if (!by_dataset.empty()) {
    table.csv += "Sum Totals," + format_double(sums[0]) + ",";
    for (std::size_t mi = 0; mi < table_methods().size(); ++mi)
      table.csv += "," + format_double(sums[mi + 1]) + ",";
    table.csv += ",\n";
  }
  return table;
}

}  // namespace prc

#endif  // PRC_EXPERIMENTS_HPP_
