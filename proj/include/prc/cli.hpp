#ifndef PRC_CLI_HPP_
#define PRC_CLI_HPP_

#include "prc/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace prc::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HelpShown {};

struct RunConfig {
  std::string command;
  std::string env;  // empty: taken from the inputs
  std::string quality = "medium";
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out;

  // gen-data
  int pairs = 20000;
  int clip_len = 20;
  int trajectories = 100;

  // train-reward / train-bc
  std::string data;
  std::string kind = "det";
  int train_epochs = 0;  // 0: per-model default
  int batch_size = 256;
  double lr = 3e-4;

  // train
  std::string method;
  std::string reward_model;
  std::string bc;
  std::string bc_gauss;
  std::optional<double> radius;
  std::optional<double> alpha;
  std::optional<double> threshold;
  RlConfig rl;
  bool no_bc_init = false;
  double vi_tol = 1e-10;

  // eval
  std::string policy;
  int episodes = 20;

  // experiment
  std::string figure;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int reward_epochs = 50;
  int bc_epochs = 100;
  double score_threshold = 50.0;

  // report
  std::string results;

  nlohmann::json effective;  // flag name -> effective value, echoed with outputs

  // Output location and thread count do not change results. Input files
  // enter by content, so a rerun from another directory hashes the same.
  std::string config_fingerprint() const {
    nlohmann::json j = effective;
    j.erase("out");
    j.erase("workers");
    j.erase("results");
    for (const char* key : {"data", "reward-model", "bc", "bc-gauss", "policy"}) {
      if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) continue;
      j[key] = fingerprint(read_file(j[key].get<std::string>()));
    }
    return fingerprint(j.dump());
  }
};

// ---- parsing ----

namespace detail {

inline std::uint64_t default_seed() {
  if (const char* s = std::getenv("PRC_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw UsageError("PRC_SEED must be a non-negative integer, got '" + std::string(s) + "'");
    }
  }
  return 0;
}

inline std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw UsageError("config values must be scalars or arrays of scalars");
}

/// Applies config-file entries to options the command line left unset.
inline void apply_config(CLI::App& sub, const nlohmann::json& cfg) {
  if (!cfg.is_object()) throw UsageError("--config must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "help" || key == "config")
      throw UsageError("unknown config key '" + key + "' for " + sub.get_name());
    if (opt->count() > 0) continue;  // flags win
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(json_scalar(v));
    } else {
      opt->add_result(json_scalar(value));
    }
    opt->run_callback();
  }
}

inline nlohmann::json effective_config(const CLI::App& sub) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1) j[name] = r.front();
      else j[name] = r;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  j["command"] = sub.get_name();
  j["version"] = std::string(kArtifactVersion);
  return j;
}

inline void add_common(CLI::App& sub, RunConfig& rc) {
  sub.add_option("--seed", rc.seed, "Master seed (default: $PRC_SEED or 0)");
  sub.add_option("--workers", rc.workers, "Worker thread cap")->check(CLI::PositiveNumber);
  sub.add_option("--config", "JSON config file; command-line flags take precedence");
}

inline void add_rl_options(CLI::App& sub, RunConfig& rc) {
  auto& rl = rc.rl;
  sub.add_option("--epochs", rl.epochs, "PPO epochs");
  sub.add_option("--steps-per-epoch", rl.steps_per_epoch, "Environment steps per epoch");
  sub.add_option("--update-epochs", rl.update_epochs, "PPO passes per batch");
  sub.add_option("--minibatch", rl.minibatch_size, "PPO minibatch size");
  sub.add_option("--gamma", rl.gamma, "Discount");
  sub.add_option("--gae-lambda", rl.gae_lambda, "GAE lambda");
  sub.add_option("--clip-ratio", rl.clip_ratio, "PPO clip ratio");
  sub.add_option("--actor-lr", rl.actor_lr, "Actor learning rate");
  sub.add_option("--critic-lr", rl.critic_lr, "Critic learning rate");
  sub.add_option("--entropy-coef", rl.entropy_coef, "Entropy bonus");
  sub.add_option("--init-std", rl.init_std, "Initial actor standard deviation");
  sub.add_flag("--no-bc-init", rc.no_bc_init, "Start naive/kl actors from scratch");
  sub.add_option("--eval-interval", rl.eval_interval, "Epochs between evaluations");
  sub.add_option("--eval-episodes", rl.eval_episodes, "Episodes per evaluation");
}

inline void need(const std::string& value, const std::string& flag, const std::string& why) {
  if (value.empty()) throw UsageError(flag + " is required " + why);
}

// env id and fingerprint recorded in a dataset header or checkpoint meta.
inline std::pair<std::string, std::string> recorded_env(const std::string& path) {
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(first);
    if (j.value("type", "") != "header") {
      in.clear();
      in.seekg(0);
      j = nlohmann::json::parse(in)["meta"];
    }
  } catch (const nlohmann::json::exception&) {
    throw UsageError("unreadable input file " + path);
  }
  if (!j.is_object() || !j.contains("env_id")) throw UsageError("input file has no env record: " + path);
  return {j.value("env_id", ""), j.value("env_fingerprint", "")};
}

inline void validate(RunConfig& rc) {
  const auto& c = rc.command;
  if (!rc.env.empty()) parse_env_id(rc.env);
  parse_behavior_tag(rc.quality);
  if (c == "gen-data") {
    need(rc.env, "--env", "for gen-data");
    need(rc.out, "--out", "for gen-data");
    if (rc.pairs < 1) throw UsageError("--pairs must be >= 1");
    if (rc.clip_len < 1) throw UsageError("--clip-len must be >= 1");
    if (rc.trajectories < 1) throw UsageError("--trajectories must be >= 1");
  } else if (c == "train-reward" || c == "train-bc") {
    need(rc.data, "--data", "for " + c);
    need(rc.out, "--out", "for " + c);
    if (c == "train-bc" && rc.kind != "det" && rc.kind != "gauss")
      throw UsageError("--kind must be det or gauss");
    if (rc.train_epochs < 0 || rc.batch_size < 1 || !(rc.lr > 0.0))
      throw UsageError("--epochs, --batch-size and --lr must be positive");
  } else if (c == "train") {
    need(rc.method, "--method", "for train");
    need(rc.env, "--env", "for train");
    need(rc.reward_model, "--reward-model", "for train");
    need(rc.out, "--out", "for train");
    const std::string& m = rc.method;
    if (m != "prc" && m != "naive" && m != "kl" && m != "tabular-prc")
      throw UsageError("--method must be one of prc, naive, kl, tabular-prc");
    if (rc.radius && m != "prc") throw UsageError("--radius applies to --method prc only");
    if (rc.alpha && m != "kl") throw UsageError("--alpha applies to --method kl only");
    if (rc.threshold && m != "tabular-prc") throw UsageError("--threshold applies to --method tabular-prc only");
    if (m == "tabular-prc") {
      need(rc.data, "--data", "for --method tabular-prc (behavior frequencies)");
      if (!rc.threshold) throw UsageError("--threshold is required for --method tabular-prc");
    } else {
      if (m == "prc" || !rc.no_bc_init) need(rc.bc, "--bc", "for --method " + m);
      if (m == "kl") need(rc.bc_gauss, "--bc-gauss", "for --method kl");
      if (rc.radius && !(*rc.radius >= 0.0)) throw UsageError("--radius must be >= 0");
      if (rc.alpha && !(*rc.alpha >= 0.0)) throw UsageError("--alpha must be >= 0");
    }
  } else if (c == "eval") {
    need(rc.policy, "--policy", "for eval");
    need(rc.out, "--out", "for eval");
    if (rc.episodes < 1) throw UsageError("--episodes must be >= 1");
  } else if (c == "experiment") {
    need(rc.figure, "--figure", "for experiment");
    need(rc.env, "--env", "for experiment");
    need(rc.out, "--out", "for experiment");
    if (rc.figure != "fig1" && rc.figure != "fig2" && rc.figure != "fig3")
      throw UsageError("--figure must be fig1, fig2 or fig3");
    if (rc.seeds.empty()) throw UsageError("--seeds must list at least one seed");
  } else if (c == "report") {
    need(rc.results, "--results", "for report");
    need(rc.out, "--out", "for report");
  }
  for (const std::string* path : {&rc.data, &rc.reward_model, &rc.bc, &rc.bc_gauss, &rc.policy})
    if (!path->empty() && !std::filesystem::exists(*path)) throw UsageError("missing input file " + *path);
  if (!rc.env.empty()) {
    const std::string want = env_fingerprint(parse_env_id(rc.env));
    for (const std::string* path : {&rc.data, &rc.reward_model, &rc.bc, &rc.bc_gauss, &rc.policy}) {
      if (path->empty()) continue;
      const auto [id, fp] = recorded_env(*path);
      if (fp != want)
        throw UsageError("env fingerprint mismatch: " + *path + " belongs to " + id + ", run requested " + rc.env);
    }
  }
  if (c == "report" && !std::filesystem::is_directory(rc.results))
    throw UsageError("--results is not a directory: " + rc.results);
}

}  // namespace detail

/// Parses argv into a validated config. Throws HelpShown after printing
/// help, UsageError for malformed flags or semantic problems.
inline RunConfig parse_and_validate(int argc, const char* const* argv) {
  RunConfig rc;
  rc.seed = detail::default_seed();
  CLI::App app{"Preference-based offline RL with constrained action spaces"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  const std::vector<std::string> envs{"point-reach", "narrow-path", "gridworld"};
  const std::vector<std::string> qualities{"random", "medium", "replay", "expert"};

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic preference dataset");
  gen->option_defaults()->always_capture_default();
  gen->add_option("--env", rc.env, "Environment")->check(CLI::IsMember(envs));
  gen->add_option("--quality", rc.quality, "Behavior policy")->check(CLI::IsMember(qualities));
  gen->add_option("--pairs", rc.pairs, "Number of preference pairs");
  gen->add_option("--clip-len", rc.clip_len, "Clip length");
  gen->add_option("--trajectories", rc.trajectories, "Behavior rollouts to sample clips from");
  gen->add_option("--out", rc.out, "Dataset file (JSON lines)");
  detail::add_common(*gen, rc);

  auto* reward = app.add_subcommand("train-reward", "Fit the utility model on preferences");
  reward->option_defaults()->always_capture_default();
  reward->add_option("--data", rc.data, "Dataset file");
  reward->add_option("--env", rc.env, "Expected environment")->check(CLI::IsMember(envs));
  reward->add_option("--epochs", rc.train_epochs, "Training epochs (0: default 50)");
  reward->add_option("--batch-size", rc.batch_size, "Minibatch size");
  reward->add_option("--lr", rc.lr, "Adam learning rate");
  reward->add_option("--out", rc.out, "Checkpoint file");
  detail::add_common(*reward, rc);

  auto* bc = app.add_subcommand("train-bc", "Behavior cloning on dataset state-actions");
  bc->option_defaults()->always_capture_default();
  bc->add_option("--data", rc.data, "Dataset file");
  bc->add_option("--env", rc.env, "Expected environment")->check(CLI::IsMember(envs));
  bc->add_option("--kind", rc.kind, "det or gauss")->check(CLI::IsMember({"det", "gauss"}));
  bc->add_option("--epochs", rc.train_epochs, "Training epochs (0: default 100)");
  bc->add_option("--batch-size", rc.batch_size, "Minibatch size");
  bc->add_option("--lr", rc.lr, "Adam learning rate");
  bc->add_option("--out", rc.out, "Checkpoint file");
  detail::add_common(*bc, rc);

  auto* train = app.add_subcommand("train", "Policy optimization against a learned utility");
  train->option_defaults()->always_capture_default();
  train->add_option("--method", rc.method, "prc, naive, kl or tabular-prc");
  train->add_option("--env", rc.env, "Environment")->check(CLI::IsMember(envs));
  train->add_option("--reward-model", rc.reward_model, "Utility checkpoint");
  train->add_option("--bc", rc.bc, "Deterministic clone checkpoint");
  train->add_option("--bc-gauss", rc.bc_gauss, "Gaussian clone checkpoint (kl)");
  train->add_option("--data", rc.data, "Dataset file (tabular-prc behavior frequencies)");
  train->add_option("--radius", rc.radius, "Constraint box radius (prc)");
  train->add_option("--alpha", rc.alpha, "KL weight (kl)");
  train->add_option("--threshold", rc.threshold, "Behavior probability threshold (tabular-prc)");
  train->add_option("--vi-tol", rc.vi_tol, "Value iteration tolerance (tabular-prc)");
  detail::add_rl_options(*train, rc);
  train->add_option("--out", rc.out, "Output directory");
  detail::add_common(*train, rc);

  auto* eval = app.add_subcommand("eval", "Monte-Carlo evaluation of a policy checkpoint");
  eval->option_defaults()->always_capture_default();
  eval->add_option("--policy", rc.policy, "Policy checkpoint");
  eval->add_option("--env", rc.env, "Expected environment")->check(CLI::IsMember(envs));
  eval->add_option("--reward-model", rc.reward_model, "Utility checkpoint for simulated returns");
  eval->add_option("--episodes", rc.episodes, "Episodes");
  eval->add_option("--out", rc.out, "Report file (JSON)");
  detail::add_common(*eval, rc);

  auto* exp = app.add_subcommand("experiment", "Run a diagnostic experiment end to end");
  exp->option_defaults()->always_capture_default();
  exp->add_option("--figure", rc.figure, "fig1, fig2 or fig3");
  exp->add_option("--env", rc.env, "Environment")->check(CLI::IsMember(envs));
  exp->add_option("--quality", rc.quality, "Behavior policy")->check(CLI::IsMember(qualities));
  exp->add_option("--seeds", rc.seeds, "Seeds")->delimiter(',');
  exp->add_option("--pairs", rc.pairs, "Preference pairs per seed");
  exp->add_option("--clip-len", rc.clip_len, "Clip length");
  exp->add_option("--trajectories", rc.trajectories, "Behavior rollouts per seed");
  exp->add_option("--reward-epochs", rc.reward_epochs, "Utility model epochs");
  exp->add_option("--bc-epochs", rc.bc_epochs, "Clone epochs");
  exp->add_option("--radius", rc.radius, "Constraint box radius (prc)");
  exp->add_option("--alpha", rc.alpha, "KL weight (kl)");
  exp->add_option("--score-threshold", rc.score_threshold, "Simulated-score threshold (fig3)");
  detail::add_rl_options(*exp, rc);
  exp->add_option("--out", rc.out, "Output directory");
  detail::add_common(*exp, rc);

  auto* report = app.add_subcommand("report", "Summarize completed runs");
  report->option_defaults()->always_capture_default();
  report->add_option("--results", rc.results, "Directory holding run outputs");
  report->add_option("--out", rc.out, "Summary CSV");
  report->add_option("--config", "JSON config file; command-line flags take precedence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      throw HelpShown();
    }
    throw UsageError(e.what());
  }

  CLI::App* sub = app.get_subcommands().front();
  rc.command = sub->get_name();
  if (CLI::Option* cfg = sub->get_option_no_throw("--config"); cfg && cfg->count() > 0) {
    const std::string path = cfg->as<std::string>();
    if (!std::filesystem::exists(path)) throw UsageError("missing input file " + path);
    detail::apply_config(*sub, load_json(path));
  }
  detail::validate(rc);
  rc.effective = detail::effective_config(*sub);
  return rc;
}

// ---- policy artifacts ----

/// Trained-policy checkpoint: the actor plus, for prc, the frozen clone and
/// radius needed to translate it into the base action space.
inline nlohmann::json trained_policy_to_json(const RlProblem& problem, const GaussianPolicy& actor,
                                             Regime regime, int epoch, const ModelMeta& meta) {
  nlohmann::json j = {{"kind", "trained_policy"},
                      {"method", to_string(regime)},
                      {"meta", meta.to_json()},
                      {"epoch", epoch},
                      {"actor", to_json(actor)}};
  if (problem.wrapped) {
    j["bc"] = to_json(problem.wrapped->bc_policy());
    j["radius"] = to_std(problem.wrapped->radius());
  }
  return j;
}

inline nlohmann::json tabular_policy_to_json(const TabularPolicy& policy, const ModelMeta& meta) {
  return {{"kind", "tabular_policy"}, {"meta", meta.to_json()}, {"actions", policy.actions()}};
}

struct LoadedPolicy {
  EnvId env_id = EnvId::PointReach;
  std::unique_ptr<Policy> policy;
};

/// Any policy checkpoint as an executable base-space policy (clamped means
/// for Gaussian actors).
inline LoadedPolicy load_executable_policy(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "");
  LoadedPolicy out;
  out.env_id = ModelMeta::from_json(j.at("meta")).env_id;
  const EnvSpec spec = make_env_spec(out.env_id);
  if (kind == "det_policy") {
    out.policy = std::make_unique<DetPolicy>(det_policy_from_json(j));
  } else if (kind == "gauss_policy") {
    auto p = std::make_unique<GaussianPolicy>(gauss_policy_from_json(j));
    p->deterministic = true;
    out.policy = std::move(p);
  } else if (kind == "trained_policy") {
    RlProblem problem{spec, nullptr, nullptr, nullptr, nullptr};
    if (j.contains("bc")) {
      auto bc = std::make_shared<const DetPolicy>(det_policy_from_json(j.at("bc")));
      problem.wrapped = std::make_shared<const ConstrainedEnv>(
          spec, bc, to_vec(j.at("radius").get<std::vector<double>>()));
    }
    out.policy = executable_policy(problem, gauss_policy_from_json(j.at("actor")), true);
  } else if (kind == "tabular_policy") {
    out.policy = std::make_unique<TabularPolicy>(j.at("actions").get<std::vector<int>>());
  } else {
    throw ConfigError("not a policy checkpoint (kind '" + kind + "')");
  }
  return out;
}

// ---- pipelines ----

namespace detail {

inline void check_env(const std::string& expected, EnvId actual, const std::string& what) {
  if (!expected.empty() && parse_env_id(expected) != actual)
    throw ConfigError("env fingerprint mismatch: " + what + " belongs to " + to_string(actual) +
                      ", run requested " + expected);
}

inline std::filesystem::path sidecar(const std::string& file) { return file + ".config.json"; }

inline void echo_config(const RunConfig& rc, const std::filesystem::path& path) {
  save_json(rc.effective, path);
}

inline ModelMeta make_meta(const RunConfig& rc, EnvId env, BehaviorTag quality, const std::string& dataset_fp) {
  ModelMeta m;
  m.env_id = env;
  m.quality = quality;
  m.seed = rc.seed;
  m.fingerprint = rc.config_fingerprint();
  m.dataset_fingerprint = dataset_fp;
  return m;
}

inline int run_gen_data(const RunConfig& rc) {
  const EnvSpec spec = make_env_spec(parse_env_id(rc.env));
  DatagenOptions opts;
  opts.n_trajectories = rc.trajectories;
  opts.workers = rc.workers;
  const PreferenceDataset ds = build_preference_dataset(spec, parse_behavior_tag(rc.quality), rc.pairs,
                                                        rc.clip_len, RandomStream(rc.seed), opts);
  save_dataset(ds, rc.out);
  echo_config(rc, sidecar(rc.out));
  return 0;
}

inline TrainConfig step_one_config(const RunConfig& rc, TrainConfig defaults) {
  if (rc.train_epochs > 0) defaults.epochs = rc.train_epochs;
  defaults.batch_size = rc.batch_size;
  defaults.learning_rate = rc.lr;
  return defaults;
}

inline int run_train_reward(const RunConfig& rc) {
  const PreferenceDataset ds = load_dataset(rc.data);
  check_env(rc.env, ds.env_id, "dataset " + rc.data);
  RandomStream rng(rc.seed);
  UtilityModel model = train_reward_model(ds, step_one_config(rc, TrainConfig::reward_defaults()), rng);
  model.meta = make_meta(rc, ds.env_id, ds.quality, ds.fingerprint);
  save_json(to_json(model), rc.out);
  echo_config(rc, sidecar(rc.out));
  return 0;
}

inline int run_train_bc(const RunConfig& rc) {
  const PreferenceDataset ds = load_dataset(rc.data);
  check_env(rc.env, ds.env_id, "dataset " + rc.data);
  const EnvSpec spec = make_env_spec(ds.env_id);
  if (spec.discrete()) throw ConfigError("train-bc: clones are defined for continuous action spaces");
  RandomStream rng(rc.seed);
  const TrainConfig cfg = step_one_config(rc, TrainConfig::bc_defaults());
  const ModelMeta meta = make_meta(rc, ds.env_id, ds.quality, ds.fingerprint);
  if (rc.kind == "det") {
    DetPolicy p = train_bc_deterministic(spec, ds, cfg, rng);
    p.meta = meta;
    save_json(to_json(p), rc.out);
  } else {
    GaussianPolicy p = train_bc_gaussian(spec, ds, cfg, rng);
    p.meta = meta;
    save_json(to_json(p), rc.out);
  }
  echo_config(rc, sidecar(rc.out));
  return 0;
}

inline nlohmann::json run_record(const RunConfig& rc, EnvId env, BehaviorTag quality) {
  return {{"version", std::string(kArtifactVersion)},
          {"fingerprint", rc.config_fingerprint()},
          {"seed", rc.seed},
          {"env_id", to_string(env)},
          {"quality", to_string(quality)},
          {"method", rc.method}};
}

inline int run_train_tabular(const RunConfig& rc, const UtilityModel& utility) {
  const PreferenceDataset ds = load_dataset(rc.data);
  check_env(rc.env, ds.env_id, "dataset " + rc.data);
  const std::filesystem::path out(rc.out);
  const TabularPrcResult res = run_tabular_prc(ds, utility, *rc.threshold, rc.rl.gamma, rc.vi_tol, rc.seed);
  const EnvSpec spec = make_env_spec(EnvId::GridWorld5x5);
  // Clone reference: the most frequent dataset action per cell.
  const TabularMdp mdp = make_grid_mdp(grid::kSide);
  const Matrix behavior = estimate_tabular_behavior(ds, mdp);
  std::vector<int> greedy(static_cast<std::size_t>(mdp.n_states));
  for (int s = 0; s < mdp.n_states; ++s) {
    Eigen::Index a = 0;
    behavior.row(s).maxCoeff(&a);
    greedy[static_cast<std::size_t>(s)] = static_cast<int>(a);
  }
  TabularPolicy clone(greedy);
  const EvalReport bc_eval = evaluate_policy(spec, clone, &utility, 1, evaluation_seed(rc.seed));

  EpochMetrics row;
  row.simulated_return = res.evaluation.sim_mean;
  row.true_return = res.evaluation.true_mean;
  write_file_atomic(out / "metrics.csv", metrics_csv(std::span<const EpochMetrics>(&row, 1)));
  TabularPolicy policy(res.solution.policy);
  save_json(tabular_policy_to_json(policy, make_meta(rc, ds.env_id, ds.quality, ds.fingerprint)),
            out / "policy.json");
  nlohmann::json run = run_record(rc, ds.env_id, ds.quality);
  run["best_epoch"] = 0;
  run["best_simulated_return"] = res.evaluation.sim_mean;
  run["best_true_return"] = res.evaluation.true_mean;
  run["best_normalized_score"] = res.evaluation.normalized_score;
  run["bc_normalized_score"] = bc_eval.normalized_score;
  run["bc_fingerprint"] = ds.fingerprint;
  run["threshold"] = *rc.threshold;
  run["fallback_states"] = res.mask.fallback_states;
  run["support_violated"] = res.support_violated;
  run["value_iterations"] = res.solution.iterations;
  echo_config(rc, out / "config.json");
  save_json(run, out / "run.json");
  return 0;
}

inline int run_train(const RunConfig& rc) {
  const EnvId env = parse_env_id(rc.env);
  const UtilityModel utility = utility_from_json(load_json(rc.reward_model));
  check_env(rc.env, utility.meta.env_id, "reward model " + rc.reward_model);
  if (rc.method == "tabular-prc") return run_train_tabular(rc, utility);

  const EnvSpec spec = make_env_spec(env);
  if (spec.discrete()) throw ConfigError("--method " + rc.method + " needs a continuous environment");
  RlConfig cfg = rc.rl;
  cfg.regime = parse_regime(rc.method);
  cfg.seed = rc.seed;
  cfg.alpha = rc.alpha.value_or(cfg.regime == Regime::Kl ? 0.1 : 0.0);
  cfg.radius = rc.radius.value_or(-1.0);
  cfg.init_from_bc = !rc.no_bc_init;

  RlProblem problem{spec, &utility, nullptr, nullptr, nullptr};
  std::optional<GaussianPolicy> bc_gauss;
  if (!rc.bc.empty()) {
    auto bc = std::make_shared<const DetPolicy>(det_policy_from_json(load_json(rc.bc)));
    check_env(rc.env, bc->meta.env_id, "clone " + rc.bc);
    problem.bc = bc;
  }
  if (!rc.bc_gauss.empty()) {
    bc_gauss = gauss_policy_from_json(load_json(rc.bc_gauss));
    check_env(rc.env, bc_gauss->meta.env_id, "clone " + rc.bc_gauss);
    problem.bc_gaussian = &*bc_gauss;
  }
  if (cfg.regime == Regime::Prc) {
    const Vec r = rc.radius ? Vec::Constant(spec.action_dim, *rc.radius) : ConstrainedEnv::default_radius(spec);
    problem.wrapped = std::make_shared<const ConstrainedEnv>(spec, problem.bc, r);
  }

  const PpoResult res = ppo_train(problem, cfg);
  const std::filesystem::path out(rc.out);
  const ModelMeta meta = make_meta(rc, env, utility.meta.quality, utility.meta.dataset_fingerprint);

  nlohmann::json run = run_record(rc, env, utility.meta.quality);
  run["best_epoch"] = res.best.epoch;
  run["best_simulated_return"] = res.best.simulated_return;
  run["best_true_return"] = res.best.true_return;
  run["best_normalized_score"] = res.best.normalized_score;
  run["rl"] = cfg.to_json();
  if (problem.bc) {
    DetPolicy clone = *problem.bc;
    const EvalReport bc_eval = evaluate_policy(spec, clone, &utility, cfg.eval_episodes, evaluation_seed(rc.seed));
    run["bc_normalized_score"] = bc_eval.normalized_score;
    run["bc_simulated_return"] = bc_eval.sim_mean;
    run["bc_fingerprint"] = problem.bc->meta.fingerprint;
  } else {
    run["bc_normalized_score"] = nullptr;
  }
  if (problem.wrapped) run["clamp_warnings"] = problem.wrapped->clamp_warnings();

  write_file_atomic(out / "metrics.csv", metrics_csv(res.metrics));
  write_file_atomic(out / "evals.csv", evaluations_csv(res.evaluations));
  save_json(trained_policy_to_json(problem, res.best_policy.actor, cfg.regime, res.best.epoch, meta),
            out / "policy.json");
  save_json(trained_policy_to_json(problem, res.final_policy.actor, cfg.regime, cfg.epochs - 1, meta),
            out / "final_policy.json");
  echo_config(rc, out / "config.json");
  save_json(run, out / "run.json");  // written last: marks the run complete
  return 0;
}

inline int run_eval(const RunConfig& rc) {
  LoadedPolicy loaded = load_executable_policy(load_json(rc.policy));
  check_env(rc.env, loaded.env_id, "policy " + rc.policy);
  std::optional<UtilityModel> utility;
  if (!rc.reward_model.empty()) {
    utility = utility_from_json(load_json(rc.reward_model));
    if (utility->meta.env_id != loaded.env_id)
      throw ConfigError("env fingerprint mismatch: reward model and policy belong to different environments");
  }
  const EnvSpec spec = make_env_spec(loaded.env_id);
  const EvalReport rep = evaluate_policy(spec, *loaded.policy, utility ? &*utility : nullptr, rc.episodes, rc.seed);
  nlohmann::json j = rep.to_json();
  j["version"] = std::string(kArtifactVersion);
  j["fingerprint"] = rc.config_fingerprint();
  j["env_id"] = to_string(loaded.env_id);
  save_json(j, rc.out);
  echo_config(rc, sidecar(rc.out));
  return 0;
}

inline int run_experiment(const RunConfig& rc) {
  ExperimentConfig ec;
  ec.env = parse_env_id(rc.env);
  if (make_env_spec(ec.env).discrete()) throw ConfigError("experiments need a continuous environment");
  ec.quality = parse_behavior_tag(rc.quality);
  ec.seeds = rc.seeds;
  ec.n_pairs = rc.pairs;
  ec.clip_len = rc.clip_len;
  ec.datagen.n_trajectories = rc.trajectories;
  ec.reward.epochs = rc.reward_epochs;
  ec.bc.epochs = rc.bc_epochs;
  ec.rl = rc.rl;
  ec.rl.init_from_bc = !rc.no_bc_init;
  if (rc.radius) ec.radius = *rc.radius;
  if (rc.alpha) ec.alpha = *rc.alpha;
  ec.fig3_threshold = rc.score_threshold;
  ec.workers = rc.workers;
  Workbench wb(ec);

  const std::filesystem::path out(rc.out);
  nlohmann::json summary = {{"version", std::string(kArtifactVersion)},
                            {"fingerprint", rc.config_fingerprint()},
                            {"figure", rc.figure},
                            {"env_id", rc.env},
                            {"seeds", rc.seeds}};
  std::string csv;
  if (rc.figure == "fig1") {
    const Regime methods[] = {Regime::Prc, Regime::Naive, Regime::Kl};
    const Fig1Result r = run_experiment_fig1(wb, methods, rc.seeds);
    csv = r.csv;
    for (const auto& t : r.trends)
      summary["runs"].push_back({{"method", to_string(t.method)},
                                 {"seed", t.seed},
                                 {"spearman", t.trend.correlation.value},
                                 {"degenerate", t.trend.correlation.degenerate}});
  } else if (rc.figure == "fig2") {
    const Regime methods[] = {Regime::Prc, Regime::Kl, Regime::Naive};
    const Fig2Result r = run_experiment_fig2(wb, methods, rc.seeds);
    csv = r.csv;
    for (const auto& c : r.curves)
      summary["runs"].push_back({{"method", to_string(c.method)},
                                 {"seed", c.seed},
                                 {"improvement", c.improvement},
                                 {"start_evaluation", c.start_eval}});
  } else {
    const Fig3Result r = run_experiment_fig3(wb, rc.seeds);
    csv = r.csv;
    for (const auto& run : r.runs) {
      nlohmann::json e = {{"source", run.source},
                          {"seed", run.seed},
                          {"fit_metric", run.fit_metric},
                          {"anchor_random", run.anchors.random},
                          {"anchor_expert", run.anchors.expert}};
      e["epochs_to_threshold"] = run.epochs_to_threshold ? nlohmann::json(*run.epochs_to_threshold) : nlohmann::json();
      summary["runs"].push_back(e);
    }
  }
  write_file_atomic(out / "curves.csv", csv);
  echo_config(rc, out / "config.json");
  save_json(summary, out / "summary.json");
  return 0;
}

inline int run_report(const RunConfig& rc) {
  const SummaryTable table = report_table(rc.results);
  write_file_atomic(rc.out, table.csv);
  for (const auto& m : table.missing) std::cerr << "missing runs: " << m << "\n";
  if (table.n_runs == 0) {
    std::cerr << nlohmann::json({{"error", "no_runs"}, {"message", "no completed runs under " + rc.results}}).dump()
              << "\n";
    return 1;
  }
  return 0;
}

}  // namespace detail

inline int run_pipeline(const RunConfig& rc) {
  if (rc.command == "gen-data") return detail::run_gen_data(rc);
  if (rc.command == "train-reward") return detail::run_train_reward(rc);
  if (rc.command == "train-bc") return detail::run_train_bc(rc);
  if (rc.command == "train") return detail::run_train(rc);
  if (rc.command == "eval") return detail::run_eval(rc);
  if (rc.command == "experiment") return detail::run_experiment(rc);
  if (rc.command == "report") return detail::run_report(rc);
  throw UsageError("unknown subcommand " + rc.command);
}

inline void print_error(std::ostream& os, std::string_view kind, std::string_view message) {
  os << nlohmann::json({{"error", kind}, {"message", message}}).dump() << "\n";
}

/// Full entry point: 0 on success, 2 for usage errors, 1 otherwise. Every
/// failure prints a single JSON line on stderr.
inline int main_entry(int argc, const char* const* argv) {
  RunConfig rc;
  try {
    rc = parse_and_validate(argc, argv);
  } catch (const HelpShown&) {
    return 0;
  } catch (const UsageError& e) {
    print_error(std::cerr, "usage", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error(std::cerr, "config", e.what());
    return 2;
  }
  try {
    return run_pipeline(rc);
  } catch (const ConfigError& e) {
    print_error(std::cerr, "config", e.what());
  } catch (const ContractViolation& e) {
    print_error(std::cerr, "contract", e.what());
  } catch (const std::exception& e) {
    print_error(std::cerr, "runtime", e.what());
  }
  return 1;
}

}  // namespace prc::cli

#endif  // PRC_CLI_HPP_
