#ifndef PRC_RL_HPP_
#define PRC_RL_HPP_

#include "prc/constrained.hpp"
#include "prc/evaluation.hpp"

#include <limits>

namespace prc {

enum class Regime { Prc, Naive, Kl };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::Prc: return "prc";
    case Regime::Naive: return "naive";
    case Regime::Kl: return "kl";
  }
  return "?";
}

inline Regime parse_regime(std::string_view name) {
  if (name == "prc") return Regime::Prc;
  if (name == "naive") return Regime::Naive;
  if (name == "kl") return Regime::Kl;
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

struct RlConfig {
  Regime regime = Regime::Prc;
  double alpha = 0.0;    // kl regime only
  double radius = -1.0;  // prc regime only; negative selects the default radius
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  int epochs = 200;
  int steps_per_epoch = 4000;
  int update_epochs = 4;
  int minibatch_size = 500;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  double entropy_coef = 1e-3;
  double max_grad_norm = 0.5;
  double init_std = 0.1;
  bool init_from_bc = true;
  int eval_interval = 5;
  int eval_episodes = 20;
  std::uint64_t seed = 0;

  void validate(int horizon) const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
    if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
    if (regime != Regime::Kl && alpha != 0.0) throw ConfigError("alpha applies to the kl regime only");
    if (epochs < 1 || update_epochs < 1 || minibatch_size < 1 || eval_interval < 1 || eval_episodes < 1)
      throw ConfigError("epoch, batch and evaluation counts must be positive");
    if (steps_per_epoch < horizon)
      throw ConfigError("steps_per_epoch (" + std::to_string(steps_per_epoch) +
                        ") is smaller than one episode (" + std::to_string(horizon) + ")");
    if (!(init_std > 0.0)) throw ConfigError("init_std must be > 0");
  }

  nlohmann::json to_json() const {
    return {{"regime", to_string(regime)},     {"alpha", alpha},
            {"radius", radius},                {"gamma", gamma},
            {"gae_lambda", gae_lambda},        {"clip_ratio", clip_ratio},
            {"epochs", epochs},                {"steps_per_epoch", steps_per_epoch},
            {"update_epochs", update_epochs},  {"minibatch_size", minibatch_size},
            {"actor_lr", actor_lr},            {"critic_lr", critic_lr},
            {"entropy_coef", entropy_coef},    {"max_grad_norm", max_grad_norm},
            {"init_std", init_std},            {"init_from_bc", init_from_bc},
            {"eval_interval", eval_interval},  {"eval_episodes", eval_episodes},
            {"seed", seed}};
  }
};

// The critic sees the state plus the elapsed fraction of the horizon:
// episodes are cut at the horizon, so values depend on the time left.
struct ActorCritic {
  GaussianPolicy actor;
  Mlp critic;
};

/// Closed-form KL(p || q) between diagonal Gaussians.
inline double kl_gaussian(const Vec& mu_p, const Vec& std_p, const Vec& mu_q, const Vec& std_q) {
  const auto sp = std_p.array(), sq = std_q.array();
  return ((sq / sp).log() + (sp.square() + (mu_p - mu_q).array().square()) / (2.0 * sq.square()) - 0.5)
      .sum();
}

/// Per-step reward the optimizer sees: u(s, a), minus alpha * KL(pi || pi_b)
/// in the kl regime.
inline double simulated_reward(const UtilityModel& utility, const Vec& state, const Vec& action,
                               Regime regime, const GaussianPolicy* policy,
                               const GaussianPolicy* behavior, double alpha) {
  const double u = utility(state, action);
  if (regime != Regime::Kl || alpha == 0.0) return u;
  require(policy && behavior, "simulated_reward: kl regime needs both policies");
  const auto [mu, sd] = policy->mean_std(state);
  const auto [mu_b, sd_b] = behavior->mean_std(state);
  return u - alpha * kl_gaussian(mu, sd, mu_b, sd_b);
}

/// Generalized advantage estimates for one contiguous segment. `values`
/// has one more entry than `rewards` (the bootstrap value, ignored when
/// the segment ends in `terminal`).
inline Vec gae_advantages(std::span<const double> rewards, std::span<const double> values,
                          bool terminal, double gamma, double lambda) {
  require(values.size() == rewards.size() + 1, "gae_advantages: values must have one extra entry");
  const auto n = rewards.size();
  Vec adv(static_cast<Eigen::Index>(n));
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const bool last = i + 1 == n;
    const double next_v = (last && terminal) ? 0.0 : values[i + 1];
    const double delta = rewards[i] + gamma * next_v - values[i];
    running = delta + gamma * lambda * (last ? 0.0 : running);
    adv[static_cast<Eigen::Index>(i)] = running;
  }
  return adv;
}

struct EpochMetrics {
  int epoch = 0;
  double simulated_return = 0.0;
  double true_return = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double kl_penalty_mean = 0.0;
};

struct EvalPoint {
  int epoch = 0;
  double simulated_return = 0.0;
  double true_return = 0.0;
  double normalized_score = 0.0;
};

/// Everything PPO trains against. `wrapped` is set for the prc regime.
struct RlProblem {
  EnvSpec spec;
  const UtilityModel* utility = nullptr;
  std::shared_ptr<const DetPolicy> bc;
  const GaussianPolicy* bc_gaussian = nullptr;
  std::shared_ptr<const ConstrainedEnv> wrapped;
};

struct PpoResult {
  ActorCritic final_policy;
  ActorCritic best_policy;
  EvalPoint best;
  std::vector<EpochMetrics> metrics;
  std::vector<EvalPoint> evaluations;
};

/// Actor as an executable policy in the base environment: the clamped
/// mean (deterministic) or a clamped sample, remapped through f in the
/// prc regime.
inline std::unique_ptr<Policy> executable_policy(const RlProblem& problem, const GaussianPolicy& actor,
                                                 bool deterministic) {
  auto p = std::make_shared<GaussianPolicy>(actor);
  p->deterministic = deterministic;
  if (problem.wrapped) return std::make_unique<TranslatedPolicy>(problem.wrapped, p);
  struct Holder : Policy {
    std::shared_ptr<GaussianPolicy> inner;
    Vec act(const Vec& s, RandomStream& rng) const override { return inner->act(s, rng); }
  };
  auto h = std::make_unique<Holder>();
  h->inner = std::move(p);
  return h;
}

namespace detail {

inline void set_log_std_rows(GaussianPolicy& actor, double init_std) {
  auto& last = actor.net.layers().back();
  const auto n = actor.action_dim();
  last.weight.bottomRows(n).setZero();
  last.bias.tail(n).setConstant(std::log(init_std));
}

/// Copies the clone network into the actor's mean rows; with equal action
/// boxes the actor mean then reproduces the clone exactly.
inline void init_mean_from_clone(GaussianPolicy& actor, const DetPolicy& bc) {
  const auto& src = bc.net.layers();
  auto& dst = actor.net.layers();
  require(src.size() == dst.size(), "init_mean_from_clone: architecture mismatch");
  require(actor.action_low == bc.action_low && actor.action_high == bc.action_high,
          "init_mean_from_clone: action box mismatch");
  for (std::size_t l = 0; l + 1 < src.size(); ++l) dst[l] = src[l];
  const auto n = actor.action_dim();
  dst.back().weight.topRows(n) = src.back().weight;
  dst.back().bias.head(n) = src.back().bias;
}

inline Vec critic_input(const Vec& state, int t, int horizon) {
  return concat(state, Vec::Constant(1, static_cast<double>(t) / static_cast<double>(horizon)));
}

struct Batch {
  Matrix states;      // state_dim x T
  Matrix critic_inputs;
  Matrix raw_actions; // pre-clamp samples (actor space)
  Vec log_probs;
  Vec advantages;
  Vec returns;
};

}  // namespace detail

/// PPO with clipped surrogate, GAE and an entropy bonus, optimizing the
/// learned utility in the base environment (naive, kl) or in the
/// constrained wrapper (prc).
inline PpoResult ppo_train(const RlProblem& problem, const RlConfig& cfg) {
  const EnvSpec& spec = problem.spec;
  require(problem.utility != nullptr, "ppo_train: missing utility model");
  require(!spec.discrete(), "ppo_train: continuous action spaces only");
  cfg.validate(spec.horizon);
  const bool prc = cfg.regime == Regime::Prc;
  if (prc) require(problem.wrapped != nullptr, "ppo_train: prc regime needs a ConstrainedEnv");
  if (!prc) require(problem.wrapped == nullptr, "ppo_train: wrapped env given for a base-space regime");
  if (cfg.regime == Regime::Kl) require(problem.bc_gaussian != nullptr, "ppo_train: kl regime needs a Gaussian clone");
  if (!prc && cfg.init_from_bc) require(problem.bc != nullptr, "ppo_train: init_from_bc needs a clone");

  const Vec act_low = prc ? problem.wrapped->wrapped_low() : spec.action_low;
  const Vec act_high = prc ? problem.wrapped->wrapped_high() : spec.action_high;
  const int n_act = spec.action_dim;
  const UtilityModel& utility = *problem.utility;

  RandomStream init_rng(mix_seed(cfg.seed, 0x1A17));
  ActorCritic ac{GaussianPolicy::create(spec.state_dim, act_low, act_high, init_rng),
                 Mlp(standard_layer_dims(spec.state_dim + 1, 1), Head::Linear, init_rng)};
  ac.actor.meta.env_id = spec.env_id;
  detail::set_log_std_rows(ac.actor, cfg.init_std);
  if (prc) {
    auto& last = ac.actor.net.layers().back();
    last.weight.topRows(n_act).setZero();
    last.bias.head(n_act).setZero();
  } else if (cfg.init_from_bc) {
    detail::init_mean_from_clone(ac.actor, *problem.bc);
  }

  AdamState actor_opt(ac.actor.net, {cfg.actor_lr});
  AdamState critic_opt(ac.critic, {cfg.critic_lr});
  const RandomStream rollout_master(mix_seed(cfg.seed, 0x2011));
  RandomStream update_rng(mix_seed(cfg.seed, 0x3B7D));
  const std::uint64_t eval_seed = evaluation_seed(cfg.seed);

  // V(s, t) = b(t) + critic output on the residual scale. b(t) is the mean
  // return seen so far at step t; with a near-constant per-step reward the
  // time component dominates the returns and would swamp the network's
  // precision for the state-dependent part. The residual is standardized
  // with running moments over every residual seen so far.
  std::vector<double> base_sum(static_cast<std::size_t>(spec.horizon) + 1, 0.0);
  std::vector<double> base_n(base_sum.size(), 0.0);
  auto time_baseline = [&](int t) {
    const auto k = static_cast<std::size_t>(t);
    return base_n[k] > 0.0 ? base_sum[k] / base_n[k] : 0.0;
  };
  double ret_count = 0.0, ret_mean = 0.0, ret_m2 = 0.0;
  auto ret_scale = [&] { return ret_count > 1.0 ? std::sqrt(ret_m2 / ret_count) + 1e-8 : 1.0; };

  PpoResult result;
  result.best.simulated_return = -std::numeric_limits<double>::infinity();

  auto evaluate = [&](int epoch) {
    auto policy = executable_policy(problem, ac.actor, true);
    const EvalReport rep = evaluate_policy(spec, *policy, &utility, cfg.eval_episodes, eval_seed);
    EvalPoint pt{epoch, rep.sim_mean, rep.true_mean, rep.normalized_score};
    result.evaluations.push_back(pt);
    if (pt.simulated_return > result.best.simulated_return) {
      result.best = pt;
      result.best_policy = ac;
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch % cfg.eval_interval == 0) evaluate(epoch);

    // ---- collect ----
    std::vector<Vec> states, raw_actions, base_actions, critic_in, next_critic_in;
    std::vector<double> log_probs, true_rewards;
    std::vector<int> step_index;
    std::vector<char> dones;
    std::vector<std::pair<std::size_t, std::size_t>> segments;  // [begin, end)
    std::vector<char> segment_complete;
    int steps = 0;
    for (std::uint64_t k = 0; steps < cfg.steps_per_epoch; ++k) {
      RandomStream rng = rollout_master.derive(static_cast<std::uint64_t>(epoch), k);
      Vec s = reset(spec, rng);
      const std::size_t begin = states.size();
      bool done = false;
      for (int t = 0; t < spec.horizon && steps < cfg.steps_per_epoch; ++t, ++steps) {
        auto [mu, sd] = ac.actor.mean_std(s);
        Vec raw(n_act);
        double lp = 0.0;
        for (int i = 0; i < n_act; ++i) {
          const double eps = rng.normal();
          raw[i] = mu[i] + sd[i] * eps;
          lp += -0.5 * eps * eps - std::log(sd[i]) - 0.5 * kLog2Pi;
        }
        const Vec a = clamp_box(raw, act_low, act_high);
        if (prc && ((a.array() < act_low.array()) || (a.array() > act_high.array())).any())
          throw std::logic_error("ppo_train: wrapped action escaped [-r, r]");
        Vec base_a = prc ? remap_action(*problem.wrapped, s, a) : a;
        StepResult res = step(spec, s, base_a, t);
        states.push_back(s);
        raw_actions.push_back(raw);
        base_actions.push_back(std::move(base_a));
        log_probs.push_back(lp);
        true_rewards.push_back(res.true_reward);
        dones.push_back(res.done);
        critic_in.push_back(detail::critic_input(s, t, spec.horizon));
        step_index.push_back(t);
        next_critic_in.push_back(detail::critic_input(res.next_state, t + 1, spec.horizon));
        s = std::move(res.next_state);
        done = res.done;
        if (done) {
          ++steps;
          break;
        }
      }
      segments.emplace_back(begin, states.size());
      segment_complete.push_back(done);
    }
    const auto T = static_cast<Eigen::Index>(states.size());
    const Matrix S = stack_columns(states);
    const Matrix C = stack_columns(critic_in);
    Matrix SA(spec.state_dim + n_act, T);
    SA.topRows(spec.state_dim) = S;
    SA.bottomRows(n_act) = stack_columns(base_actions);
    const Vec u = utility.evaluate(SA);
    Vec kl = Vec::Zero(T);
    if (cfg.regime == Regime::Kl) {
      const auto pm = ac.actor.moments(S);
      const auto bm = problem.bc_gaussian->moments(S);
      for (Eigen::Index j = 0; j < T; ++j)
        kl[j] = kl_gaussian(pm.mean.col(j), pm.std.col(j), bm.mean.col(j), bm.std.col(j));
    }
    const Vec rewards = u - cfg.alpha * kl;
    Vec values = (ret_mean + ret_scale() * ac.critic.forward_batch(C).row(0).array()).transpose().matrix();
    for (Eigen::Index j = 0; j < T; ++j) values[j] += time_baseline(step_index[static_cast<std::size_t>(j)]);

    detail::Batch batch{S, C, stack_columns(raw_actions),
                        Eigen::Map<const Vec>(log_probs.data(), T), Vec(T), Vec(T)};
    std::vector<double> sim_returns, true_returns;
    for (std::size_t g = 0; g < segments.size(); ++g) {
      const auto [b, e] = segments[g];
      const bool terminal = dones[e - 1] != 0;
      std::vector<double> seg_r(rewards.data() + b, rewards.data() + e);
      std::vector<double> seg_v(values.data() + b, values.data() + e);
      seg_v.push_back(terminal ? 0.0
                               : time_baseline(step_index[e - 1] + 1) + ret_mean +
                                     ret_scale() * ac.critic.forward(next_critic_in[e - 1])[0]);
      const Vec adv = gae_advantages(seg_r, seg_v, terminal, cfg.gamma, cfg.gae_lambda);
      for (std::size_t i = b; i < e; ++i) {
        batch.advantages[static_cast<Eigen::Index>(i)] = adv[static_cast<Eigen::Index>(i - b)];
        batch.returns[static_cast<Eigen::Index>(i)] =
            adv[static_cast<Eigen::Index>(i - b)] + values[static_cast<Eigen::Index>(i)];
      }
      if (segment_complete[g]) {
        sim_returns.push_back(u.segment(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)).sum());
        double tr = 0.0;
        for (std::size_t i = b; i < e; ++i) tr += true_rewards[i];
        true_returns.push_back(tr);
      }
    }
    for (Eigen::Index i = 0; i < T; ++i) {
      const auto k = static_cast<std::size_t>(step_index[static_cast<std::size_t>(i)]);
      base_sum[k] += batch.returns[i];
      base_n[k] += 1.0;
    }
    Vec residual = batch.returns;
    for (Eigen::Index i = 0; i < T; ++i) {
      residual[i] -= time_baseline(step_index[static_cast<std::size_t>(i)]);
      ret_count += 1.0;
      const double delta = residual[i] - ret_mean;
      ret_mean += delta / ret_count;
      ret_m2 += delta * (residual[i] - ret_mean);
    }
    const Vec targets = ((residual.array() - ret_mean) / ret_scale()).matrix();
    const double adv_mean = batch.advantages.mean();
    const double adv_std =
        std::sqrt((batch.advantages.array() - adv_mean).square().mean()) + 1e-8;
    const Vec adv_norm = (batch.advantages.array() - adv_mean) / adv_std;

    // ---- update ----
    double actor_loss_sum = 0.0, critic_loss_sum = 0.0;
    int n_minibatches = 0;
    for (int ue = 0; ue < cfg.update_epochs; ++ue) {
      for (const auto& idx : minibatches(static_cast<std::size_t>(T), cfg.minibatch_size, update_rng)) {
        const auto B = static_cast<Eigen::Index>(idx.size());
        const double inv_b = 1.0 / static_cast<double>(B);
        const Matrix s_mb = gather_columns(batch.states, idx);
        const Matrix a_mb = gather_columns(batch.raw_actions, idx);

        ForwardCache cache;
        const auto [mu, sd] = ac.actor.moments(s_mb, &cache);
        Matrix upstream(2 * n_act, B);
        double surrogate = 0.0, entropy = 0.0;
        for (Eigen::Index j = 0; j < B; ++j) {
          const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
          const Eigen::ArrayXd diff = (a_mb.col(j) - mu.col(j)).array();
          const Eigen::ArrayXd sig = sd.col(j).array();
          const double lp = (-0.5 * (diff / sig).square() - sig.log() - 0.5 * kLog2Pi).sum();
          const double ratio = std::exp(lp - batch.log_probs[i]);
          const double A = adv_norm[i];
          const double clipped = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
          surrogate += std::min(ratio * A, clipped * A);
          entropy += (sig.log() + 0.5 * (1.0 + kLog2Pi)).sum();
          const bool flows = (A >= 0.0) ? ratio < 1.0 + cfg.clip_ratio : ratio > 1.0 - cfg.clip_ratio;
          const double dlp = flows ? -ratio * A * inv_b : 0.0;  // dLoss / dlogp
          upstream.col(j).head(n_act) = (dlp * diff / sig.square()).matrix();
          upstream.col(j).tail(n_act) =
              (dlp * (diff.square() / sig.cube() - 1.0 / sig) - cfg.entropy_coef * inv_b / sig).matrix();
        }
        const double actor_loss = -surrogate * inv_b - cfg.entropy_coef * entropy * inv_b;
        MlpGradients ga = ac.actor.net.backward(cache, ac.actor.net_upstream(cache, upstream));
        clip_gradient_norm(ga, cfg.max_grad_norm);
        adam_step(actor_opt, ac.actor.net, ga);

        ForwardCache ccache;
        const Matrix v = ac.critic.forward_batch(gather_columns(batch.critic_inputs, idx), &ccache);
        Matrix ret(1, B);
        for (Eigen::Index j = 0; j < B; ++j)
          ret(0, j) = targets[static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)])];
        const Matrix verr = v - ret;
        const double critic_loss = 0.5 * verr.squaredNorm() * inv_b;
        MlpGradients gc = ac.critic.backward(ccache, verr * inv_b);
        clip_gradient_norm(gc, cfg.max_grad_norm);
        adam_step(critic_opt, ac.critic, gc);

        if (!std::isfinite(actor_loss) || !std::isfinite(critic_loss))
          throw std::runtime_error("ppo_train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " (regime " + to_string(cfg.regime) + ", actor " +
                                   std::to_string(actor_loss) + ", critic " +
                                   std::to_string(critic_loss) + ")");
        actor_loss_sum += actor_loss;
        critic_loss_sum += critic_loss;
        ++n_minibatches;
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.simulated_return = mean_std(sim_returns).first;
    m.true_return = mean_std(true_returns).first;
    m.actor_loss = actor_loss_sum / n_minibatches;
    m.critic_loss = critic_loss_sum / n_minibatches;
    m.kl_penalty_mean = cfg.alpha * kl.mean();
    result.metrics.push_back(m);
  }
  evaluate(cfg.epochs);
  result.final_policy = std::move(ac);
  return result;
}

inline std::string metrics_csv(std::span<const EpochMetrics> rows) {
  std::string out = "epoch,simulated_return,true_return,actor_loss,critic_loss,kl_penalty_mean\n";
  for (const auto& m : rows) {
    out += std::to_string(m.epoch) + "," + format_double(m.simulated_return) + "," +
           format_double(m.true_return) + "," + format_double(m.actor_loss) + "," +
           format_double(m.critic_loss) + "," + format_double(m.kl_penalty_mean) + "\n";
  }
  return out;
}

inline std::string evaluations_csv(std::span<const EvalPoint> rows) {
  std::string out = "epoch,simulated_return,true_return,normalized_score\n";
  for (const auto& e : rows)
    out += std::to_string(e.epoch) + "," + format_double(e.simulated_return) + "," +
           format_double(e.true_return) + "," + format_double(e.normalized_score) + "\n";
  return out;
}

// ---- tabular path ----

struct TabularSolution {
  std::vector<int> policy;  // greedy action per state
  Vec values;
  int iterations = 0;
};

/// Value iteration with the max restricted to allowed actions; stops when
/// the sup-norm change drops below tol. Greedy ties go to the lowest index.
inline TabularSolution masked_value_iteration(const TabularMdp& mdp, const TabularMask& mask,
                                              const Matrix& utility_table, double gamma, double tol,
                                              int max_iterations = 1000000) {
  require(utility_table.rows() == mdp.n_states && utility_table.cols() == mdp.n_actions,
          "masked_value_iteration: utility table shape mismatch");
  require(gamma > 0.0 && gamma < 1.0, "masked_value_iteration: gamma must lie in (0,1)");
  for (int s = 0; s < mdp.n_states; ++s)
    require(mask.n_allowed(s) > 0, "masked_value_iteration: empty action set");
  auto q = [&](const Vec& v, int s, int a) {
    const int n = mdp.successor(s, a);
    return utility_table(s, a) + gamma * (mdp.terminal[static_cast<std::size_t>(n)] ? 0.0 : v[n]);
  };
  TabularSolution sol;
  sol.values = Vec::Zero(mdp.n_states);
  for (sol.iterations = 1; sol.iterations <= max_iterations; ++sol.iterations) {
    Vec next = Vec::Zero(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.terminal[static_cast<std::size_t>(s)]) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions; ++a)
        if (mask.allowed(s, a)) best = std::max(best, q(sol.values, s, a));
      next[s] = best;
    }
    const double change = (next - sol.values).cwiseAbs().maxCoeff();
    sol.values = std::move(next);
    if (change < tol) break;
  }
  sol.policy.assign(static_cast<std::size_t>(mdp.n_states), 0);
  for (int s = 0; s < mdp.n_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (!mask.allowed(s, a)) continue;
      const double v = q(sol.values, s, a);
      if (v > best) {
        best = v;
        sol.policy[static_cast<std::size_t>(s)] = a;
      }
    }
  }
  return sol;
}

/// Learned utility of every (cell, action) of a side x side grid.
inline Matrix utility_table(const UtilityModel& utility, const TabularMdp& mdp) {
  Matrix table(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      table(s, a) = utility(grid::one_hot(s, mdp.n_states), Vec::Constant(1, a));
  return table;
}

/// Deterministic table policy over one-hot GridWorld states.
class TabularPolicy : public Policy {
 public:
  explicit TabularPolicy(std::vector<int> actions) : actions_(std::move(actions)) {}
  Vec act(const Vec& state, RandomStream& /*rng*/) const override {
    return Vec::Constant(1, actions_[static_cast<std::size_t>(grid::decode_cell(state))]);
  }
  const std::vector<int>& actions() const { return actions_; }

  Matrix probabilities(int n_actions) const {
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(actions_.size()), n_actions);
    for (std::size_t s = 0; s < actions_.size(); ++s) p(static_cast<Eigen::Index>(s), actions_[s]) = 1.0;
    return p;
  }

 private:
  std::vector<int> actions_;
};

struct TabularPrcResult {
  TabularMask mask;
  TabularSolution solution;
  EvalReport evaluation;
  bool support_violated = false;
};

/// Threshold-p constrained solve on GridWorld: behavior from dataset
/// frequencies, utility from the learned model, masked value iteration,
/// then a rollout of the greedy policy.
inline TabularPrcResult run_tabular_prc(const PreferenceDataset& dataset, const UtilityModel& utility,
                                        double threshold, double gamma, double tol, std::uint64_t seed) {
  require(dataset.env_id == EnvId::GridWorld5x5, "run_tabular_prc: gridworld datasets only");
  const TabularMdp mdp = make_grid_mdp(grid::kSide);
  TabularPrcResult out;
  out.mask = build_tabular_mask(mdp, estimate_tabular_behavior(dataset, mdp), threshold);
  out.solution = masked_value_iteration(mdp, out.mask, utility_table(utility, mdp), gamma, tol);
  TabularPolicy policy(out.solution.policy);
  out.support_violated = cp_violation(policy.probabilities(mdp.n_actions), out.mask).has_value();
  out.evaluation = evaluate_policy(make_env_spec(EnvId::GridWorld5x5), policy, &utility, 1,
                                   evaluation_seed(seed));
  return out;
}

}  // namespace prc

#endif  // PRC_RL_HPP_
