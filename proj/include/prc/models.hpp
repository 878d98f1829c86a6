#ifndef PRC_MODELS_HPP_
#define PRC_MODELS_HPP_

#include "prc/datagen.hpp"
#include "prc/nn.hpp"

#include <numeric>

namespace prc {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct TrainConfig {
  double learning_rate = 3e-4;
  int batch_size = 256;
  int epochs = 50;

  static TrainConfig reward_defaults() { return {3e-4, 256, 50}; }
  static TrainConfig bc_defaults() { return {3e-4, 256, 100}; }

  nlohmann::json to_json() const {
    return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs}};
  }
};

/// Provenance stamped into every checkpoint.
struct ModelMeta {
  EnvId env_id = EnvId::PointReach;
  BehaviorTag quality = BehaviorTag::Medium;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::string dataset_fingerprint;

  nlohmann::json to_json() const {
    return {{"env_id", to_string(env_id)},
            {"env_fingerprint", env_fingerprint(env_id)},
            {"quality", to_string(quality)},
            {"seed", seed},
            {"fingerprint", fingerprint},
            {"dataset_fingerprint", dataset_fingerprint},
            {"version", std::string(kArtifactVersion)}};
  }
  static ModelMeta from_json(const nlohmann::json& j) {
    if (j.value("version", "") != kArtifactVersion)
      throw ConfigError("checkpoint artifact version mismatch: " + j.value("version", ""));
    ModelMeta m;
    m.env_id = parse_env_id(j.at("env_id").get<std::string>());
    if (j.value("env_fingerprint", "") != env_fingerprint(m.env_id))
      throw ConfigError("env fingerprint mismatch: checkpoint was built for a different " + to_string(m.env_id));
    m.quality = parse_behavior_tag(j.at("quality").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.fingerprint = j.value("fingerprint", "");
    m.dataset_fingerprint = j.value("dataset_fingerprint", "");
    return m;
  }
};

inline Matrix stack_columns(std::span<const Vec> rows) {
  require(!rows.empty(), "stack_columns: empty input");
  Matrix m(rows.front().size(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = rows[i];
  return m;
}

// ---- utility model ----

/// Learned per-step utility u(s, a) in (-1, 1).
struct UtilityModel {
  Mlp net;
  int state_dim = 0;
  int action_dim = 0;
  ModelMeta meta;
  std::vector<double> loss_history;

  static UtilityModel create(int state_dim, int action_dim, RandomStream& rng) {
    UtilityModel m;
    m.state_dim = state_dim;
    m.action_dim = action_dim;
    m.net = Mlp(standard_layer_dims(state_dim + action_dim, 1), Head::Tanh, rng);
    return m;
  }

  double operator()(const Vec& state, const Vec& action) const {
    require(state.size() == state_dim && action.size() == action_dim,
            "UtilityModel: dimension mismatch");
    return net.forward(concat(state, action))[0];
  }

  /// Utilities for a batch of stacked [state; action] columns.
  Vec evaluate(const Matrix& inputs) const { return net.forward_batch(inputs).row(0).transpose(); }

  /// Sum of u over the (state, action) steps of a trajectory.
  double trajectory_sum(const Trajectory& traj) const {
    if (traj.actions.empty()) return 0.0;
    Matrix x(state_dim + action_dim, static_cast<Eigen::Index>(traj.actions.size()));
    for (std::size_t t = 0; t < traj.actions.size(); ++t)
      x.col(static_cast<Eigen::Index>(t)) = concat(traj.states[t], traj.actions[t]);
    return evaluate(x).sum();
  }
};

inline Matrix clip_inputs(const Clip& clip) {
  require(!clip.actions.empty(), "clip_inputs: empty clip");
  const auto sd = clip.states.front().size();
  const auto ad = clip.actions.front().size();
  Matrix x(sd + ad, static_cast<Eigen::Index>(clip.size()));
  for (std::size_t t = 0; t < clip.size(); ++t)
    x.col(static_cast<Eigen::Index>(t)) = concat(clip.states[t], clip.actions[t]);
  return x;
}

inline double clip_utility_sum(const UtilityModel& model, const Clip& clip) {
  require(clip.states.front().size() == model.state_dim &&
              clip.actions.front().size() == model.action_dim,
          "clip_utility_sum: clip dimensions do not match model");
  return model.evaluate(clip_inputs(clip)).sum();
}

/// Mean over pairs of -log P(winner beats loser) under Bradley-Terry on
/// clip utility sums, plus its parameter gradient.
inline std::pair<double, MlpGradients> preference_loss_and_gradient(
    const UtilityModel& model, std::span<const PreferencePair* const> batch) {
  require(!batch.empty(), "preference_loss: empty batch");
  const auto len = static_cast<Eigen::Index>(batch.front()->first.size());
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix x(model.state_dim + model.action_dim, 2 * len * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PreferencePair& p = *batch[static_cast<std::size_t>(i)];
    require(static_cast<Eigen::Index>(p.first.size()) == len &&
                static_cast<Eigen::Index>(p.second.size()) == len,
            "preference_loss: clips in a batch must share a length");
    x.middleCols(2 * i * len, len) = clip_inputs(p.winner());
    x.middleCols((2 * i + 1) * len, len) = clip_inputs(p.loser());
  }
  ForwardCache cache;
  const Matrix out = model.net.forward_batch(x, &cache);
  Matrix upstream(1, x.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u_win = out.middleCols(2 * i * len, len).sum();
    const double u_lose = out.middleCols((2 * i + 1) * len, len).sum();
    loss += softplus(u_lose - u_win);
    const double g = sigmoid(u_lose - u_win) / static_cast<double>(n);
    upstream.middleCols(2 * i * len, len).setConstant(-g);
    upstream.middleCols((2 * i + 1) * len, len).setConstant(g);
  }
  return {loss / static_cast<double>(n), model.net.backward(cache, upstream)};
}

inline double preference_loss(const UtilityModel& model, std::span<const PreferencePair> batch) {
  require(!batch.empty(), "preference_loss: empty batch");
  double loss = 0.0;
  for (const auto& p : batch)
    loss += softplus(clip_utility_sum(model, p.loser()) - clip_utility_sum(model, p.winner()));
  return loss / static_cast<double>(batch.size());
}

/// Shuffled minibatch index lists for one epoch.
inline std::vector<std::vector<std::size_t>> minibatches(std::size_t n, int batch_size,
                                                         RandomStream& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  const auto b = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t s = 0; s < n; s += b)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + b)));
  return out;
}

inline UtilityModel train_reward_model(const PreferenceDataset& dataset, const TrainConfig& config,
                                       RandomStream& rng) {
  require(!dataset.pairs.empty(), "train_reward_model: empty dataset");
  UtilityModel model = UtilityModel::create(dataset.state_dim(), dataset.action_dim(), rng);
  model.meta.env_id = dataset.env_id;
  model.meta.quality = dataset.quality;
  model.meta.dataset_fingerprint = dataset.fingerprint;
  AdamState adam(model.net, {config.learning_rate});
  std::vector<const PreferencePair*> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& idx : minibatches(dataset.pairs.size(), config.batch_size, rng)) {
      batch.clear();
      for (std::size_t i : idx) batch.push_back(&dataset.pairs[i]);
      auto [loss, grads] = preference_loss_and_gradient(model, batch);
      if (!std::isfinite(loss)) throw std::runtime_error("train_reward_model: non-finite loss");
      total += loss * static_cast<double>(idx.size());
      count += idx.size();
      adam_step(adam, model.net, grads);
    }
    model.loss_history.push_back(total / static_cast<double>(count));
  }
  return model;
}

/// Squared-error fit of u(s, a) to per-step rewards. Used only by the
/// reward-signal comparison experiment.
struct RegressionFit {
  UtilityModel model;
  double heldout_rms = 0.0;
};

inline RegressionFit train_reward_regression(std::span<const Trajectory> trajs,
                                             const TrainConfig& config, RandomStream& rng,
                                             double heldout_fraction = 0.1) {
  std::vector<Vec> inputs;
  std::vector<double> targets;
  for (const auto& t : trajs)
    for (std::size_t k = 0; k < t.length(); ++k) {
      inputs.push_back(concat(t.states[k], t.actions[k]));
      targets.push_back(t.true_rewards[k]);
    }
  require(inputs.size() >= 10, "train_reward_regression: too few samples");
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const auto n_hold = static_cast<std::size_t>(heldout_fraction * static_cast<double>(order.size()));
  std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());

  const int sd = static_cast<int>(trajs.front().states.front().size());
  const int ad = static_cast<int>(trajs.front().actions.front().size());
  RegressionFit fit{UtilityModel::create(sd, ad, rng), 0.0};
  fit.model.meta.env_id = trajs.front().env_id;
  fit.model.meta.quality = trajs.front().behavior_tag;
  AdamState adam(fit.model.net, {config.learning_rate});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& idx : minibatches(train.size(), config.batch_size, rng)) {
      Matrix x(sd + ad, static_cast<Eigen::Index>(idx.size()));
      Matrix y(1, static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) {
        x.col(static_cast<Eigen::Index>(j)) = inputs[train[idx[j]]];
        y(0, static_cast<Eigen::Index>(j)) = targets[train[idx[j]]];
      }
      ForwardCache cache;
      const Matrix diff = fit.model.net.forward_batch(x, &cache) - y;
      total += diff.squaredNorm();
      const Matrix upstream = diff * (2.0 / static_cast<double>(idx.size()));
      adam_step(adam, fit.model.net, fit.model.net.backward(cache, upstream));
    }
    fit.model.loss_history.push_back(total / static_cast<double>(train.size()));
  }
  double sq = 0.0;
  for (std::size_t i : hold) {
    const double d = fit.model.net.forward(inputs[i])[0] - targets[i];
    sq += d * d;
  }
  fit.heldout_rms = hold.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(hold.size()));
  return fit;
}

// ---- behavior clones ----

/// All (state, action) steps of both clips of every pair, as columns.
struct StateActionSet {
  Matrix states;
  Matrix actions;
  Eigen::Index size() const { return states.cols(); }
};

inline StateActionSet extract_state_actions(const PreferenceDataset& dataset) {
  require(!dataset.pairs.empty(), "extract_state_actions: empty dataset");
  const Eigen::Index n =
      static_cast<Eigen::Index>(dataset.pairs.size()) * 2 * dataset.clip_len;
  StateActionSet set{Matrix(dataset.state_dim(), n), Matrix(dataset.action_dim(), n)};
  Eigen::Index k = 0;
  for (const auto& p : dataset.pairs)
    for (const Clip* c : {&p.first, &p.second})
      for (std::size_t t = 0; t < c->size(); ++t, ++k) {
        set.states.col(k) = c->states[t];
        set.actions.col(k) = c->actions[t];
      }
  return set;
}

/// Deterministic clone: tanh output rescaled onto the action box.
class DetPolicy : public Policy {
 public:
  Mlp net;
  Vec action_low;
  Vec action_high;
  ModelMeta meta;
  std::vector<double> loss_history;

  static DetPolicy create(const EnvSpec& spec, RandomStream& rng) {
    DetPolicy p;
    p.net = Mlp(standard_layer_dims(spec.state_dim, spec.action_dim), Head::Tanh, rng);
    p.action_low = spec.action_low;
    p.action_high = spec.action_high;
    p.meta.env_id = spec.env_id;
    return p;
  }

  Vec center() const { return 0.5 * (action_high + action_low); }
  Vec half_width() const { return 0.5 * (action_high - action_low); }

  Matrix scale(const Matrix& squashed) const {
    Matrix out = half_width().asDiagonal() * squashed;
    out.colwise() += center();
    return out;
  }

  Vec action(const Vec& state) const { return scale(net.forward(state)).col(0); }
  Matrix action_batch(const Matrix& states) const { return scale(net.forward_batch(states)); }

  Vec act(const Vec& state, RandomStream& /*rng*/) const override { return action(state); }
};

/// Mean Euclidean distance between the clone's action and the data action.
inline std::pair<double, MlpGradients> bc_loss_and_gradient(const DetPolicy& policy,
                                                            const Matrix& states,
                                                            const Matrix& actions) {
  require(states.cols() > 0 && states.cols() == actions.cols(), "bc_loss: empty or ragged batch");
  require(actions.rows() == policy.action_low.size(), "bc_loss: action dimension mismatch");
  ForwardCache cache;
  const Matrix pred = policy.scale(policy.net.forward_batch(states, &cache));
  const Matrix diff = pred - actions;
  const double n = static_cast<double>(states.cols());
  Matrix upstream(diff.rows(), diff.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < diff.cols(); ++j) {
    const double norm = diff.col(j).norm();
    loss += norm;
    upstream.col(j) = norm > 0.0 ? Vec(diff.col(j) / (norm * n)) : Vec::Zero(diff.rows());
  }
  upstream = policy.half_width().asDiagonal() * upstream;
  return {loss / n, policy.net.backward(cache, upstream)};
}

inline double bc_loss(const DetPolicy& policy, const Matrix& states, const Matrix& actions) {
  require(states.cols() > 0 && states.cols() == actions.cols(), "bc_loss: empty or ragged batch");
  require(actions.rows() == policy.action_low.size(), "bc_loss: action dimension mismatch");
  return (policy.action_batch(states) - actions).colwise().norm().mean();
}

inline Matrix gather_columns(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(idx[j]));
  return out;
}

inline DetPolicy train_bc_deterministic(const EnvSpec& spec, const StateActionSet& data,
                                        const TrainConfig& config, RandomStream& rng) {
  require(data.size() > 0, "train_bc_deterministic: empty dataset");
  DetPolicy policy = DetPolicy::create(spec, rng);
  AdamState adam(policy.net, {config.learning_rate});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& idx : minibatches(static_cast<std::size_t>(data.size()), config.batch_size, rng)) {
      auto [loss, grads] = bc_loss_and_gradient(policy, gather_columns(data.states, idx),
                                                gather_columns(data.actions, idx));
      if (!std::isfinite(loss)) throw std::runtime_error("train_bc_deterministic: non-finite loss");
      total += loss * static_cast<double>(idx.size());
      adam_step(adam, policy.net, grads);
    }
    policy.loss_history.push_back(total / static_cast<double>(data.size()));
  }
  return policy;
}

inline DetPolicy train_bc_deterministic(const EnvSpec& spec, const PreferenceDataset& dataset,
                                        const TrainConfig& config, RandomStream& rng) {
  DetPolicy p = train_bc_deterministic(spec, extract_state_actions(dataset), config, rng);
  p.meta.quality = dataset.quality;
  p.meta.dataset_fingerprint = dataset.fingerprint;
  return p;
}

struct GaussianMoments {
  Matrix mean;
  Matrix std;
};

/// Diagonal Gaussian over actions. The mean is squashed onto the action
/// box like the deterministic clone's output; std comes from exp of the
/// clamped log-std rows. Sampled actions are clamped into
/// [action_low, action_high]; densities refer to the unclamped Gaussian.
class GaussianPolicy : public Policy {
 public:
  Mlp net;
  Vec action_low;
  Vec action_high;
  bool deterministic = false;  // act() returns the mean
  ModelMeta meta;
  std::vector<double> loss_history;

  static GaussianPolicy create(int state_dim, const Vec& low, const Vec& high, RandomStream& rng) {
    GaussianPolicy p;
    p.net = Mlp(standard_layer_dims(state_dim, 2 * static_cast<int>(low.size())), Head::Gaussian, rng);
    p.action_low = low;
    p.action_high = high;
    return p;
  }

  int action_dim() const { return static_cast<int>(action_low.size()); }
  Vec center() const { return 0.5 * (action_high + action_low); }
  Vec half_width() const { return 0.5 * (action_high - action_low); }

  GaussianMoments moments(const Matrix& states, ForwardCache* cache = nullptr) const {
    const Matrix out = net.forward_batch(states, cache);
    const auto n = action_dim();
    Matrix mean = half_width().asDiagonal() * out.topRows(n).array().tanh().matrix();
    mean.colwise() += center();
    return {std::move(mean), out.bottomRows(n)};
  }

  std::pair<Vec, Vec> mean_std(const Vec& state) const {
    auto m = moments(state);
    return {m.mean.col(0), m.std.col(0)};
  }

  /// Chains a gradient wrt (mean, std) back to the raw network output.
  Matrix net_upstream(const ForwardCache& cache, const Matrix& upstream) const {
    const auto n = action_dim();
    Matrix g = upstream;
    const Eigen::ArrayXXd t = cache.output.topRows(n).array().tanh();
    g.topRows(n) = (((1.0 - t.square()) * upstream.topRows(n).array()).colwise() * half_width().array()).matrix();
    return g;
  }

  /// Unclamped draw from N(mean, std).
  Vec sample_raw(const Vec& state, RandomStream& rng) const {
    auto [mu, sigma] = mean_std(state);
    Vec a(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) a[i] = mu[i] + sigma[i] * rng.normal();
    return a;
  }

  Vec act(const Vec& state, RandomStream& rng) const override {
    if (deterministic) return clamp_box(mean_std(state).first, action_low, action_high);
    return clamp_box(sample_raw(state, rng), action_low, action_high);
  }

  double log_density(const Vec& state, const Vec& action) const {
    auto [mu, sigma] = mean_std(state);
    double lp = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const double z = (action[i] - mu[i]) / sigma[i];
      lp += -0.5 * z * z - std::log(sigma[i]) - 0.5 * kLog2Pi;
    }
    return lp;
  }
};

/// Mean per-sample negative Gaussian log-likelihood and its gradient.
inline std::pair<double, MlpGradients> gaussian_nll_and_gradient(const GaussianPolicy& policy,
                                                                 const Matrix& states,
                                                                 const Matrix& actions) {
  require(states.cols() > 0 && states.cols() == actions.cols(), "gaussian_nll: empty or ragged batch");
  require(actions.rows() == policy.action_dim(), "gaussian_nll: action dimension mismatch");
  ForwardCache cache;
  const auto [mu, sigma] = policy.moments(states, &cache);
  const double n = static_cast<double>(states.cols());
  const Eigen::ArrayXXd diff = (actions - mu).array();
  const Eigen::ArrayXXd s = sigma.array();
  const double nll = (0.5 * (diff / s).square() + s.log() + 0.5 * kLog2Pi).sum() / n;
  Matrix upstream(2 * policy.action_dim(), states.cols());
  upstream.topRows(policy.action_dim()) = (-diff / s.square() / n).matrix();
  upstream.bottomRows(policy.action_dim()) = ((1.0 / s - diff.square() / s.cube()) / n).matrix();
  return {nll, policy.net.backward(cache, policy.net_upstream(cache, upstream))};
}

inline GaussianPolicy train_bc_gaussian(const EnvSpec& spec, const StateActionSet& data,
                                        const TrainConfig& config, RandomStream& rng) {
  require(data.size() > 0, "train_bc_gaussian: empty dataset");
  GaussianPolicy policy = GaussianPolicy::create(spec.state_dim, spec.action_low, spec.action_high, rng);
  policy.meta.env_id = spec.env_id;
  AdamState adam(policy.net, {config.learning_rate});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& idx : minibatches(static_cast<std::size_t>(data.size()), config.batch_size, rng)) {
      auto [loss, grads] = gaussian_nll_and_gradient(policy, gather_columns(data.states, idx),
                                                     gather_columns(data.actions, idx));
      if (!std::isfinite(loss)) throw std::runtime_error("train_bc_gaussian: non-finite loss");
      total += loss * static_cast<double>(idx.size());
      adam_step(adam, policy.net, grads);
    }
    policy.loss_history.push_back(total / static_cast<double>(data.size()));
  }
  return policy;
}

inline GaussianPolicy train_bc_gaussian(const EnvSpec& spec, const PreferenceDataset& dataset,
                                        const TrainConfig& config, RandomStream& rng) {
  GaussianPolicy p = train_bc_gaussian(spec, extract_state_actions(dataset), config, rng);
  p.meta.quality = dataset.quality;
  p.meta.dataset_fingerprint = dataset.fingerprint;
  return p;
}

// ---- checkpoints ----

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }
inline Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json to_json(const UtilityModel& m) {
  return {{"kind", "utility"}, {"meta", m.meta.to_json()},   {"state_dim", m.state_dim},
          {"action_dim", m.action_dim}, {"net", m.net.to_json()}, {"loss_history", m.loss_history}};
}

inline nlohmann::json to_json(const DetPolicy& p) {
  return {{"kind", "det_policy"},          {"meta", p.meta.to_json()},
          {"action_low", to_std(p.action_low)}, {"action_high", to_std(p.action_high)},
          {"net", p.net.to_json()},        {"loss_history", p.loss_history}};
}

inline nlohmann::json to_json(const GaussianPolicy& p) {
  return {{"kind", "gauss_policy"},        {"meta", p.meta.to_json()},
          {"action_low", to_std(p.action_low)}, {"action_high", to_std(p.action_high)},
          {"net", p.net.to_json()},        {"loss_history", p.loss_history}};
}

inline void expect_kind(const nlohmann::json& j, std::string_view kind) {
  if (j.value("kind", "") != kind)
    throw ConfigError("expected a '" + std::string(kind) + "' checkpoint, got '" +
                      j.value("kind", "") + "'");
}

inline UtilityModel utility_from_json(const nlohmann::json& j) {
  expect_kind(j, "utility");
  UtilityModel m;
  m.meta = ModelMeta::from_json(j.at("meta"));
  m.state_dim = j.at("state_dim").get<int>();
  m.action_dim = j.at("action_dim").get<int>();
  m.net = Mlp::from_json(j.at("net"));
  m.loss_history = j.value("loss_history", std::vector<double>{});
  require(m.net.input_dim() == m.state_dim + m.action_dim && m.net.head() == Head::Tanh,
          "utility checkpoint: network shape mismatch");
  return m;
}

inline DetPolicy det_policy_from_json(const nlohmann::json& j) {
  expect_kind(j, "det_policy");
  DetPolicy p;
  p.meta = ModelMeta::from_json(j.at("meta"));
  p.action_low = to_vec(j.at("action_low").get<std::vector<double>>());
  p.action_high = to_vec(j.at("action_high").get<std::vector<double>>());
  p.net = Mlp::from_json(j.at("net"));
  p.loss_history = j.value("loss_history", std::vector<double>{});
  require(p.net.output_dim() == p.action_low.size(), "det_policy checkpoint: shape mismatch");
  return p;
}

inline GaussianPolicy gauss_policy_from_json(const nlohmann::json& j) {
  expect_kind(j, "gauss_policy");
  GaussianPolicy p;
  p.meta = ModelMeta::from_json(j.at("meta"));
  p.action_low = to_vec(j.at("action_low").get<std::vector<double>>());
  p.action_high = to_vec(j.at("action_high").get<std::vector<double>>());
  p.net = Mlp::from_json(j.at("net"));
  p.loss_history = j.value("loss_history", std::vector<double>{});
  require(p.net.output_dim() == 2 * p.action_low.size(), "gauss_policy checkpoint: shape mismatch");
  return p;
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void save_json(const nlohmann::json& j, const std::filesystem::path& path) {
  write_file_atomic(path, j.dump() + "\n");
}

}  // namespace prc

#endif  // PRC_MODELS_HPP_
