#ifndef PRC_NN_HPP_
#define PRC_NN_HPP_

#include "prc/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace prc {

enum class Head { Linear, Tanh, Gaussian };

inline std::string to_string(Head head) {
  switch (head) {
    case Head::Linear: return "linear";
    case Head::Tanh: return "tanh";
    case Head::Gaussian: return "gaussian";
  }
  return "?";
}

inline Head parse_head(std::string_view name) {
  if (name == "linear") return Head::Linear;
  if (name == "tanh") return Head::Tanh;
  if (name == "gaussian") return Head::Gaussian;
  throw ConfigError("unknown head '" + std::string(name) + "'");
}

// Log-std pre-activation range of the gaussian head.
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Three hidden layers of 64 tanh units.
inline std::vector<int> standard_layer_dims(int input_dim, int output_dim) {
  return {input_dim, 64, 64, 64, output_dim};
}

struct DenseLayer {
  Matrix weight;  // out x in
  Vec bias;       // out
};

using MlpGradients = std::vector<DenseLayer>;

/// Intermediate values of a batched forward pass, kept for backward().
/// Columns are samples.
struct ForwardCache {
  std::vector<Matrix> activations;  // input plus each hidden activation
  Matrix pre_output;                // last layer pre-activation
  Matrix output;                    // head output
};

/// Hidden-layer tanh through the vectorized exp; Eigen evaluates double
/// tanh one scalar at a time. Absolute error is a few ulps of 1.
inline Matrix hidden_tanh(const Matrix& z) {
  const Eigen::ArrayXXd e = (-2.0 * z.array().abs()).exp();
  return (z.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
}

/// Fully connected network with tanh hidden units and one of three heads:
///   linear   - identity on the last affine layer
///   tanh     - elementwise tanh, output in (-1, 1) even in floating point
///   gaussian - last layer of width 2n split into mean (linear) and
///              std = exp(clamp(z, kLogStdMin, kLogStdMax))
class Mlp {
 public:
  Mlp() = default;

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Mlp(std::vector<int> layer_dims, Head head, RandomStream& rng)
      : Mlp(zeros(std::move(layer_dims), head)) {
    for (auto& layer : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
        layer.weight.data()[i] = rng.uniform(-bound, bound);
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        layer.bias[i] = rng.uniform(-bound, bound);
    }
  }

  static Mlp zeros(std::vector<int> layer_dims, Head head) {
    require(layer_dims.size() >= 2, "Mlp: need at least input and output dims");
    for (int d : layer_dims) require(d > 0, "Mlp: layer dims must be positive");
    if (head == Head::Gaussian)
      require(layer_dims.back() % 2 == 0, "Mlp: gaussian head needs an even output width");
    Mlp net;
    net.dims_ = std::move(layer_dims);
    net.head_ = head;
    for (std::size_t l = 0; l + 1 < net.dims_.size(); ++l) {
      net.layers_.push_back({Matrix::Zero(net.dims_[l + 1], net.dims_[l]),
                             Vec::Zero(net.dims_[l + 1])});
    }
    return net;
  }

  const std::vector<int>& layer_dims() const { return dims_; }
  Head head() const { return head_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Matrix forward_batch(const Matrix& input, ForwardCache* cache = nullptr) const {
    require(input.rows() == input_dim(), "Mlp::forward: input dimension mismatch");
    Matrix a = input;
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(a);
    }
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      Matrix z = layers_[l].weight * a;
      z.colwise() += layers_[l].bias;
      a = hidden_tanh(z);
      if (cache) cache->activations.push_back(a);
    }
    Matrix z = layers_.back().weight * a;
    z.colwise() += layers_.back().bias;
    Matrix out = apply_head(z);
    if (cache) {
      cache->pre_output = std::move(z);
      cache->output = out;
    }
    return out;
  }

  Vec forward(const Vec& input) const {
    require(input.size() == input_dim(), "Mlp::forward: input dimension mismatch");
    return forward_batch(Matrix(input)).col(0);
  }

  /// Gradients of sum_over_columns(upstream . output) with respect to every
  /// parameter. `upstream` holds dL/d(head output), shaped like the output.
  MlpGradients backward(const ForwardCache& cache, const Matrix& upstream) const {
    require(upstream.rows() == cache.output.rows() && upstream.cols() == cache.output.cols(),
            "Mlp::backward: upstream shape mismatch");
    Matrix dz = head_gradient(cache, upstream);
    MlpGradients grads(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Matrix& a_in = cache.activations[l];
      grads[l].weight = dz * a_in.transpose();
      grads[l].bias = dz.rowwise().sum();
      if (l == 0) break;
      Matrix da = layers_[l].weight.transpose() * dz;
      dz = (da.array() * (1.0 - a_in.array().square())).matrix();
    }
    return grads;
  }

  MlpGradients zero_gradients() const {
    MlpGradients g;
    for (const auto& layer : layers_)
      g.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                   Vec::Zero(layer.bias.size())});
    return g;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_)
      n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return n;
  }

  // Flattened as [W0 (column-major), b0, W1, b1, ...].
  Vec flat_parameters() const { return flatten(layers_); }

  void set_flat_parameters(const Vec& flat) {
    require(static_cast<std::size_t>(flat.size()) == parameter_count(),
            "Mlp::set_flat_parameters: size mismatch");
    Eigen::Index k = 0;
    for (auto& layer : layers_) {
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = flat[k++];
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = flat[k++];
    }
  }

  static Vec flatten(const MlpGradients& layers) {
    Eigen::Index n = 0;
    for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
    Vec flat(n);
    Eigen::Index k = 0;
    for (const auto& layer : layers) {
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) flat[k++] = layer.weight.data()[i];
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) flat[k++] = layer.bias[i];
    }
    return flat;
  }

  bool all_finite() const {
    for (const auto& layer : layers_)
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : layers_) {
      std::vector<double> w;
      w.reserve(static_cast<std::size_t>(layer.weight.size()));
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
      layers.push_back({{"weight", w},
                        {"bias", std::vector<double>(layer.bias.data(),
                                                     layer.bias.data() + layer.bias.size())}});
    }
    return {{"layer_dims", dims_}, {"head", to_string(head_)}, {"layers", layers}};
  }

  static Mlp from_json(const nlohmann::json& j) {
    Mlp net = zeros(j.at("layer_dims").get<std::vector<int>>(),
                    parse_head(j.at("head").get<std::string>()));
    const auto& layers = j.at("layers");
    require(layers.size() == net.layers_.size(), "Mlp::from_json: layer count mismatch");
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      auto& layer = net.layers_[l];
      const auto w = layers[l].at("weight").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      require(w.size() == static_cast<std::size_t>(layer.weight.size()) &&
                  b.size() == static_cast<std::size_t>(layer.bias.size()),
              "Mlp::from_json: parameter shape mismatch");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = w[k++];
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
        layer.bias[i] = b[static_cast<std::size_t>(i)];
    }
    require(net.all_finite(), "Mlp::from_json: non-finite parameters");
    return net;
  }

 private:
  Matrix apply_head(const Matrix& z) const {
    switch (head_) {
      case Head::Linear: return z;
      case Head::Tanh: {
        // tanh rounds to +-1 for |z| > ~19; keep the output strictly inside.
        const double edge = std::nextafter(1.0, 0.0);
        return z.array().tanh().max(-edge).min(edge).matrix();
      }
      case Head::Gaussian: {
        const Eigen::Index n = z.rows() / 2;
        Matrix out(z.rows(), z.cols());
        out.topRows(n) = z.topRows(n);
        out.bottomRows(n) = z.bottomRows(n).array().max(kLogStdMin).min(kLogStdMax).exp().matrix();
        return out;
      }
    }
    return z;
  }

  Matrix head_gradient(const ForwardCache& cache, const Matrix& upstream) const {
    switch (head_) {
      case Head::Linear: return upstream;
      case Head::Tanh:
        return (upstream.array() * (1.0 - cache.output.array().square())).matrix();
      case Head::Gaussian: {
        const Eigen::Index n = upstream.rows() / 2;
        Matrix dz(upstream.rows(), upstream.cols());
        dz.topRows(n) = upstream.topRows(n);
        const auto z = cache.pre_output.bottomRows(n).array();
        const auto inside = ((z >= kLogStdMin) && (z <= kLogStdMax)).cast<double>();
        dz.bottomRows(n) =
            (upstream.bottomRows(n).array() * cache.output.bottomRows(n).array() * inside).matrix();
        return dz;
      }
    }
    return upstream;
  }

  std::vector<int> dims_;
  Head head_ = Head::Linear;
  std::vector<DenseLayer> layers_;
};

inline void add_scaled(MlpGradients& acc, const MlpGradients& g, double scale = 1.0) {
  for (std::size_t l = 0; l < acc.size(); ++l) {
    acc[l].weight += scale * g[l].weight;
    acc[l].bias += scale * g[l].bias;
  }
}

inline double gradient_norm(const MlpGradients& g) {
  double sq = 0.0;
  for (const auto& layer : g) sq += layer.weight.squaredNorm() + layer.bias.squaredNorm();
  return std::sqrt(sq);
}

/// Rescales g so its global L2 norm is at most max_norm.
inline void clip_gradient_norm(MlpGradients& g, double max_norm) {
  const double norm = gradient_norm(g);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& layer : g) {
      layer.weight *= s;
      layer.bias *= s;
    }
  }
}

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  MlpGradients first_moment;
  MlpGradients second_moment;

  AdamState() = default;
  AdamState(const Mlp& net, AdamConfig cfg)
      : config(cfg), first_moment(net.zero_gradients()), second_moment(net.zero_gradients()) {}
};

/// One bias-corrected Adam update of `net` in place.
inline void adam_step(AdamState& state, Mlp& net, const MlpGradients& grads) {
  require(grads.size() == net.layers().size() && state.first_moment.size() == grads.size(),
          "adam_step: shape mismatch");
  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    require(param.size() == g.size(), "adam_step: gradient shape mismatch");
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = (c.beta2 * v.array() + (1.0 - c.beta2) * g.array().square()).matrix();
    param.array() -= c.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + c.epsilon);
  };
  for (std::size_t l = 0; l < grads.size(); ++l) {
    auto& layer = net.layers()[l];
    update(layer.weight, state.first_moment[l].weight, state.second_moment[l].weight,
           grads[l].weight);
    update(layer.bias, state.first_moment[l].bias, state.second_moment[l].bias, grads[l].bias);
  }
}

}  // namespace prc

#endif  // PRC_NN_HPP_
