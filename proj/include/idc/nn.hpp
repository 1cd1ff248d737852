#pragma once

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "idc/core_math.hpp"

namespace idc {

enum class Activation { relu, identity };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw Error(Errc::CorruptFile, "unknown activation '" + s + "'");
}

struct LayerShape {
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::identity;

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Dense feed-forward network. All parameters live in one flat buffer;
/// each layer is a row-major (out x in) weight block followed by its bias.
template <typename Scalar>
class Mlp {
 public:
  using VectorX = Vector<Scalar>;
  using WeightMap = Eigen::Map<Matrix<Scalar>>;
  using ConstWeightMap = Eigen::Map<const Matrix<Scalar>>;

  /// Per-layer inputs and pre-activations retained by forward.
  struct Cache {
    std::vector<VectorX> inputs;
    std::vector<VectorX> pre_activations;
  };

  Mlp() = default;

  explicit Mlp(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw Error(Errc::ConfigInvalid, "network needs at least one layer");
    Index total = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      if (s.in < 1 || s.out < 1) throw Error(Errc::ConfigInvalid, "layer dimensions must be positive");
      if (l > 0 && layers_[l - 1].out != s.in) {
        throw Error(Errc::ConfigInvalid, "layer dimensions do not chain");
      }
      offsets_.push_back(total);
      total += s.out * s.in + s.out;
    }
    if (layers_.back().activation != Activation::identity) {
      throw Error(Errc::ConfigInvalid, "final layer activation must be identity");
    }
    params_ = VectorX::Zero(total);
  }

  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }
  Index input_dim() const { return layers_.front().in; }
  Index output_dim() const { return layers_.back().out; }
  Index num_params() const { return params_.size(); }

  VectorX& params() { return params_; }
  const VectorX& params() const { return params_; }

  WeightMap weights(std::size_t l) {
    return WeightMap(params_.data() + offsets_[l], layers_[l].out, layers_[l].in);
  }
  ConstWeightMap weights(std::size_t l) const {
    return ConstWeightMap(params_.data() + offsets_[l], layers_[l].out, layers_[l].in);
  }
  Eigen::Map<VectorX> bias(std::size_t l) {
    return Eigen::Map<VectorX>(params_.data() + offsets_[l] + layers_[l].out * layers_[l].in,
                               layers_[l].out);
  }
  Eigen::Map<const VectorX> bias(std::size_t l) const {
    return Eigen::Map<const VectorX>(
        params_.data() + offsets_[l] + layers_[l].out * layers_[l].in, layers_[l].out);
  }

  VectorX forward(const Eigen::Ref<const VectorX>& x, Cache* cache = nullptr) const {
    if (x.size() != input_dim()) {
      throw Error(Errc::DimensionMismatch, "network input has " + std::to_string(x.size()) +
                                               " entries, expected " +
                                               std::to_string(input_dim()));
    }
    if (cache) {
      cache->inputs.clear();
      cache->pre_activations.clear();
    }
    VectorX h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      VectorX z = weights(l) * h + bias(l);
      if (cache) {
        cache->inputs.push_back(std::move(h));
        cache->pre_activations.push_back(z);
      }
      if (layers_[l].activation == Activation::relu) z = z.cwiseMax(Scalar(0));
      h = std::move(z);
    }
    return h;
  }

  /// Accumulates d(loss)/d(params) into `param_grad` and returns
  /// d(loss)/d(input) for the upstream gradient d(loss)/d(output).
  VectorX backward(const Cache& cache, const Eigen::Ref<const VectorX>& upstream,
                   Eigen::Ref<VectorX> param_grad) const {
    if (cache.inputs.size() != layers_.size() ||
        cache.pre_activations.size() != layers_.size() || upstream.size() != output_dim() ||
        param_grad.size() != num_params()) {
      throw Error(Errc::StaleCache, "backward cache or gradient shape does not match network");
    }
    VectorX delta = upstream;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& s = layers_[l];
      if (cache.inputs[l].size() != s.in || cache.pre_activations[l].size() != s.out) {
        throw Error(Errc::StaleCache, "backward cache shape does not match layer");
      }
      if (s.activation == Activation::relu) {
        delta = (cache.pre_activations[l].array() > Scalar(0)).select(delta, Scalar(0));
      }
      Eigen::Map<Matrix<Scalar>> gw(param_grad.data() + offsets_[l], s.out, s.in);
      gw.noalias() += delta * cache.inputs[l].transpose();
      param_grad.segment(offsets_[l] + s.out * s.in, s.out) += delta;
      delta = weights(l).transpose() * delta;
    }
    return delta;
  }

  /// He-normal weights for ReLU layers, Glorot-normal otherwise; zero biases.
  template <typename Rng>
  void initialize(Rng& rng) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& s = layers_[l];
      const double stddev = s.activation == Activation::relu
                                ? std::sqrt(2.0 / static_cast<double>(s.in))
                                : std::sqrt(2.0 / static_cast<double>(s.in + s.out));
      std::normal_distribution<double> dist(0.0, stddev);
      auto w = weights(l);
      for (Index r = 0; r < w.rows(); ++r)
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(dist(rng));
      bias(l).setZero();
    }
  }

 private:
  std::vector<LayerShape> layers_;
  std::vector<Index> offsets_;
  VectorX params_;
};

/// Feature encoder: in -> hidden (ReLU) -> feature_dim.
template <typename Scalar>
Mlp<Scalar> make_encoder(Index input_dim, Index hidden_dim, Index feature_dim) {
  return Mlp<Scalar>({{input_dim, hidden_dim, Activation::relu},
                      {hidden_dim, feature_dim, Activation::identity}});
}

/// Linear classification head producing C logits.
template <typename Scalar>
Mlp<Scalar> make_fc_head(Index feature_dim, Index num_classes) {
  return Mlp<Scalar>({{feature_dim, num_classes, Activation::identity}});
}

/// Domain discriminator producing one logit; sigmoid(logit) = P(target).
template <typename Scalar>
Mlp<Scalar> make_discriminator(Index feature_dim, Index hidden_dim) {
  return Mlp<Scalar>({{feature_dim, hidden_dim, Activation::relu},
                      {hidden_dim, 1, Activation::identity}});
}

/// Backward pass of the gradient reversal layer. Its forward is the identity.
template <typename Derived>
Vector<typename Derived::Scalar> grl_backward(const Eigen::MatrixBase<Derived>& upstream,
                                              typename Derived::Scalar lambda) {
  if (lambda < 0) throw Error(Errc::ConfigInvalid, "GRL coefficient must be non-negative");
  return -lambda * upstream;
}

/// Ramp 2/(1+exp(-gamma p)) - 1 over training progress p in [0,1], scaled by max_lambda.
inline double grl_lambda(double progress, double gamma = 10.0, double max_lambda = 1.0) {
  return max_lambda * (2.0 / (1.0 + std::exp(-gamma * progress)) - 1.0);
}

/// Heavy-ball SGD with coupled L2 weight decay:
///   g <- grad + wd * p;  buf <- momentum * buf + g;  p <- p - lr * buf
template <typename Scalar>
struct SgdMomentum {
  Scalar lr = Scalar(1e-3);
  Scalar momentum = Scalar(0.9);
  Scalar weight_decay = Scalar(0);
  Vector<Scalar> velocity;
  long steps = 0;

  void step(Eigen::Ref<Vector<Scalar>> params, const Eigen::Ref<const Vector<Scalar>>& grads) {
    if (params.size() != grads.size()) {
      throw Error(Errc::ShapeMismatch, "SGD parameter/gradient size mismatch");
    }
    if (velocity.size() == 0 && steps == 0) velocity = Vector<Scalar>::Zero(params.size());
    if (velocity.size() != params.size()) {
      throw Error(Errc::ShapeMismatch, "SGD momentum buffer size mismatch");
    }
    velocity = momentum * velocity + grads + weight_decay * params;
    params -= lr * velocity;
    ++steps;
  }
};

/// Adam with bias-corrected moments. Moment buffers may be resized or reset
/// per entry when the parameter set itself changes (memory slots).
template <typename Scalar>
struct Adam {
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
  Scalar weight_decay = Scalar(0);
  Vector<Scalar> m;
  Vector<Scalar> v;
  long steps = 0;

  void resize(Index n) {
    const Index old = m.size();
    m.conservativeResize(n);
    v.conservativeResize(n);
    for (Index i = old; i < n; ++i) m(i) = v(i) = Scalar(0);
  }

  void reset_entry(Index i) { m(i) = v(i) = Scalar(0); }

  void step(Eigen::Ref<Vector<Scalar>> params, const Eigen::Ref<const Vector<Scalar>>& grads) {
    if (params.size() != grads.size()) {
      throw Error(Errc::ShapeMismatch, "Adam parameter/gradient size mismatch");
    }
    if (m.size() == 0 && steps == 0) resize(params.size());
    if (m.size() != params.size()) throw Error(Errc::ShapeMismatch, "Adam moment size mismatch");
    ++steps;
    const Vector<Scalar> g = grads + weight_decay * params;
    m = beta1 * m + (Scalar(1) - beta1) * g;
    v = beta2 * v + (Scalar(1) - beta2) * g.cwiseProduct(g);
    const Scalar c1 = Scalar(1) - std::pow(beta1, Scalar(steps));
    const Scalar c2 = Scalar(1) - std::pow(beta2, Scalar(steps));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace idc
