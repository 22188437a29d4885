#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssa/ops.hpp"
#include "ssa/rng.hpp"
#include "ssa/ssa_layer.hpp"
#include "ssa/tensor.hpp"

namespace ssa {

/// A trainable tensor with its gradient accumulator and momentum buffer.
template <typename T>
struct Parameter {
  std::string name;
  FeatureMap<T> value;
  FeatureMap<T> grad;
  FeatureMap<T> velocity;

  Parameter(std::string name_, const Shape5& shape)
      : name(std::move(name_)), value(shape), grad(shape), velocity(shape) {}
  void zero_grad() { grad.fill(T(0)); }
};

/// Non-trainable state saved with checkpoints (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  FeatureMap<T> value;
};

template <typename T>
struct StateRefs {
  std::vector<Parameter<T>*> params;
  std::vector<Buffer<T>*> buffers;
};

/// One differentiable stage operating on 5-D feature maps.
///
/// `forward` caches whatever `backward` needs; `backward` accumulates into
/// parameter gradients and returns the input gradient of the latest forward.
template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }
  virtual std::string kind() const = 0;
  virtual Shape5 output_shape(const Shape5& input) const = 0;
  virtual FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) = 0;
  virtual FeatureMap<T> backward(const FeatureMap<T>& grad_out) = 0;
  virtual void collect(StateRefs<T>& /*refs*/) {}
  virtual void initialize(Rng& /*rng*/) {}
  /// Folds the branch taken by the latest forward pass (ReLU signs, pool
  /// winners) into `hash`; unchanged for layers that are smooth.
  virtual std::uint64_t branch_hash(std::uint64_t hash) const { return hash; }

 private:
  std::string name_;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

/// FNV-1a step used by branch_hash implementations.
inline std::uint64_t hash_mix(std::uint64_t hash, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    hash ^= (value >> (8 * i)) & 0xffu;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Hash of the positive-part pattern of `x`.
template <typename T>
std::uint64_t sign_hash(std::uint64_t hash, const FeatureMap<T>& x) {
  std::uint64_t word = 0;
  std::size_t bits = 0;
  for (T v : x.data()) {
    word = (word << 1) | (v > T(0) ? 1u : 0u);
    if (++bits == 64) {
      hash = hash_mix(hash, word);
      word = 0;
      bits = 0;
    }
  }
  return hash_mix(hash, word);
}

template <typename T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(std::string name, std::size_t in, std::size_t out, std::size_t k,
              Conv2dGeometry geometry, bool bias);

  std::string kind() const override { return "conv2d"; }
  Shape5 output_shape(const Shape5& input) const override;
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  void collect(StateRefs<T>& refs) override;
  /// He-normal weights, std sqrt(2 / fan_in); zero bias.
  void initialize(Rng& rng) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>* bias() { return bias_ ? &*bias_ : nullptr; }
  const Conv2dGeometry& geometry() const { return geometry_; }

 private:
  std::span<const T> bias_span() const;

  Conv2dGeometry geometry_;
  Parameter<T> weight_;
  std::optional<Parameter<T>> bias_;
  FeatureMap<T> input_;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  BatchNormLayer(std::string name, std::size_t channels);

  std::string kind() const override { return "batch_norm"; }
  Shape5 output_shape(const Shape5& input) const override { return input; }
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  void collect(StateRefs<T>& refs) override;
  /// Scale 1, shift 0, running mean 0, running variance 1.
  void initialize(Rng& rng) override;

  Parameter<T>& scale() { return scale_; }
  Parameter<T>& shift() { return shift_; }
  Buffer<T>& running_mean() { return mean_; }
  Buffer<T>& running_var() { return var_; }

 private:
  Parameter<T> scale_;
  Parameter<T> shift_;
  Buffer<T> mean_;
  Buffer<T> var_;
  BatchNormCache<T> cache_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string kind() const override { return "relu"; }
  Shape5 output_shape(const Shape5& input) const override { return input; }
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  std::uint64_t branch_hash(std::uint64_t hash) const override { return sign_hash(hash, input_); }

 private:
  FeatureMap<T> input_;
};

template <typename T>
class SsaLayer final : public Layer<T> {
 public:
  SsaLayer(std::string name, SsaConfig config) : Layer<T>(std::move(name)), config_(config) {}
  std::string kind() const override { return "ssa"; }
  Shape5 output_shape(const Shape5& input) const override { return input; }
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  const SsaConfig& config() const { return config_; }

 private:
  SsaConfig config_;
};

/// Temporal max pooling; kernel 0 pools over the full input depth.
template <typename T>
class TemporalPoolLayer final : public Layer<T> {
 public:
  TemporalPoolLayer(std::string name, std::size_t kernel, std::size_t stride)
      : Layer<T>(std::move(name)), kernel_(kernel), stride_(stride) {}
  std::string kind() const override { return "temporal_max_pool"; }
  Shape5 output_shape(const Shape5& input) const override;
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  std::uint64_t branch_hash(std::uint64_t hash) const override;

 private:
  TemporalPoolSpec resolve(const Shape5& input) const;

  std::size_t kernel_;
  std::size_t stride_;
  PoolIndices indices_;
};

template <typename T>
class MaxPool3dLayer final : public Layer<T> {
 public:
  MaxPool3dLayer(std::string name, MaxPool3dSpec spec) : Layer<T>(std::move(name)), spec_(spec) {}
  std::string kind() const override { return "max_pool3d"; }
  Shape5 output_shape(const Shape5& input) const override {
    return max_pool3d_output_shape(input, spec_);
  }
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  std::uint64_t branch_hash(std::uint64_t hash) const override;

 private:
  MaxPool3dSpec spec_;
  PoolIndices indices_;
};

/// Runs its children in order; an empty sequence is the identity.
template <typename T>
class Sequential final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string kind() const override { return "sequential"; }
  Shape5 output_shape(const Shape5& input) const override;
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  void collect(StateRefs<T>& refs) override;
  void initialize(Rng& rng) override;
  std::uint64_t branch_hash(std::uint64_t hash) const override;

  void add(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer<T>& at(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// relu(residual(x') + shortcut(x')) with x' = x, or x temporally pooled at
/// entry. The shortcut is the identity unless a projection is attached.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(std::string name, std::unique_ptr<Sequential<T>> residual,
                std::unique_ptr<Sequential<T>> shortcut, LayerPtr<T> entry_pool);

  std::string kind() const override { return "residual_block"; }
  Shape5 output_shape(const Shape5& input) const override;
  FeatureMap<T> forward(const FeatureMap<T>& x, Mode mode) override;
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) override;
  void collect(StateRefs<T>& refs) override;
  void initialize(Rng& rng) override;
  std::uint64_t branch_hash(std::uint64_t hash) const override;

  Sequential<T>& residual() { return *residual_; }
  Sequential<T>& shortcut() { return *shortcut_; }

 private:
  std::unique_ptr<Sequential<T>> residual_;
  std::unique_ptr<Sequential<T>> shortcut_;
  LayerPtr<T> entry_pool_;
  FeatureMap<T> sum_;
};

/// Fully connected layer on (n, in) feature rows.
template <typename T>
class LinearLayer {
 public:
  LinearLayer(std::string name, std::size_t in, std::size_t out);

  const std::string& name() const { return name_; }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Matrix<T> forward(const Matrix<T>& x);
  Matrix<T> backward(const Matrix<T>& grad_out);
  void collect(StateRefs<T>& refs);
  /// Normal weights with std sqrt(1 / in); zero bias.
  void initialize(Rng& rng);

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::string name_;
  std::size_t in_;
  std::size_t out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  Matrix<T> input_;
};

}  // namespace ssa
