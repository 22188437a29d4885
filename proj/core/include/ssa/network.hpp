#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "ssa/arch.hpp"
#include "ssa/layers.hpp"

namespace ssa {

/// Executable network built from an SSA-variant NetworkSpec.
///
/// Parameter and buffer names follow param_table(): e.g. "block2.conv1.weight",
/// "block2.bn1.running_mean", "head.classifier.bias".
template <typename T>
class Network {
 public:
  /// Builds and initializes from `seed`. Throws SpecError for invalid specs
  /// and for 3D-reference specs, which are counted but never executed.
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }

  /// Logits (n, classes); caches activations for backward.
  Matrix<T> forward(const FeatureMap<T>& x, Mode mode);
  /// Eval-mode logits.
  Matrix<T> predict(const FeatureMap<T>& x) { return forward(x, Mode::Eval); }
  /// Accumulates parameter gradients; returns the input gradient.
  FeatureMap<T> backward(const Matrix<T>& grad_logits);

  const std::vector<Parameter<T>*>& parameters() { return refs_.params; }
  const std::vector<Buffer<T>*>& buffers() { return refs_.buffers; }
  void zero_grad();
  std::size_t param_count() const;
  /// Re-draws every parameter from `seed` and resets running statistics.
  void initialize(std::uint64_t seed);

  /// Body layers in spec order (tests inspect individual blocks).
  Layer<T>& body_layer(std::size_t i) { return *body_.at(i); }
  std::size_t body_size() const { return body_.size(); }
  /// Branch pattern (ReLU signs, pool winners) of the latest forward pass.
  std::uint64_t branch_hash() const;
  /// Output of the body before the head; valid after forward().
  const FeatureMap<T>& body_features() const { return features_; }

 private:
  NetworkSpec spec_;
  std::vector<LayerPtr<T>> body_;
  std::vector<LinearLayer<T>> hidden_;
  std::unique_ptr<LinearLayer<T>> classifier_;
  StateRefs<T> refs_;
  FeatureMap<T> features_;
  std::vector<FeatureMap<T>> hidden_pre_;
};

/// Executable residual block for an SSA-variant BlockSpec; `name` prefixes
/// every sub-layer.
template <typename T>
std::unique_ptr<ResidualBlock<T>> build_ssa_block(const BlockSpec& spec,
                                                  const std::string& name = "block");

template <typename T>
std::unique_ptr<Network<T>> build_network(const NetworkSpec& spec, std::uint64_t seed) {
  return std::make_unique<Network<T>>(spec, seed);
}

template <typename T>
std::unique_ptr<Network<T>> build_network(std::string_view name, std::uint64_t seed) {
  return std::make_unique<Network<T>>(architecture(name), seed);
}

}  // namespace ssa
