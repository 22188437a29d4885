#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ssa/tensor.hpp"

namespace ssa {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Framewise 2D convolution
// ---------------------------------------------------------------------------

/// Stride, symmetric zero padding and channel grouping of a 1 x k x k kernel.
struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

/// A 1 x k x k kernel. `weight` has shape (c_out, c_in / groups, 1, k, k);
/// the temporal extent is always 1. An empty `bias` means no bias term.
template <typename T>
struct Conv2dKernel {
  FeatureMap<T> weight;
  std::vector<T> bias;
  Conv2dGeometry geometry;

  std::size_t out_channels() const { return weight.shape().n; }
  std::size_t in_channels() const { return weight.shape().c * geometry.groups; }
  std::size_t size() const { return weight.shape().h; }
  std::size_t param_count() const { return weight.size() + bias.size(); }
};

template <typename T>
struct Conv2dGradients {
  FeatureMap<T> grad_input;
  FeatureMap<T> grad_weight;
  std::vector<T> grad_bias;
};

/// Output shape of a framewise convolution; throws DimensionError when the
/// channel/group arithmetic or the padded spatial extent is inconsistent.
Shape5 conv2d_output_shape(const Shape5& input, const Shape5& weight, const Conv2dGeometry& geom);

/// Cross-correlates every temporal slice of `x` with the same 2D kernel.
template <typename T>
FeatureMap<T> conv2d_framewise(const FeatureMap<T>& x, const FeatureMap<T>& weight,
                               std::span<const T> bias, const Conv2dGeometry& geom);

template <typename T>
FeatureMap<T> conv2d_framewise(const FeatureMap<T>& x, const Conv2dKernel<T>& kernel) {
  return conv2d_framewise<T>(x, kernel.weight, kernel.bias, kernel.geometry);
}

template <typename T>
Conv2dGradients<T> conv2d_framewise_backward(const FeatureMap<T>& x, const FeatureMap<T>& weight,
                                             bool has_bias, const Conv2dGeometry& geom,
                                             const FeatureMap<T>& grad_out);

template <typename T>
Conv2dGradients<T> conv2d_framewise_backward(const FeatureMap<T>& x, const Conv2dKernel<T>& kernel,
                                             const FeatureMap<T>& grad_out) {
  return conv2d_framewise_backward<T>(x, kernel.weight, !kernel.bias.empty(), kernel.geometry,
                                      grad_out);
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

struct TemporalPoolSpec {
  std::size_t kernel = 2;
  std::size_t stride = 2;

  bool operator==(const TemporalPoolSpec&) const = default;
};

/// General max pooling over (f, h, w); padded cells never win.
struct MaxPool3dSpec {
  std::array<std::size_t, 3> kernel{1, 1, 1};
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> padding{0, 0, 0};

  bool operator==(const MaxPool3dSpec&) const = default;
};

/// Winning input offsets recorded by a max-pool forward pass.
struct PoolIndices {
  Shape5 input_shape;
  Shape5 output_shape;
  std::vector<std::uint32_t> argmax;
};

template <typename T>
struct PoolResult {
  FeatureMap<T> output;
  PoolIndices indices;
};

Shape5 temporal_pool_output_shape(const Shape5& input, const TemporalPoolSpec& spec);
Shape5 max_pool3d_output_shape(const Shape5& input, const MaxPool3dSpec& spec);

/// Max over temporal windows only. Ties resolve to the earliest frame.
template <typename T>
PoolResult<T> temporal_max_pool(const FeatureMap<T>& x, const TemporalPoolSpec& spec);

template <typename T>
PoolResult<T> max_pool3d(const FeatureMap<T>& x, const MaxPool3dSpec& spec);

/// Routes each output gradient to its recorded argmax; shared by both pools.
template <typename T>
FeatureMap<T> max_pool_backward(const PoolIndices& indices, const FeatureMap<T>& grad_out);

template <typename T>
FeatureMap<T> temporal_max_pool_backward(const PoolIndices& indices, const FeatureMap<T>& grad_out) {
  return max_pool_backward(indices, grad_out);
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormParams {
  std::span<const T> scale;
  std::span<const T> shift;
};

/// Running statistics, updated in place by training-mode passes.
template <typename T>
struct RunningStats {
  std::span<T> mean;
  std::span<T> var;
};

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::Train;
  FeatureMap<T> normalized;
  std::vector<double> inv_std;
};

template <typename T>
struct BatchNormGradients {
  FeatureMap<T> grad_input;
  std::vector<T> grad_scale;
  std::vector<T> grad_shift;
};

/// Per-channel normalization over (n, f, h, w). Training mode uses batch
/// statistics (biased variance) and moves the running statistics toward them
/// with momentum 0.1 (unbiased variance); eval mode uses the running values.
template <typename T>
FeatureMap<T> batch_norm(const FeatureMap<T>& x, const BatchNormParams<T>& params,
                         RunningStats<T> stats, Mode mode, BatchNormCache<T>* cache = nullptr);

template <typename T>
BatchNormGradients<T> batch_norm_backward(const BatchNormCache<T>& cache,
                                          const BatchNormParams<T>& params,
                                          const FeatureMap<T>& grad_out);

// ---------------------------------------------------------------------------
// Pointwise, pooling heads and the linear classifier
// ---------------------------------------------------------------------------

template <typename T>
FeatureMap<T> relu(const FeatureMap<T>& x);

/// Gradient of relu given its forward input.
template <typename T>
FeatureMap<T> relu_backward(const FeatureMap<T>& x, const FeatureMap<T>& grad_out);

/// Mean over (f, h, w) per channel: (n, c, f, h, w) -> (n, c).
template <typename T>
Matrix<T> global_avg_pool(const FeatureMap<T>& x);

template <typename T>
FeatureMap<T> global_avg_pool_backward(const Shape5& input_shape, const Matrix<T>& grad_out);

/// (n, c, f, h, w) -> (n, c*f*h*w) without reordering.
template <typename T>
Matrix<T> flatten(const FeatureMap<T>& x);

template <typename T>
FeatureMap<T> unflatten(const Shape5& shape, const Matrix<T>& m);

template <typename T>
struct LinearGradients {
  Matrix<T> grad_input;
  Matrix<T> grad_weight;
  std::vector<T> grad_bias;
};

/// logits = features * weights^T + bias with `weights` row-major (out, in).
/// An empty `bias` means no bias term.
template <typename T>
Matrix<T> linear(const Matrix<T>& features, std::span<const T> weights, std::size_t out_features,
                 std::span<const T> bias);

template <typename T>
Matrix<T> linear(const Matrix<T>& features, const Matrix<T>& weights, std::span<const T> bias) {
  return linear<T>(features, weights.data(), weights.rows(), bias);
}

template <typename T>
LinearGradients<T> linear_backward(const Matrix<T>& features, std::span<const T> weights,
                                   std::size_t out_features, const Matrix<T>& grad_out);

template <typename T>
LinearGradients<T> linear_backward(const Matrix<T>& features, const Matrix<T>& weights,
                                   const Matrix<T>& grad_out) {
  return linear_backward<T>(features, weights.data(), weights.rows(), grad_out);
}

}  // namespace ssa
