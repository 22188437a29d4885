#include "ssa/layers.hpp"

#include <cmath>

#include "ssa/errors.hpp"

namespace ssa {

namespace {

template <typename T>
void accumulate(FeatureMap<T>& into, std::span<const T> values) {
  T* dst = into.raw();
  for (std::size_t i = 0; i < values.size(); ++i) dst[i] += values[i];
}

template <typename T>
void add_in_place(FeatureMap<T>& into, const FeatureMap<T>& other) {
  if (into.shape() != other.shape()) {
    throw DimensionError("cannot add " + other.shape().str() + " into " + into.shape().str());
  }
  accumulate<T>(into, other.data());
}

Shape5 vector_shape(std::size_t n) { return Shape5{1, 1, 1, 1, n}; }

}  // namespace

// Conv2dLayer ---------------------------------------------------------------

template <typename T>
Conv2dLayer<T>::Conv2dLayer(std::string name, std::size_t in, std::size_t out, std::size_t k,
                            Conv2dGeometry geometry, bool bias)
    : Layer<T>(std::move(name)),
      geometry_(geometry),
      weight_(this->name() + ".weight", Shape5{out, in / std::max<std::size_t>(geometry.groups, 1), 1, k, k}) {
  if (geometry.groups == 0 || in % geometry.groups != 0 || out % geometry.groups != 0) {
    throw SpecError(this->name() + ": groups must divide input and output channels");
  }
  if (bias) bias_.emplace(this->name() + ".bias", vector_shape(out));
}

template <typename T>
std::span<const T> Conv2dLayer<T>::bias_span() const {
  if (!bias_) return {};
  return bias_->value.data();
}

template <typename T>
Shape5 Conv2dLayer<T>::output_shape(const Shape5& input) const {
  return conv2d_output_shape(input, weight_.value.shape(), geometry_);
}

template <typename T>
FeatureMap<T> Conv2dLayer<T>::forward(const FeatureMap<T>& x, Mode) {
  input_ = x;
  return conv2d_framewise<T>(x, weight_.value, bias_span(), geometry_);
}

template <typename T>
FeatureMap<T> Conv2dLayer<T>::backward(const FeatureMap<T>& grad_out) {
  auto g = conv2d_framewise_backward<T>(input_, weight_.value, bias_.has_value(), geometry_, grad_out);
  accumulate<T>(weight_.grad, g.grad_weight.data());
  if (bias_) accumulate<T>(bias_->grad, std::span<const T>(g.grad_bias));
  return std::move(g.grad_input);
}

template <typename T>
void Conv2dLayer<T>::collect(StateRefs<T>& refs) {
  refs.params.push_back(&weight_);
  if (bias_) refs.params.push_back(&*bias_);
}

template <typename T>
void Conv2dLayer<T>::initialize(Rng& rng) {
  const Shape5 s = weight_.value.shape();
  const double fan_in = static_cast<double>(s.c * s.h * s.w);
  const double stddev = std::sqrt(2.0 / fan_in);
  for (T& v : weight_.value.data()) v = static_cast<T>(rng.normal(0.0, stddev));
  weight_.velocity.fill(T(0));
  if (bias_) {
    bias_->value.fill(T(0));
    bias_->velocity.fill(T(0));
  }
}

// BatchNormLayer ------------------------------------------------------------

template <typename T>
BatchNormLayer<T>::BatchNormLayer(std::string name, std::size_t channels)
    : Layer<T>(std::move(name)),
      scale_(this->name() + ".scale", vector_shape(channels)),
      shift_(this->name() + ".shift", vector_shape(channels)),
      mean_{this->name() + ".running_mean", FeatureMap<T>(vector_shape(channels))},
      var_{this->name() + ".running_var", FeatureMap<T>(vector_shape(channels), T(1))} {
  scale_.value.fill(T(1));
}

template <typename T>
FeatureMap<T> BatchNormLayer<T>::forward(const FeatureMap<T>& x, Mode mode) {
  const BatchNormParams<T> params{scale_.value.data(), shift_.value.data()};
  return batch_norm<T>(x, params, RunningStats<T>{mean_.value.data(), var_.value.data()}, mode,
                       &cache_);
}

template <typename T>
FeatureMap<T> BatchNormLayer<T>::backward(const FeatureMap<T>& grad_out) {
  const BatchNormParams<T> params{scale_.value.data(), shift_.value.data()};
  auto g = batch_norm_backward<T>(cache_, params, grad_out);
  accumulate<T>(scale_.grad, std::span<const T>(g.grad_scale));
  accumulate<T>(shift_.grad, std::span<const T>(g.grad_shift));
  return std::move(g.grad_input);
}

template <typename T>
void BatchNormLayer<T>::collect(StateRefs<T>& refs) {
  refs.params.push_back(&scale_);
  refs.params.push_back(&shift_);
  refs.buffers.push_back(&mean_);
  refs.buffers.push_back(&var_);
}

template <typename T>
void BatchNormLayer<T>::initialize(Rng&) {
  scale_.value.fill(T(1));
  shift_.value.fill(T(0));
  scale_.velocity.fill(T(0));
  shift_.velocity.fill(T(0));
  mean_.value.fill(T(0));
  var_.value.fill(T(1));
}

// Stateless layers ------------------------------------------------------------

template <typename T>
FeatureMap<T> ReluLayer<T>::forward(const FeatureMap<T>& x, Mode) {
  input_ = x;
  return relu(x);
}

template <typename T>
FeatureMap<T> ReluLayer<T>::backward(const FeatureMap<T>& grad_out) {
  return relu_backward(input_, grad_out);
}

template <typename T>
FeatureMap<T> SsaLayer<T>::forward(const FeatureMap<T>& x, Mode) {
  return ssa_forward(x, config_);
}

template <typename T>
FeatureMap<T> SsaLayer<T>::backward(const FeatureMap<T>& grad_out) {
  return ssa_backward(grad_out, config_);
}

template <typename T>
TemporalPoolSpec TemporalPoolLayer<T>::resolve(const Shape5& input) const {
  return TemporalPoolSpec{kernel_ == 0 ? input.f : kernel_, stride_};
}

template <typename T>
Shape5 TemporalPoolLayer<T>::output_shape(const Shape5& input) const {
  return temporal_pool_output_shape(input, resolve(input));
}

template <typename T>
FeatureMap<T> TemporalPoolLayer<T>::forward(const FeatureMap<T>& x, Mode) {
  auto result = temporal_max_pool(x, resolve(x.shape()));
  indices_ = std::move(result.indices);
  return std::move(result.output);
}

template <typename T>
FeatureMap<T> TemporalPoolLayer<T>::backward(const FeatureMap<T>& grad_out) {
  return max_pool_backward(indices_, grad_out);
}

template <typename T>
std::uint64_t TemporalPoolLayer<T>::branch_hash(std::uint64_t hash) const {
  for (std::uint32_t i : indices_.argmax) hash = hash_mix(hash, i);
  return hash;
}

template <typename T>
std::uint64_t MaxPool3dLayer<T>::branch_hash(std::uint64_t hash) const {
  for (std::uint32_t i : indices_.argmax) hash = hash_mix(hash, i);
  return hash;
}

template <typename T>
FeatureMap<T> MaxPool3dLayer<T>::forward(const FeatureMap<T>& x, Mode) {
  auto result = max_pool3d(x, spec_);
  indices_ = std::move(result.indices);
  return std::move(result.output);
}

template <typename T>
FeatureMap<T> MaxPool3dLayer<T>::backward(const FeatureMap<T>& grad_out) {
  return max_pool_backward(indices_, grad_out);
}

// Sequential ----------------------------------------------------------------

template <typename T>
Shape5 Sequential<T>::output_shape(const Shape5& input) const {
  Shape5 s = input;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  return s;
}

template <typename T>
FeatureMap<T> Sequential<T>::forward(const FeatureMap<T>& x, Mode mode) {
  if (layers_.empty()) return x;
  FeatureMap<T> y = layers_.front()->forward(x, mode);
  for (std::size_t i = 1; i < layers_.size(); ++i) y = layers_[i]->forward(y, mode);
  return y;
}

template <typename T>
FeatureMap<T> Sequential<T>::backward(const FeatureMap<T>& grad_out) {
  if (layers_.empty()) return grad_out;
  FeatureMap<T> g = layers_.back()->backward(grad_out);
  for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::collect(StateRefs<T>& refs) {
  for (auto& layer : layers_) layer->collect(refs);
}

template <typename T>
void Sequential<T>::initialize(Rng& rng) {
  for (auto& layer : layers_) layer->initialize(rng);
}

template <typename T>
std::uint64_t Sequential<T>::branch_hash(std::uint64_t hash) const {
  for (const auto& layer : layers_) hash = layer->branch_hash(hash);
  return hash;
}

// ResidualBlock -------------------------------------------------------------

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, std::unique_ptr<Sequential<T>> residual,
                                std::unique_ptr<Sequential<T>> shortcut, LayerPtr<T> entry_pool)
    : Layer<T>(std::move(name)),
      residual_(std::move(residual)),
      shortcut_(std::move(shortcut)),
      entry_pool_(std::move(entry_pool)) {}

template <typename T>
Shape5 ResidualBlock<T>::output_shape(const Shape5& input) const {
  const Shape5 entry = entry_pool_ ? entry_pool_->output_shape(input) : input;
  const Shape5 main = residual_->output_shape(entry);
  const Shape5 side = shortcut_->output_shape(entry);
  if (main != side) {
    throw DimensionError(this->name() + ": residual path gives " + main.str() +
                         " but shortcut gives " + side.str());
  }
  return main;
}

template <typename T>
FeatureMap<T> ResidualBlock<T>::forward(const FeatureMap<T>& x, Mode mode) {
  FeatureMap<T> pooled;
  const FeatureMap<T>* entry = &x;
  if (entry_pool_) {
    pooled = entry_pool_->forward(x, mode);
    entry = &pooled;
  }
  sum_ = residual_->forward(*entry, mode);
  add_in_place(sum_, shortcut_->forward(*entry, mode));
  return relu(sum_);
}

template <typename T>
FeatureMap<T> ResidualBlock<T>::backward(const FeatureMap<T>& grad_out) {
  const FeatureMap<T> g = relu_backward(sum_, grad_out);
  FeatureMap<T> grad_entry = residual_->backward(g);
  add_in_place(grad_entry, shortcut_->backward(g));
  if (entry_pool_) return entry_pool_->backward(grad_entry);
  return grad_entry;
}

template <typename T>
void ResidualBlock<T>::collect(StateRefs<T>& refs) {
  residual_->collect(refs);
  shortcut_->collect(refs);
}

template <typename T>
void ResidualBlock<T>::initialize(Rng& rng) {
  residual_->initialize(rng);
  shortcut_->initialize(rng);
}

template <typename T>
std::uint64_t ResidualBlock<T>::branch_hash(std::uint64_t hash) const {
  if (entry_pool_) hash = entry_pool_->branch_hash(hash);
  hash = residual_->branch_hash(hash);
  hash = shortcut_->branch_hash(hash);
  return sign_hash(hash, sum_);
}

// LinearLayer ---------------------------------------------------------------

template <typename T>
LinearLayer<T>::LinearLayer(std::string name, std::size_t in, std::size_t out)
    : name_(std::move(name)),
      in_(in),
      out_(out),
      weight_(name_ + ".weight", Shape5{1, 1, 1, out, in}),
      bias_(name_ + ".bias", vector_shape(out)) {}

template <typename T>
Matrix<T> LinearLayer<T>::forward(const Matrix<T>& x) {
  input_ = x;
  return linear<T>(x, weight_.value.data(), out_, bias_.value.data());
}

template <typename T>
Matrix<T> LinearLayer<T>::backward(const Matrix<T>& grad_out) {
  auto g = linear_backward<T>(input_, weight_.value.data(), out_, grad_out);
  accumulate<T>(weight_.grad, g.grad_weight.data());
  accumulate<T>(bias_.grad, std::span<const T>(g.grad_bias));
  return std::move(g.grad_input);
}

template <typename T>
void LinearLayer<T>::collect(StateRefs<T>& refs) {
  refs.params.push_back(&weight_);
  refs.params.push_back(&bias_);
}

template <typename T>
void LinearLayer<T>::initialize(Rng& rng) {
  const double stddev = std::sqrt(1.0 / static_cast<double>(in_));
  for (T& v : weight_.value.data()) v = static_cast<T>(rng.normal(0.0, stddev));
  bias_.value.fill(T(0));
  weight_.velocity.fill(T(0));
  bias_.velocity.fill(T(0));
}

#define SSA_INSTANTIATE(T)              \
  template class Conv2dLayer<T>;        \
  template class BatchNormLayer<T>;     \
  template class ReluLayer<T>;          \
  template class SsaLayer<T>;           \
  template class TemporalPoolLayer<T>;  \
  template class MaxPool3dLayer<T>;     \
  template class Sequential<T>;         \
  template class ResidualBlock<T>;      \
  template class LinearLayer<T>;

SSA_INSTANTIATE(float)
SSA_INSTANTIATE(double)
#undef SSA_INSTANTIATE

}  // namespace ssa
