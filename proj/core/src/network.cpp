#include "ssa/network.hpp"

#include "ssa/errors.hpp"

namespace ssa {

namespace {

template <typename T>
void add_conv_unit(Sequential<T>& seq, const std::string& prefix, const std::string& suffix,
                   std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                   std::size_t groups, bool relu, const SsaConfig* ssa) {
  seq.add(std::make_unique<Conv2dLayer<T>>(prefix + ".conv" + suffix, in, out, k,
                                           Conv2dGeometry{stride, k / 2, groups}, false));
  seq.add(std::make_unique<BatchNormLayer<T>>(prefix + ".bn" + suffix, out));
  if (relu) seq.add(std::make_unique<ReluLayer<T>>(prefix + ".relu" + suffix));
  if (ssa) seq.add(std::make_unique<SsaLayer<T>>(prefix + ".ssa" + suffix, *ssa));
}

template <typename T>
LayerPtr<T> build_conv_layer(const ConvLayerSpec& c, std::size_t in, const std::string& prefix) {
  auto seq = std::make_unique<Sequential<T>>(prefix);
  seq->add(std::make_unique<Conv2dLayer<T>>(prefix + ".conv", in, c.out_channels, c.k,
                                            Conv2dGeometry{c.stride, c.padding, 1}, c.bias));
  if (c.batch_norm) seq->add(std::make_unique<BatchNormLayer<T>>(prefix + ".bn", c.out_channels));
  if (c.relu) seq->add(std::make_unique<ReluLayer<T>>(prefix + ".relu"));
  if (c.ssa) seq->add(std::make_unique<SsaLayer<T>>(prefix + ".ssa", c.shift_cap));
  return seq;
}

}  // namespace

template <typename T>
std::unique_ptr<ResidualBlock<T>> build_ssa_block(const BlockSpec& b, const std::string& name) {
  b.validate();
  if (b.variant != Variant::Ssa) {
    throw SpecError(name + ": 3D-reference blocks support parameter counting only");
  }
  auto residual = std::make_unique<Sequential<T>>(name + ".residual");
  if (b.kind == BlockKind::Basic) {
    add_conv_unit<T>(*residual, name, "1", b.channels_in, b.channels_out, b.k, b.stride, 1, true, &b.ssa);
    add_conv_unit<T>(*residual, name, "2", b.channels_out, b.channels_out, b.k, 1, 1, false, &b.ssa);
  } else {
    const std::size_t mid = b.mid();
    add_conv_unit<T>(*residual, name, "1", b.channels_in, mid, 1, 1, 1, true, nullptr);
    add_conv_unit<T>(*residual, name, "2", mid, mid, b.k, b.stride, b.cardinality(), true, &b.ssa);
    add_conv_unit<T>(*residual, name, "3", mid, b.channels_out, 1, 1, 1, false, nullptr);
  }
  auto shortcut = std::make_unique<Sequential<T>>(name + ".shortcut");
  if (b.has_projection()) {
    shortcut->add(std::make_unique<Conv2dLayer<T>>(name + ".shortcut.conv", b.channels_in,
                                                   b.channels_out, 1,
                                                   Conv2dGeometry{b.stride, 0, 1}, false));
    shortcut->add(std::make_unique<BatchNormLayer<T>>(name + ".shortcut.bn", b.channels_out));
  }
  LayerPtr<T> pool;
  if (b.pools_temporally()) pool = std::make_unique<TemporalPoolLayer<T>>(name + ".tpool", 2, 2);
  return std::make_unique<ResidualBlock<T>>(name, std::move(residual), std::move(shortcut),
                                            std::move(pool));
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.variant != Variant::Ssa) {
    throw SpecError(spec_.name + ": 3D-reference networks support parameter counting only");
  }
  const std::vector<Shape5> shapes = infer_shapes(spec_);
  std::size_t conv_i = 0, block_i = 0, pool_i = 0, tpool_i = 0;
  std::size_t channels = spec_.input.c;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    if (const auto* c = std::get_if<ConvLayerSpec>(&layer)) {
      body_.push_back(build_conv_layer<T>(*c, channels, "conv" + std::to_string(++conv_i)));
    } else if (const auto* p = std::get_if<MaxPoolLayerSpec>(&layer)) {
      body_.push_back(std::make_unique<MaxPool3dLayer<T>>("maxpool" + std::to_string(++pool_i), p->pool));
    } else if (const auto* t = std::get_if<TemporalPoolLayerSpec>(&layer)) {
      body_.push_back(std::make_unique<TemporalPoolLayer<T>>("tpool" + std::to_string(++tpool_i),
                                                             t->kernel, t->stride));
    } else {
      BlockSpec b = std::get<BlockSpec>(layer);
      b.variant = spec_.variant;
      body_.push_back(build_ssa_block<T>(b, "block" + std::to_string(++block_i)));
    }
    channels = shapes[i].c;
  }
  const Shape5 last = shapes.empty() ? spec_.input : shapes.back();
  std::size_t features = spec_.head.pooling == HeadSpec::Pooling::Flatten
                             ? last.c * last.f * last.h * last.w
                             : last.c;
  hidden_.reserve(spec_.head.hidden.size());
  for (std::size_t i = 0; i < spec_.head.hidden.size(); ++i) {
    hidden_.emplace_back("head.hidden" + std::to_string(i + 1), features, spec_.head.hidden[i]);
    features = spec_.head.hidden[i];
  }
  classifier_ = std::make_unique<LinearLayer<T>>("head.classifier", features, spec_.head.classes);

  for (auto& layer : body_) layer->collect(refs_);
  for (auto& h : hidden_) h.collect(refs_);
  classifier_->collect(refs_);
  initialize(seed);
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : body_) layer->initialize(rng);
  for (auto& h : hidden_) h.initialize(rng);
  classifier_->initialize(rng);
  zero_grad();
}

template <typename T>
Matrix<T> Network<T>::forward(const FeatureMap<T>& x, Mode mode) {
  Shape5 expected = spec_.input;
  expected.n = x.shape().n;
  if (x.shape() != expected) {
    throw DimensionError(spec_.name + " expects input " + expected.str() + ", got " + x.shape().str());
  }
  FeatureMap<T> y = x;
  for (auto& layer : body_) y = layer->forward(y, mode);
  features_ = std::move(y);
  Matrix<T> h = spec_.head.pooling == HeadSpec::Pooling::Flatten ? flatten(features_)
                                                                  : global_avg_pool(features_);
  hidden_pre_.clear();
  for (auto& layer : hidden_) {
    Matrix<T> pre = layer.forward(h);
    FeatureMap<T> pre_map(Shape5{pre.rows(), pre.cols(), 1, 1, 1},
                          std::vector<T>(pre.data().begin(), pre.data().end()));
    const FeatureMap<T> act = relu(pre_map);
    hidden_pre_.push_back(std::move(pre_map));
    h = Matrix<T>(pre.rows(), pre.cols(), std::vector<T>(act.data().begin(), act.data().end()));
  }
  return classifier_->forward(h);
}

template <typename T>
FeatureMap<T> Network<T>::backward(const Matrix<T>& grad_logits) {
  Matrix<T> g = classifier_->backward(grad_logits);
  for (std::size_t i = hidden_.size(); i-- > 0;) {
    const FeatureMap<T>& pre = hidden_pre_.at(i);
    FeatureMap<T> g_map(pre.shape(), std::vector<T>(g.data().begin(), g.data().end()));
    const FeatureMap<T> g_pre = relu_backward(pre, g_map);
    g = hidden_[i].backward(
        Matrix<T>(g.rows(), g.cols(), std::vector<T>(g_pre.data().begin(), g_pre.data().end())));
  }
  FeatureMap<T> grad = spec_.head.pooling == HeadSpec::Pooling::Flatten
                           ? unflatten(features_.shape(), g)
                           : global_avg_pool_backward(features_.shape(), g);
  for (std::size_t i = body_.size(); i-- > 0;) grad = body_[i]->backward(grad);
  return grad;
}

template <typename T>
std::uint64_t Network<T>::branch_hash() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const auto& layer : body_) hash = layer->branch_hash(hash);
  for (const auto& pre : hidden_pre_) hash = sign_hash(hash, pre);
  return hash;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : refs_.params) p->zero_grad();
}

template <typename T>
std::size_t Network<T>::param_count() const {
  std::size_t total = 0;
  for (const auto* p : refs_.params) total += p->value.size();
  return total;
}

template class Network<float>;
template class Network<double>;
template std::unique_ptr<ResidualBlock<float>> build_ssa_block<float>(const BlockSpec&, const std::string&);
template std::unique_ptr<ResidualBlock<double>> build_ssa_block<double>(const BlockSpec&, const std::string&);

}  // namespace ssa
