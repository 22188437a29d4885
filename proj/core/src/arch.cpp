#include "ssa/arch.hpp"

#include <array>
#include <functional>
#include <sstream>

#include "ssa/errors.hpp"

namespace ssa {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using Emit = std::function<void(const std::string& layer, const std::string& kind,
                                const ParamBreakdown& params)>;

std::string kernel_label(std::size_t k, bool three_d) {
  const std::string kk = std::to_string(k);
  return three_d ? "conv3d " + kk + "x" + kk + "x" + kk : "conv2d 1x" + kk + "x" + kk;
}

void emit_conv(const Emit& emit, const std::string& name, std::size_t in, std::size_t out,
               std::size_t k, std::size_t groups, bool bias, bool three_d) {
  ParamBreakdown p;
  const std::size_t weights = out * (in / groups) * k * k * (three_d ? k : 1);
  (k > 1 ? p.spatial_kernels : p.pointwise) = weights;
  if (bias) p.bias = out;
  std::string kind = kernel_label(k, three_d);
  if (groups > 1) kind += " g" + std::to_string(groups);
  emit(name, kind, p);
}

void emit_bn(const Emit& emit, const std::string& name, std::size_t c) {
  ParamBreakdown p;
  p.batch_norm = 2 * c;
  emit(name, "batch_norm", p);
}

void walk_block(const BlockSpec& b, const std::string& prefix, const Emit& emit) {
  const bool three_d = b.variant == Variant::Conv3dReference;
  const bool ssa = b.variant == Variant::Ssa;
  const std::string ssa_kind = "ssa (cap " + b.ssa.str() + ")";
  if (b.pools_temporally()) emit(prefix + ".tpool", "temporal_max_pool k2 s2", {});
  if (b.kind == BlockKind::Basic) {
    emit_conv(emit, prefix + ".conv1", b.channels_in, b.channels_out, b.k, 1, false, three_d);
    emit_bn(emit, prefix + ".bn1", b.channels_out);
    emit(prefix + ".relu1", "relu", {});
    if (ssa) emit(prefix + ".ssa1", ssa_kind, {});
    emit_conv(emit, prefix + ".conv2", b.channels_out, b.channels_out, b.k, 1, false, three_d);
    emit_bn(emit, prefix + ".bn2", b.channels_out);
    if (ssa) emit(prefix + ".ssa2", ssa_kind, {});
  } else {
    const std::size_t mid = b.mid();
    emit_conv(emit, prefix + ".conv1", b.channels_in, mid, 1, 1, false, three_d);
    emit_bn(emit, prefix + ".bn1", mid);
    emit(prefix + ".relu1", "relu", {});
    emit_conv(emit, prefix + ".conv2", mid, mid, b.k, b.cardinality(), false, three_d);
    emit_bn(emit, prefix + ".bn2", mid);
    emit(prefix + ".relu2", "relu", {});
    if (ssa) emit(prefix + ".ssa2", ssa_kind, {});
    emit_conv(emit, prefix + ".conv3", mid, b.channels_out, 1, 1, false, three_d);
    emit_bn(emit, prefix + ".bn3", b.channels_out);
  }
  if (b.has_projection()) {
    emit_conv(emit, prefix + ".shortcut.conv", b.channels_in, b.channels_out, 1, 1, false, three_d);
    emit_bn(emit, prefix + ".shortcut.bn", b.channels_out);
  }
  emit(prefix + ".relu", "relu", {});
}

void walk_network(const NetworkSpec& spec, const Emit& emit) {
  const std::vector<Shape5> shapes = infer_shapes(spec);
  const bool three_d = spec.variant == Variant::Conv3dReference;
  std::size_t conv_i = 0, block_i = 0, pool_i = 0, tpool_i = 0;
  Shape5 current = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    std::visit(
        Overloaded{
            [&](const ConvLayerSpec& c) {
              const std::string prefix = "conv" + std::to_string(++conv_i);
              emit_conv(emit, prefix + ".conv", current.c, c.out_channels, c.k, 1, c.bias,
                        three_d && !c.planar);
              if (c.batch_norm) emit_bn(emit, prefix + ".bn", c.out_channels);
              if (c.relu) emit(prefix + ".relu", "relu", {});
              if (c.ssa && !three_d) emit(prefix + ".ssa", "ssa (cap " + c.shift_cap.str() + ")", {});
            },
            [&](const MaxPoolLayerSpec&) {
              emit("maxpool" + std::to_string(++pool_i), "max_pool3d", {});
            },
            [&](const TemporalPoolLayerSpec&) {
              emit("tpool" + std::to_string(++tpool_i), "temporal_max_pool", {});
            },
            [&](const BlockSpec& b) {
              BlockSpec tagged = b;
              tagged.variant = spec.variant;
              walk_block(tagged, "block" + std::to_string(++block_i), emit);
            },
        },
        spec.layers[i]);
    current = shapes[i];
  }
  const bool flatten = spec.head.pooling == HeadSpec::Pooling::Flatten;
  emit("head.pool", flatten ? "flatten" : "global_avg_pool", {});
  std::size_t features = flatten ? current.c * current.f * current.h * current.w : current.c;
  for (std::size_t i = 0; i < spec.head.hidden.size(); ++i) {
    ParamBreakdown p;
    p.linear = features * spec.head.hidden[i] + spec.head.hidden[i];
    emit("head.hidden" + std::to_string(i + 1), "linear+relu", p);
    features = spec.head.hidden[i];
  }
  ParamBreakdown p;
  p.linear = features * spec.head.classes + spec.head.classes;
  emit("head.classifier", "linear", p);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Variant v) { return v == Variant::Ssa ? "ssa" : "conv3d"; }

std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::Basic: return "basic";
    case BlockKind::Bottleneck: return "bottleneck";
    case BlockKind::ResNeXtBottleneck: return "resnext";
  }
  return "?";
}

std::size_t BlockSpec::mid() const {
  if (mid_channels != 0) return mid_channels;
  switch (kind) {
    case BlockKind::Basic: return channels_out;
    case BlockKind::Bottleneck: return channels_out / 4;
    case BlockKind::ResNeXtBottleneck: return channels_out / 2;
  }
  return channels_out;
}

void BlockSpec::validate() const {
  const std::string where = to_string(kind) + " block " + std::to_string(channels_in) + "->" +
                            std::to_string(channels_out);
  if (channels_in == 0 || channels_out == 0) throw SpecError(where + ": channel counts must be positive");
  if (k == 0 || k % 2 == 0) throw SpecError(where + ": kernel size must be odd, got " + std::to_string(k));
  if (stride == 0) throw SpecError(where + ": stride must be positive");
  if (kind != BlockKind::Basic) {
    if (mid() == 0) throw SpecError(where + ": bottleneck width is zero");
    if (kind == BlockKind::ResNeXtBottleneck && (groups == 0 || mid() % groups != 0)) {
      throw SpecError(where + ": cardinality " + std::to_string(groups) +
                      " must divide bottleneck width " + std::to_string(mid()));
    }
  }
}

void NetworkSpec::set_shift_cap(const SsaConfig& cfg) {
  for (auto& layer : layers) {
    if (auto* b = std::get_if<BlockSpec>(&layer)) b->ssa = cfg;
    if (auto* c = std::get_if<ConvLayerSpec>(&layer)) c->shift_cap = cfg;
  }
}

void NetworkSpec::sync_variant() {
  for (auto& layer : layers) {
    if (auto* b = std::get_if<BlockSpec>(&layer)) b->variant = variant;
  }
}

Shape5 block_output_shape(const BlockSpec& b, const Shape5& in) {
  b.validate();
  if (in.c != b.channels_in) {
    throw SpecError(to_string(b.kind) + " block expects " + std::to_string(b.channels_in) +
                    " input channels, previous layer produces " + std::to_string(in.c));
  }
  Shape5 s = in;
  if (b.pools_temporally()) s = temporal_pool_output_shape(s, TemporalPoolSpec{2, 2});
  const std::size_t pad = b.k / 2;
  if (s.h + 2 * pad < b.k || s.w + 2 * pad < b.k) {
    throw DimensionError("block kernel " + std::to_string(b.k) + " exceeds input " + in.str());
  }
  s.h = (s.h + 2 * pad - b.k) / b.stride + 1;
  s.w = (s.w + 2 * pad - b.k) / b.stride + 1;
  s.c = b.channels_out;
  return s;
}

std::vector<Shape5> infer_shapes(const NetworkSpec& spec, std::size_t batch) {
  Shape5 s = spec.input;
  s.n = batch;
  std::vector<Shape5> shapes;
  shapes.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      s = std::visit(
          Overloaded{
              [&](const ConvLayerSpec& c) {
                if (c.out_channels == 0) throw SpecError("conv layer with zero output channels");
                return conv2d_output_shape(s, Shape5{c.out_channels, s.c, 1, c.k, c.k},
                                           Conv2dGeometry{c.stride, c.padding, 1});
              },
              [&](const MaxPoolLayerSpec& p) { return max_pool3d_output_shape(s, p.pool); },
              [&](const TemporalPoolLayerSpec& p) {
                return temporal_pool_output_shape(
                    s, TemporalPoolSpec{p.kernel == 0 ? s.f : p.kernel, p.stride});
              },
              [&](const BlockSpec& b) { return block_output_shape(b, s); },
          },
          spec.layers[i]);
    } catch (const DimensionError& e) {
      throw SpecError("layer " + std::to_string(i + 1) + " of " + spec.name +
                      ": shapes do not compose: " + e.what());
    }
    shapes.push_back(s);
  }
  return shapes;
}

void NetworkSpec::validate() const {
  if (input.c == 0 || input.f == 0 || input.h == 0 || input.w == 0) {
    throw SpecError(name + ": input extents must be positive");
  }
  if (head.classes == 0) throw SpecError(name + ": head needs at least one class");
  for (std::size_t width : head.hidden) {
    if (width == 0) throw SpecError(name + ": hidden layer width must be positive");
  }
  for (const auto& layer : layers) {
    if (const auto* b = std::get_if<BlockSpec>(&layer)) b->validate();
  }
  infer_shapes(*this);
}

ParamBreakdown& ParamBreakdown::operator+=(const ParamBreakdown& o) {
  spatial_kernels += o.spatial_kernels;
  pointwise += o.pointwise;
  bias += o.bias;
  batch_norm += o.batch_norm;
  linear += o.linear;
  return *this;
}

ParamBreakdown param_count(const BlockSpec& block) {
  block.validate();
  ParamBreakdown total;
  walk_block(block, "block", [&](const std::string&, const std::string&, const ParamBreakdown& p) {
    total += p;
  });
  return total;
}

ParamBreakdown param_count(const NetworkSpec& spec) {
  spec.validate();
  ParamBreakdown total;
  walk_network(spec, [&](const std::string&, const std::string&, const ParamBreakdown& p) {
    total += p;
  });
  return total;
}

std::vector<ParamRow> param_table(const NetworkSpec& spec) {
  spec.validate();
  std::vector<ParamRow> rows;
  walk_network(spec, [&](const std::string& layer, const std::string& kind, const ParamBreakdown& p) {
    rows.push_back(ParamRow{layer, kind, p.total()});
  });
  return rows;
}

std::size_t kernel_param_count(std::size_t channels_in, std::size_t channels_out, std::size_t k,
                               Variant variant) {
  return channels_in * channels_out * k * k * (variant == Variant::Conv3dReference ? k : 1);
}

// ---------------------------------------------------------------------------
// Named architectures
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kVideoClasses = 101;

struct ResidualPlan {
  BlockKind kind;
  std::array<std::size_t, 4> blocks;
  std::array<std::size_t, 4> planes;
  std::size_t expansion;
  std::size_t cardinality = 1;
};

// Kinetics-style 3D residual network: 7x7 stem (spatial stride 2), 3x3x3
// max pool with stride 2, four stages with stride 2 at the start of stages 2-4.
NetworkSpec residual_network(std::string name, Variant variant, const ResidualPlan& plan) {
  NetworkSpec spec;
  spec.name = std::move(name);
  spec.variant = variant;
  spec.input = Shape5{1, 3, 16, 112, 112};
  spec.layers.push_back(ConvLayerSpec{64, 7, 2, 3, false, true, true, true, false});
  spec.layers.push_back(MaxPoolLayerSpec{MaxPool3dSpec{{3, 3, 3}, {2, 2, 2}, {1, 1, 1}}});
  std::size_t in = 64;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    for (std::size_t b = 0; b < plan.blocks[stage]; ++b) {
      BlockSpec block;
      block.kind = plan.kind;
      block.variant = variant;
      block.k = 3;
      block.channels_in = in;
      block.channels_out = plan.planes[stage] * plan.expansion;
      block.mid_channels = plan.kind == BlockKind::Basic ? 0 : plan.planes[stage];
      block.groups = plan.cardinality;
      block.stride = (stage > 0 && b == 0) ? 2 : 1;
      block.temporal_pool_here = true;
      spec.layers.emplace_back(block);
      in = block.channels_out;
    }
  }
  spec.head = HeadSpec{HeadSpec::Pooling::GlobalAverage, {}, kVideoClasses};
  return spec;
}

NetworkSpec resnext8(Variant variant) {
  NetworkSpec spec;
  spec.name = variant == Variant::Ssa ? "ssa_resnext8" : "resnext8_3d_ref";
  spec.variant = variant;
  spec.input = Shape5{1, 1, 32, 32, 32};
  // Conv2D(3,1): a genuinely 2D 1x3x3 kernel with BN and ReLU, no SSA.
  spec.layers.push_back(ConvLayerSpec{64, 3, 1, 1, false, true, true, false, true});
  spec.layers.push_back(MaxPoolLayerSpec{MaxPool3dSpec{{3, 3, 3}, {2, 2, 2}, {1, 1, 1}}});
  struct Stage {
    std::size_t in, out, stride;
  };
  const std::array<Stage, 6> plan{
      {{64, 256, 1}, {256, 256, 1}, {256, 512, 2}, {512, 512, 1}, {512, 1024, 2}, {1024, 1024, 1}}};
  for (const Stage& st : plan) {
    BlockSpec block;
    block.kind = BlockKind::ResNeXtBottleneck;
    block.variant = variant;
    block.k = 3;
    block.channels_in = st.in;
    block.channels_out = st.out;
    block.groups = 32;
    block.stride = st.stride;
    spec.layers.emplace_back(block);
  }
  spec.head = HeadSpec{HeadSpec::Pooling::GlobalAverage, {}, 40};
  return spec;
}

// Five-layer C3D: 64-128-256-256-256 channels, 3x3x3 kernels with bias and
// ReLU, pools (1,2,2) then (2,2,2), two 2048-wide fully connected layers.
NetworkSpec c3d(Variant variant) {
  NetworkSpec spec;
  spec.name = variant == Variant::Ssa ? "ssa_c3d" : "c3d_3d_ref";
  spec.variant = variant;
  spec.input = Shape5{1, 3, 16, 112, 112};
  const std::array<std::size_t, 5> widths{64, 128, 256, 256, 256};
  for (std::size_t i = 0; i < widths.size(); ++i) {
    spec.layers.push_back(ConvLayerSpec{widths[i], 3, 1, 1, true, false, true, true, false});
    MaxPool3dSpec pool;
    if (i == 0) {
      pool = MaxPool3dSpec{{1, 2, 2}, {1, 2, 2}, {0, 0, 0}};
    } else if (i + 1 == widths.size()) {
      pool = MaxPool3dSpec{{2, 2, 2}, {2, 2, 2}, {0, 1, 1}};
    } else {
      pool = MaxPool3dSpec{{2, 2, 2}, {2, 2, 2}, {0, 0, 0}};
    }
    spec.layers.push_back(MaxPoolLayerSpec{pool});
  }
  spec.head = HeadSpec{HeadSpec::Pooling::Flatten, {2048, 2048}, kVideoClasses};
  return spec;
}

struct NamedPlan {
  const char* family;
  ResidualPlan plan;
};

const std::array<NamedPlan, 4>& residual_plans() {
  static const std::array<NamedPlan, 4> plans{{
      {"resnet18", {BlockKind::Basic, {2, 2, 2, 2}, {64, 128, 256, 512}, 1}},
      {"resnet101", {BlockKind::Bottleneck, {3, 4, 23, 3}, {64, 128, 256, 512}, 4}},
      {"resnext50", {BlockKind::ResNeXtBottleneck, {3, 4, 6, 3}, {128, 256, 512, 1024}, 2, 32}},
      {"wideresnet50", {BlockKind::Bottleneck, {3, 4, 6, 3}, {128, 256, 512, 1024}, 2}},
  }};
  return plans;
}

}  // namespace

NetworkSpec toy_ssa_net(const ToyNetOptions& options) {
  if (options.widths.empty()) throw SpecError("toy_ssa_net needs at least one block width");
  NetworkSpec spec;
  spec.name = "toy_ssa_net";
  spec.input = options.input;
  ConvLayerSpec stem;
  stem.out_channels = options.widths.front();
  stem.shift_cap = options.ssa;
  spec.layers.emplace_back(stem);
  std::size_t in = stem.out_channels;
  for (std::size_t i = 0; i < options.widths.size(); ++i) {
    BlockSpec block;
    block.kind = BlockKind::Basic;
    block.channels_in = in;
    block.channels_out = options.widths[i];
    block.stride = i == 0 ? 1 : 2;
    block.temporal_pool_here = false;
    block.ssa = options.ssa;
    spec.layers.emplace_back(block);
    in = options.widths[i];
  }
  spec.layers.push_back(TemporalPoolLayerSpec{0, 1});
  spec.head = HeadSpec{HeadSpec::Pooling::GlobalAverage, {}, options.classes};
  return spec;
}

NetworkSpec architecture(std::string_view name) {
  if (name == "toy_ssa_net") return toy_ssa_net();
  if (name == "ssa_resnext8") return resnext8(Variant::Ssa);
  if (name == "resnext8_3d_ref") return resnext8(Variant::Conv3dReference);
  if (name == "ssa_c3d") return c3d(Variant::Ssa);
  if (name == "c3d_3d_ref") return c3d(Variant::Conv3dReference);
  for (const auto& [family, plan] : residual_plans()) {
    if (name == std::string("ssa_") + family) return residual_network(std::string(name), Variant::Ssa, plan);
    if (name == std::string(family) + "_3d_ref") {
      return residual_network(std::string(name), Variant::Conv3dReference, plan);
    }
  }
  throw SpecError("unknown architecture \"" + std::string(name) + "\"");
}

std::vector<std::string> architecture_names() {
  std::vector<std::string> names{"toy_ssa_net", "ssa_resnext8", "resnext8_3d_ref", "ssa_c3d",
                                 "c3d_3d_ref"};
  for (const auto& [family, plan] : residual_plans()) {
    names.push_back(std::string("ssa_") + family);
    names.push_back(std::string(family) + "_3d_ref");
  }
  return names;
}

}  // namespace ssa
