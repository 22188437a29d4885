#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ssa/ops.hpp"
#include "ssa/ssa_layer.hpp"
#include "ssa/tensor.hpp"

namespace ssa {

/// SSA networks run; 3D-reference networks exist for parameter counting and
/// replace every k x k kernel by a k x k x k one.
enum class Variant { Ssa, Conv3dReference };

enum class BlockKind { Basic, Bottleneck, ResNeXtBottleneck };

/// conv -> [batch norm] -> [relu] -> [SSA] unit used for stems and plain
/// convolutional stacks such as C3D.
struct ConvLayerSpec {
  std::size_t out_channels = 64;
  std::size_t k = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  bool bias = false;
  bool batch_norm = true;
  bool relu = true;
  bool ssa = true;
  /// Stays 1 x k x k in the 3D reference too (a genuinely 2D layer).
  bool planar = false;
  SsaConfig shift_cap = SsaConfig::all_shifts();

  bool operator==(const ConvLayerSpec&) const = default;
};

struct MaxPoolLayerSpec {
  MaxPool3dSpec pool;

  bool operator==(const MaxPoolLayerSpec&) const = default;
};

/// Temporal max pooling; kernel 0 means the full temporal depth.
struct TemporalPoolLayerSpec {
  std::size_t kernel = 2;
  std::size_t stride = 2;

  bool operator==(const TemporalPoolLayerSpec&) const = default;
};

/// One residual block in which every k x k x k kernel of the original 3D
/// block is a framewise k x k convolution followed by an SSA layer.
///
/// Sub-pipelines run conv -> BN -> ReLU -> SSA; the last sub-pipeline skips
/// the ReLU, which is applied after the residual addition instead. When
/// stride > 1 and `temporal_pool_here` is set, a (kernel 2, stride 2)
/// temporal max pool runs at block entry and feeds both paths.
struct BlockSpec {
  BlockKind kind = BlockKind::Basic;
  Variant variant = Variant::Ssa;
  std::size_t k = 3;
  std::size_t channels_in = 64;
  std::size_t channels_out = 64;
  /// Bottleneck width; 0 picks the default (out/4 Bottleneck, out/2 ResNeXt).
  std::size_t mid_channels = 0;
  /// Cardinality of the grouped k x k convolution (ResNeXt only).
  std::size_t groups = 32;
  std::size_t stride = 1;
  SsaConfig ssa = SsaConfig::all_shifts();
  bool temporal_pool_here = true;

  std::size_t mid() const;
  std::size_t cardinality() const { return kind == BlockKind::ResNeXtBottleneck ? groups : 1; }
  bool has_projection() const { return channels_in != channels_out || stride != 1; }
  bool pools_temporally() const { return temporal_pool_here && stride > 1; }
  /// Throws SpecError when channel or group arithmetic is inconsistent.
  void validate() const;

  bool operator==(const BlockSpec&) const = default;
};

using LayerSpec = std::variant<ConvLayerSpec, MaxPoolLayerSpec, TemporalPoolLayerSpec, BlockSpec>;

struct HeadSpec {
  enum class Pooling { GlobalAverage, Flatten };
  Pooling pooling = Pooling::GlobalAverage;
  /// Hidden fully connected widths, each followed by ReLU.
  std::vector<std::size_t> hidden;
  std::size_t classes = 10;

  bool operator==(const HeadSpec&) const = default;
};

struct NetworkSpec {
  std::string name = "custom";
  Variant variant = Variant::Ssa;
  /// Per-sample input (n is ignored).
  Shape5 input{1, 1, 8, 16, 16};
  std::vector<LayerSpec> layers;
  HeadSpec head;

  /// Sets the shift cap of every SSA layer (blocks and conv units).
  void set_shift_cap(const SsaConfig& cfg);
  /// Re-tags every block with the network variant.
  void sync_variant();
  /// Checks every block and that shapes compose through the head.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Output shape after each entry of `spec.layers` for a batch of `batch`.
std::vector<Shape5> infer_shapes(const NetworkSpec& spec, std::size_t batch = 1);
Shape5 block_output_shape(const BlockSpec& block, const Shape5& input);

// ---------------------------------------------------------------------------
// Parameter counting
// ---------------------------------------------------------------------------

/// Trainable scalars by category. SSA and pooling layers contribute nothing.
struct ParamBreakdown {
  std::size_t spatial_kernels = 0;  // weights of k x k (or k x k x k) kernels, k > 1
  std::size_t pointwise = 0;        // weights of 1 x 1 (x 1) kernels
  std::size_t bias = 0;
  std::size_t batch_norm = 0;
  std::size_t linear = 0;  // fully connected weights and biases

  std::size_t conv_weights() const { return spatial_kernels + pointwise; }
  std::size_t total() const { return spatial_kernels + pointwise + bias + batch_norm + linear; }
  ParamBreakdown& operator+=(const ParamBreakdown& o);
};

/// One row of a per-layer parameter table.
struct ParamRow {
  std::string layer;
  std::string kind;
  std::size_t params = 0;
};

ParamBreakdown param_count(const BlockSpec& block);
ParamBreakdown param_count(const NetworkSpec& spec);
/// Per-layer rows; names match the parameter names of a built network.
std::vector<ParamRow> param_table(const NetworkSpec& spec);

/// Weights of a single kernel with c_in = c_out = channels: channels^2 k^2
/// for the framewise kernel, channels^2 k^3 for the 3D one.
std::size_t kernel_param_count(std::size_t channels_in, std::size_t channels_out, std::size_t k,
                               Variant variant);

// ---------------------------------------------------------------------------
// Named architectures
// ---------------------------------------------------------------------------

/// Known names: toy_ssa_net, ssa_resnext8, ssa_resnet18, ssa_resnet101,
/// ssa_resnext50, ssa_wideresnet50, ssa_c3d and a `*_3d_ref` counterpart of
/// each ResNet/ResNeXt/WideResNet/C3D entry (e.g. resnet18_3d_ref).
NetworkSpec architecture(std::string_view name);
std::vector<std::string> architecture_names();

struct ToyNetOptions {
  std::size_t classes = 4;
  Shape5 input{1, 1, 8, 16, 16};
  std::vector<std::size_t> widths{8, 16, 32};
  SsaConfig ssa = SsaConfig::all_shifts();
};

/// A 3x3 conv unit (BN, ReLU, SSA) lifting the input to widths[0] channels,
/// one Basic SSA block per width (spatial stride 1, 2, 2, ...; no temporal
/// pooling), full-depth temporal max pooling, global average pooling and a
/// linear head.
NetworkSpec toy_ssa_net(const ToyNetOptions& options = {});

// ---------------------------------------------------------------------------
// key=value architecture files
// ---------------------------------------------------------------------------

NetworkSpec parse_network_spec(std::istream& in);
NetworkSpec parse_network_spec(const std::string& text);
NetworkSpec load_network_spec(const std::string& path);
std::string format_network_spec(const NetworkSpec& spec);

std::string to_string(Variant v);
std::string to_string(BlockKind k);

}  // namespace ssa
