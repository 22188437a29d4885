#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "ssa/tensor.hpp"

namespace ssa {

/// Shift cap of the temporal-difference layer.
///
/// `all_shifts()` uses every shift distance 1..f-1; `fixed(S)` keeps only
/// distances d <= S. The effective number of shifts seen by frame i (1-based)
/// is min(cap, i - 1), and `fixed(0)` turns the layer into the identity.
class SsaConfig {
 public:
  static SsaConfig all_shifts() { return SsaConfig(); }
  static SsaConfig fixed(std::size_t cap) { return SsaConfig(cap); }
  /// Parses "all" or a non-negative integer.
  static SsaConfig parse(const std::string& text);

  bool is_all() const { return !cap_.has_value(); }
  std::optional<std::size_t> cap() const { return cap_; }
  /// Largest shift distance used on a tensor of temporal depth f.
  std::size_t max_shift(std::size_t f) const;
  std::string str() const;

  bool operator==(const SsaConfig&) const = default;

 private:
  SsaConfig() = default;
  explicit SsaConfig(std::size_t cap) : cap_(cap) {}
  std::optional<std::size_t> cap_;
};

/// Weight of a temporal difference at shift distance d in a depth-f tensor:
/// (f - d) / f^2. Nearer frames weigh more; the 1/f factors always use the
/// full input depth, also under a shift cap.
struct SsaWeightRule {
  static double weight(std::size_t d, std::size_t f) {
    const double depth = static_cast<double>(f);
    return (depth - static_cast<double>(d)) / (depth * depth);
  }
};

/// Literal per-frame evaluation:
///   out[i] = x[i] + (1/f) * sum_{k = i-S}^{i-1} ((f - (i - k)) / f) * (x[i] - x[k]),
/// with out[1] = x[1]. O(f * S) per fiber with an inner loop per frame; kept
/// as the test oracle for the cumulative path.
template <typename T>
FeatureMap<T> ssa_forward_reference(const FeatureMap<T>& x, const SsaConfig& cfg);

/// Shift-accumulate evaluation: one pass per shift distance d adds
/// weight(d, f) * (x[i] - x[i-d]) to every frame i > d. Production path.
template <typename T>
FeatureMap<T> ssa_forward_cumulative(const FeatureMap<T>& x, const SsaConfig& cfg);

template <typename T>
FeatureMap<T> ssa_forward(const FeatureMap<T>& x, const SsaConfig& cfg) {
  return ssa_forward_cumulative(x, cfg);
}

/// Transpose of the (input-independent) linear map applied by the forward pass.
template <typename T>
FeatureMap<T> ssa_backward(const FeatureMap<T>& grad_out, const SsaConfig& cfg);

/// The layer has no trainable parameters.
inline constexpr std::size_t ssa_param_count() { return 0; }

}  // namespace ssa
