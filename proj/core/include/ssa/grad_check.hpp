#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssa/network.hpp"
#include "ssa/rng.hpp"

namespace ssa {

struct GradCheckOptions {
  double epsilon = 1e-4;
  /// Entries probed per parameter group; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 1;
  /// Without a branch probe, an entry is treated as sitting on a kink and
  /// skipped when its one-sided differences disagree by more than this
  /// fraction of their magnitude.
  double kink_tolerance = 0.05;
};

struct GroupReport {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GroupReport> groups;

  double max_rel_error() const;
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
  std::string table() const;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Identifies the piecewise-smooth branch of the latest loss evaluation.
using BranchProbe = std::function<std::uint64_t()>;

/// Compares `analytic` against central differences of `loss` while
/// perturbing `values` in place (restored afterwards). With a `branch`
/// probe, an entry is skipped as a kink exactly when the branch at
/// theta +- epsilon differs from the branch at theta.
GroupReport check_gradient(const std::string& name, std::span<double> values,
                           std::span<const double> analytic, const std::function<double()>& loss,
                           const GradCheckOptions& options, const BranchProbe& branch = {});

/// Checks d/dx <op(x), r> against backward(r) for a fixed random projection r.
GroupReport check_op(const std::string& name, FeatureMap<double> x,
                     const std::function<FeatureMap<double>(const FeatureMap<double>&)>& forward,
                     const std::function<FeatureMap<double>(const FeatureMap<double>&)>& backward,
                     const GradCheckOptions& options);

// Checks of each operation on a random 64-bit instance drawn from `rng`.
// Every group reports input gradients plus weight, bias, scale or shift
// gradients where the operation has them.
GradCheckReport grad_check_ssa(Rng& rng, const GradCheckOptions& options,
                               const SsaConfig& cfg = SsaConfig::all_shifts());
GradCheckReport grad_check_conv(Rng& rng, const GradCheckOptions& options);
GradCheckReport grad_check_batch_norm(Rng& rng, const GradCheckOptions& options);
GradCheckReport grad_check_linear(Rng& rng, const GradCheckOptions& options);
/// Temporal max pooling and 3D max pooling.
GradCheckReport grad_check_pool(Rng& rng, const GradCheckOptions& options);

/// Every parameter group of the network plus the input, for the
/// training-mode cross-entropy loss on (x, labels).
GradCheckReport grad_check_network(Network<double>& network, const FeatureMap<double>& x,
                                   std::span<const std::uint32_t> labels,
                                   const GradCheckOptions& options);

}  // namespace ssa
