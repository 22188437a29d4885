#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "ssa/ops.hpp"
#include "ssa/ssa_layer.hpp"
#include "ssa/tensor_io.hpp"

using namespace ssa;

namespace {

std::filesystem::path golden(const std::string& name) {
  const char* env = std::getenv("SSA_GOLDEN_DIR");
  return std::filesystem::path(env && *env ? env : SSA_GOLDEN_DEFAULT_DIR) / name;
}

template <typename T>
double worst(const FeatureMap<T>& a, const FeatureMap<double>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double w = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double d = std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
    w = std::max(w, d / std::max(std::abs(b.data()[i]), 1.0));
  }
  return w;
}

}  // namespace

TEST(Golden, SsaAllShifts) {
  const auto x = load_ssat<double>(golden("ssa_input.ssat"));
  const auto y = load_ssat<double>(golden("ssa_all_output.ssat"));
  EXPECT_LT(worst(ssa_forward_reference(x, SsaConfig::all_shifts()), y), 1e-13);
  EXPECT_LT(worst(ssa_forward_cumulative(x, SsaConfig::all_shifts()), y), 1e-13);
  const auto xf = load_ssat<float>(golden("ssa_input.ssat"));
  EXPECT_LT(worst(ssa_forward(xf, SsaConfig::all_shifts()), y), 1e-5);
}

TEST(Golden, SsaShiftCapTwo) {
  const auto x = load_ssat<double>(golden("ssa_input.ssat"));
  const auto y = load_ssat<double>(golden("ssa_cap2_output.ssat"));
  EXPECT_LT(worst(ssa_forward_reference(x, SsaConfig::fixed(2)), y), 1e-13);
  EXPECT_LT(worst(ssa_forward_cumulative(x, SsaConfig::fixed(2)), y), 1e-13);
}

TEST(Golden, GroupedStridedConv) {
  const auto x = load_ssat<double>(golden("conv_input.ssat"));
  const auto w = load_ssat<double>(golden("conv_weight.ssat"));
  const auto b = load_ssat<double>(golden("conv_bias.ssat"));
  const auto y = load_ssat<double>(golden("conv_s2_p1_g2_output.ssat"));
  const Conv2dGeometry geom{2, 1, 2};
  EXPECT_LT(worst(conv2d_framewise<double>(x, w, b.data(), geom), y), 1e-13);
}
