#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ssa/dataset.hpp"
#include "ssa/rng.hpp"

namespace ssa {

enum class MotionClass : std::uint32_t { Left = 0, Right = 1, Up = 2, Down = 3 };

inline constexpr std::size_t kMotionClasses = 4;
std::string to_string(MotionClass c);

struct MotionOptions {
  std::size_t n_per_class = 500;
  double noise = 0.05;
  std::uint64_t seed = 7;
  std::size_t frames = 8;
  std::size_t size = 16;
  std::size_t square = 2;
  double train_fraction = 0.8;
};

/// One clip (1, 1, frames, size, size) of a bright square on a dark
/// background; the direction of travel is the label.
struct SyntheticMotionSample {
  FeatureMap<float> clip;
  MotionClass label = MotionClass::Left;
};

/// Square positions (x, y) visited by a clip, one per frame.
using MotionPath = std::vector<std::array<std::size_t, 2>>;

/// Draws `frames` distinct x and distinct y coordinates, pairs them by a
/// random permutation and orders the resulting points by class: Right by
/// increasing x, Left by decreasing x, Down by increasing y, Up by decreasing
/// y. Every class therefore visits the same distribution of point sets and
/// differs only in visiting order.
MotionPath motion_path(MotionClass label, Rng& rng, const MotionOptions& options = {});

/// Renders a path: intensity 1 inside the square, 0 elsewhere, plus N(0, noise^2).
FeatureMap<float> render_motion_clip(const MotionPath& path, Rng& rng, const MotionOptions& options = {});

SyntheticMotionSample motion_sample(MotionClass label, Rng& rng, const MotionOptions& options = {});

/// Balanced dataset; sample i has class i mod 4 and its own derived RNG
/// stream. The first `train_fraction` of samples of each class form the
/// training split.
TrainTestSplit gen_motion_dataset(const MotionOptions& options = {});

/// Reverses the temporal axis of every sample.
FeatureMap<float> reverse_frames(const FeatureMap<float>& clips);

}  // namespace ssa
