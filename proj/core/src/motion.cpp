#include "ssa/motion.hpp"

#include <algorithm>
#include <numeric>

#include "ssa/errors.hpp"

namespace ssa {

std::string to_string(MotionClass c) {
  switch (c) {
    case MotionClass::Left: return "left";
    case MotionClass::Right: return "right";
    case MotionClass::Up: return "up";
    case MotionClass::Down: return "down";
  }
  return "?";
}

namespace {

void check_options(const MotionOptions& o) {
  if (o.n_per_class == 0) throw SpecError("motion dataset needs n_per_class >= 1");
  if (o.square == 0 || o.square > o.size) throw SpecError("motion square must fit the frame");
  if (o.frames == 0 || o.frames > o.size - o.square + 1) {
    throw SpecError("motion clips need at most " + std::to_string(o.size - o.square + 1) +
                    " frames so that positions stay distinct");
  }
  if (o.noise < 0) throw SpecError("motion noise must be non-negative");
  if (o.train_fraction <= 0 || o.train_fraction > 1) {
    throw SpecError("train_fraction must be in (0, 1]");
  }
}

// `count` distinct sorted values from [0, range), uniformly over subsets.
std::vector<std::size_t> distinct_sorted(std::size_t count, std::size_t range, Rng& rng) {
  std::vector<std::size_t> all(range);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(all[i], all[i + rng.below(range - i)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

MotionPath motion_path(MotionClass label, Rng& rng, const MotionOptions& options) {
  check_options(options);
  const std::size_t range = options.size - options.square + 1;
  const auto xs = distinct_sorted(options.frames, range, rng);
  const auto ys = distinct_sorted(options.frames, range, rng);
  std::vector<std::size_t> pairing(options.frames);
  std::iota(pairing.begin(), pairing.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(pairing));

  MotionPath path(options.frames);
  for (std::size_t i = 0; i < options.frames; ++i) path[i] = {xs[i], ys[pairing[i]]};
  switch (label) {
    case MotionClass::Right:
      break;  // already increasing in x
    case MotionClass::Left:
      std::reverse(path.begin(), path.end());
      break;
    case MotionClass::Down:
      std::sort(path.begin(), path.end(), [](const auto& a, const auto& b) { return a[1] < b[1]; });
      break;
    case MotionClass::Up:
      std::sort(path.begin(), path.end(), [](const auto& a, const auto& b) { return a[1] > b[1]; });
      break;
  }
  return path;
}

FeatureMap<float> render_motion_clip(const MotionPath& path, Rng& rng, const MotionOptions& options) {
  const std::size_t s = options.size;
  FeatureMap<float> clip(Shape5{1, 1, path.size(), s, s});
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto [x, y] = path[t];
    for (std::size_t dy = 0; dy < options.square; ++dy) {
      for (std::size_t dx = 0; dx < options.square; ++dx) clip(0, 0, t, y + dy, x + dx) = 1.0f;
    }
  }
  if (options.noise > 0) {
    for (float& v : clip.data()) v += static_cast<float>(rng.normal(0.0, options.noise));
  }
  return clip;
}

SyntheticMotionSample motion_sample(MotionClass label, Rng& rng, const MotionOptions& options) {
  const MotionPath path = motion_path(label, rng, options);
  return SyntheticMotionSample{render_motion_clip(path, rng, options), label};
}

TrainTestSplit gen_motion_dataset(const MotionOptions& options) {
  check_options(options);
  const std::size_t total = options.n_per_class * kMotionClasses;
  const std::size_t train_per_class = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(options.n_per_class) * options.train_fraction + 0.5));
  std::vector<FeatureMap<float>> train_clips, test_clips;
  TrainTestSplit split;
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng(Rng::derive_seed(options.seed, i));
    const auto label = static_cast<MotionClass>(i % kMotionClasses);
    SyntheticMotionSample sample = motion_sample(label, rng, options);
    const bool train = i / kMotionClasses < train_per_class;
    (train ? train_clips : test_clips).push_back(std::move(sample.clip));
    (train ? split.train.labels : split.test.labels).push_back(static_cast<std::uint32_t>(label));
  }
  auto stack = [](const std::vector<FeatureMap<float>>& clips) {
    std::vector<const FeatureMap<float>*> ptrs;
    ptrs.reserve(clips.size());
    for (const auto& c : clips) ptrs.push_back(&c);
    return stack_samples<float>(ptrs);
  };
  split.train.inputs = stack(train_clips);
  split.train.classes = kMotionClasses;
  split.test.classes = kMotionClasses;
  if (!test_clips.empty()) {
    split.test.inputs = stack(test_clips);
  } else {
    Shape5 empty = split.train.inputs.shape();
    empty.n = 0;
    split.test.inputs = FeatureMap<float>(empty);
  }
  return split;
}

FeatureMap<float> reverse_frames(const FeatureMap<float>& clips) {
  const Shape5 s = clips.shape();
  FeatureMap<float> out(s);
  const std::size_t plane = s.frame_size();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t t = 0; t < s.f; ++t) {
        const float* src = clips.frame(n, c, t);
        std::copy(src, src + plane, out.frame(n, c, s.f - 1 - t));
      }
    }
  }
  return out;
}

}  // namespace ssa
