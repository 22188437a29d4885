#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ssa/tensor.hpp"

namespace ssa {

/// A batch of inputs (n, c, f, h, w) with one class label per sample.
struct LabeledSet {
  FeatureMap<float> inputs;
  std::vector<std::uint32_t> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Samples `indices` as a batch plus their labels.
  LabeledSet subset(std::span<const std::size_t> indices) const;
  /// Throws DimensionError when inputs and labels disagree or a label is out of range.
  void validate() const;
};

struct TrainTestSplit {
  LabeledSet train;
  LabeledSet test;
};

/// Writes `<stem>.ssat` (inputs) and `<stem>.labels.csv` (header "index,label").
void save_labeled_set(const std::filesystem::path& stem, const LabeledSet& set);
/// Reads the pair written by save_labeled_set; `classes` becomes max label + 1
/// unless the CSV carries a "# classes=N" comment line.
LabeledSet load_labeled_set(const std::filesystem::path& stem);

}  // namespace ssa
