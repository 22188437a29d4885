#include "ssa/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ssa/errors.hpp"
#include "ssa/tensor_io.hpp"

namespace ssa {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out;
  out.inputs = gather_samples(inputs, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.classes = classes;
  return out;
}

void LabeledSet::validate() const {
  if (inputs.shape().n != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(inputs.shape().n) + " inputs but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::uint32_t label : labels) {
    if (label >= classes) {
      throw DimensionError("label " + std::to_string(label) + " outside [0, " +
                           std::to_string(classes) + ")");
    }
  }
}

void save_labeled_set(const std::filesystem::path& stem, const LabeledSet& set) {
  set.validate();
  save_ssat(with_suffix(stem, ".ssat"), set.inputs);
  std::ofstream csv(with_suffix(stem, ".labels.csv"));
  if (!csv) throw FormatError("cannot write " + with_suffix(stem, ".labels.csv").string());
  csv << "# classes=" << set.classes << "\nindex,label\n";
  for (std::size_t i = 0; i < set.labels.size(); ++i) csv << i << ',' << set.labels[i] << '\n';
}

LabeledSet load_labeled_set(const std::filesystem::path& stem) {
  LabeledSet set;
  set.inputs = load_ssat<float>(with_suffix(stem, ".ssat"));
  const auto csv_path = with_suffix(stem, ".labels.csv");
  std::ifstream csv(csv_path);
  if (!csv) throw FormatError("cannot open " + csv_path.string());
  std::string line;
  bool header = false;
  std::size_t declared = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    if (line.rfind("# classes=", 0) == 0) {
      declared = std::stoul(line.substr(10));
      continue;
    }
    if (!header) {
      if (line != "index,label") throw FormatError(csv_path.string() + ": expected header index,label");
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::size_t index = 0;
    char comma = 0;
    std::uint32_t label = 0;
    if (!(row >> index >> comma >> label) || comma != ',' || index != set.labels.size()) {
      throw FormatError(csv_path.string() + ": malformed row \"" + line + "\"");
    }
    set.labels.push_back(label);
  }
  if (!header) throw FormatError(csv_path.string() + ": missing header");
  const std::uint32_t max_label =
      set.labels.empty() ? 0 : *std::max_element(set.labels.begin(), set.labels.end());
  set.classes = std::max<std::size_t>(declared, set.labels.empty() ? 0 : max_label + 1);
  try {
    set.validate();
  } catch (const DimensionError& e) {
    throw FormatError(stem.string() + ": " + e.what());
  }
  return set;
}

}  // namespace ssa
