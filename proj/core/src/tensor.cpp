#include "ssa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssa/errors.hpp"

namespace ssa {

std::string Shape5::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << f << "," << h << "," << w << ")";
  return os.str();
}

template <typename T>
FeatureMap<T>::FeatureMap(Shape5 shape, T fill) : shape_(shape), data_(shape.numel(), fill) {}

template <typename T>
FeatureMap<T>::FeatureMap(Shape5 shape, std::vector<T> values)
    : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.numel()) {
    throw DimensionError("feature map " + shape_.str() + " needs " +
                         std::to_string(shape_.numel()) + " values, got " +
                         std::to_string(data_.size()));
  }
}

template <typename T>
void FeatureMap<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool FeatureMap<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
FeatureMap<T> FeatureMap<T>::sample(std::size_t index) const {
  if (index >= shape_.n) {
    throw DimensionError("sample index " + std::to_string(index) + " out of range for " +
                         shape_.str());
  }
  Shape5 s = shape_;
  s.n = 1;
  const std::size_t stride = s.numel();
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(index * stride);
  return FeatureMap<T>(s, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(stride)));
}

template <typename T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                         " needs " + std::to_string(rows_ * cols_) + " values, got " +
                         std::to_string(data_.size()));
  }
}

template <typename T>
FeatureMap<T> stack_samples(std::span<const FeatureMap<T>* const> samples) {
  if (samples.empty()) throw DimensionError("cannot stack an empty sample list");
  Shape5 s = samples.front()->shape();
  if (s.n != 1) throw DimensionError("stacked samples must have n = 1, got " + s.str());
  std::vector<T> values;
  values.reserve(s.numel() * samples.size());
  for (const auto* sample : samples) {
    if (sample->shape() != s) {
      throw DimensionError("sample shape " + sample->shape().str() + " differs from " + s.str());
    }
    values.insert(values.end(), sample->data().begin(), sample->data().end());
  }
  s.n = samples.size();
  return FeatureMap<T>(s, std::move(values));
}

template <typename T>
FeatureMap<T> gather_samples(const FeatureMap<T>& batch, std::span<const std::size_t> indices) {
  Shape5 s = batch.shape();
  const std::size_t stride = s.c * s.f * s.h * s.w;
  s.n = indices.size();
  std::vector<T> values;
  values.reserve(s.numel());
  for (std::size_t idx : indices) {
    if (idx >= batch.shape().n) {
      throw DimensionError("gather index " + std::to_string(idx) + " out of range for " +
                           batch.shape().str());
    }
    const T* first = batch.raw() + idx * stride;
    values.insert(values.end(), first, first + stride);
  }
  return FeatureMap<T>(s, std::move(values));
}

template <typename T>
double max_relative_deviation(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("cannot compare " + a.shape().str() + " with " + b.shape().str());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    const double scale = std::max({std::abs(x), std::abs(y), 1.0});
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

template <typename T>
double dot(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("dot of " + a.shape().str() + " with " + b.shape().str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

#define SSA_INSTANTIATE(T)                                                                   \
  template class FeatureMap<T>;                                                              \
  template class Matrix<T>;                                                                  \
  template FeatureMap<T> stack_samples<T>(std::span<const FeatureMap<T>* const>);            \
  template FeatureMap<T> gather_samples<T>(const FeatureMap<T>&, std::span<const std::size_t>); \
  template double max_relative_deviation<T>(const FeatureMap<T>&, const FeatureMap<T>&);    \
  template double dot<T>(const FeatureMap<T>&, const FeatureMap<T>&);

SSA_INSTANTIATE(float)
SSA_INSTANTIATE(double)
#undef SSA_INSTANTIATE

}  // namespace ssa
