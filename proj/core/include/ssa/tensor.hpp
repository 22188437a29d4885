#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ssa {

/// Extents of a dense (batch, channels, depth, height, width) feature map.
struct Shape5 {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t f = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t numel() const { return n * c * f * h * w; }
  std::size_t frame_size() const { return h * w; }
  bool operator==(const Shape5&) const = default;
  std::string str() const;
};

/// Dense 5-D tensor in row-major order with `w` varying fastest.
///
/// Every operation in the library takes and returns these by value; the
/// element type is `float` for training and `double` for gradient checking.
template <typename T>
class FeatureMap {
 public:
  using value_type = T;

  FeatureMap() = default;
  explicit FeatureMap(Shape5 shape, T fill = T(0));
  FeatureMap(Shape5 shape, std::vector<T> values);

  const Shape5& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t f, std::size_t h,
                     std::size_t w) const {
    return (((n * shape_.c + c) * shape_.f + f) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t f, std::size_t h, std::size_t w) {
    return data_[offset(n, c, f, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t f, std::size_t h,
                      std::size_t w) const {
    return data_[offset(n, c, f, h, w)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Pointer to the (h, w) plane of frame `f` in channel `c` of sample `n`.
  T* frame(std::size_t n, std::size_t c, std::size_t f) { return data_.data() + offset(n, c, f, 0, 0); }
  const T* frame(std::size_t n, std::size_t c, std::size_t f) const {
    return data_.data() + offset(n, c, f, 0, 0);
  }

  void fill(T value);
  bool all_finite() const;

  /// Copies sample `index` of the batch into a tensor with n = 1.
  FeatureMap<T> sample(std::size_t index) const;

  template <typename U>
  FeatureMap<U> cast() const {
    return FeatureMap<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  Shape5 shape_{0, 0, 0, 0, 0};
  std::vector<T> data_;
};

/// Row-major 2-D matrix used for pooled features and logits.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Concatenates single samples (each with n = 1, identical c/f/h/w) into a batch.
template <typename T>
FeatureMap<T> stack_samples(std::span<const FeatureMap<T>* const> samples);

/// Gathers rows `indices` of a batched tensor into a new batch.
template <typename T>
FeatureMap<T> gather_samples(const FeatureMap<T>& batch, std::span<const std::size_t> indices);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1). Throws DimensionError on shape mismatch.
template <typename T>
double max_relative_deviation(const FeatureMap<T>& a, const FeatureMap<T>& b);

template <typename T>
double dot(const FeatureMap<T>& a, const FeatureMap<T>& b);

}  // namespace ssa
