#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace gradinv {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

/// Dense row-major n-d array of doubles. Rank 0 is a scalar with one element.
class NDArray {
 public:
  NDArray() = default;
  explicit NDArray(Shape shape);
  NDArray(Shape shape, double fill);
  NDArray(Shape shape, std::vector<double> data);

  static NDArray scalar(double v);
  static NDArray zeros(const Shape& shape) { return NDArray(shape, 0.0); }
  static NDArray full(const Shape& shape, double v) { return NDArray(shape, v); }

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  /// Element access for rank <= 4; index count must equal rank.
  double& at(std::initializer_list<int64_t> idx);
  double at(std::initializer_list<int64_t> idx) const;

  double item() const;  // numel()==1 only
  bool all_finite() const;

  NDArray reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Row-major strides; broadcast dims (size 1 against >1) get stride 0.
std::vector<int64_t> broadcast_strides(const Shape& from, const Shape& to);
Shape broadcast_shape(const Shape& a, const Shape& b);

NDArray broadcast_array(const NDArray& x, const Shape& to);
/// Adjoint of broadcast_array: sums x down to `to` (same rules).
NDArray reduce_to_shape(const NDArray& x, const Shape& to);

}  // namespace gradinv
