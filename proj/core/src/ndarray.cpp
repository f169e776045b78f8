#include "gradinv/ndarray.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gradinv {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

NDArray::NDArray(Shape shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

NDArray::NDArray(Shape shape, double fill) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
}

NDArray::NDArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
    throw std::invalid_argument("data size does not match shape " + shape_str(shape_));
}

NDArray NDArray::scalar(double v) { return NDArray(Shape{}, std::vector<double>{v}); }

namespace {
int64_t flat_index(const Shape& shape, std::initializer_list<int64_t> idx) {
  if (static_cast<int64_t>(idx.size()) != static_cast<int64_t>(shape.size()))
    throw std::invalid_argument("index rank mismatch");
  int64_t flat = 0;
  size_t k = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= shape[k]) throw std::out_of_range("index out of range");
    flat = flat * shape[k] + i;
    ++k;
  }
  return flat;
}
}  // namespace

double& NDArray::at(std::initializer_list<int64_t> idx) {
  return data_[static_cast<size_t>(flat_index(shape_, idx))];
}

double NDArray::at(std::initializer_list<int64_t> idx) const {
  return data_[static_cast<size_t>(flat_index(shape_, idx))];
}

double NDArray::item() const {
  if (numel() != 1) throw std::logic_error("item() on array with numel != 1");
  return data_[0];
}

bool NDArray::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

NDArray NDArray::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel())
    throw std::invalid_argument("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                                " changes element count");
  return NDArray(std::move(shape), data_);
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument("shapes " + shape_str(a) + " and " + shape_str(b) +
                                  " are not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

std::vector<int64_t> broadcast_strides(const Shape& from, const Shape& to) {
  size_t r = to.size();
  if (from.size() > r)
    throw std::invalid_argument("cannot broadcast " + shape_str(from) + " to " + shape_str(to));
  std::vector<int64_t> strides(r, 0);
  int64_t acc = 1;
  // Walk dims right to left, computing row-major strides of `from` aligned to `to`.
  for (size_t i = 0; i < from.size(); ++i) {
    size_t fi = from.size() - 1 - i;
    size_t ti = r - 1 - i;
    int64_t d = from[fi];
    if (d != to[ti] && d != 1)
      throw std::invalid_argument("cannot broadcast " + shape_str(from) + " to " + shape_str(to));
    strides[ti] = (d == 1 && to[ti] != 1) ? 0 : acc;
    acc *= d;
  }
  return strides;
}

NDArray broadcast_array(const NDArray& x, const Shape& to) {
  if (x.shape() == to) return x;
  std::vector<int64_t> st = broadcast_strides(x.shape(), to);
  NDArray out(to);
  int64_t n = out.numel();
  size_t r = to.size();
  std::vector<int64_t> idx(r, 0);
  int64_t src = 0;
  for (int64_t f = 0; f < n; ++f) {
    out[f] = x[src];
    for (size_t k = r; k-- > 0;) {
      idx[k]++;
      src += st[k];
      if (idx[k] < to[k]) break;
      src -= st[k] * to[k];
      idx[k] = 0;
    }
  }
  return out;
}

NDArray reduce_to_shape(const NDArray& x, const Shape& to) {
  if (x.shape() == to) return x;
  std::vector<int64_t> st = broadcast_strides(to, x.shape());
  NDArray out(to);
  const Shape& xs = x.shape();
  int64_t n = x.numel();
  size_t r = xs.size();
  std::vector<int64_t> idx(r, 0);
  int64_t dst = 0;
  for (int64_t f = 0; f < n; ++f) {
    out[dst] += x[f];
    for (size_t k = r; k-- > 0;) {
      idx[k]++;
      dst += st[k];
      if (idx[k] < xs[k]) break;
      dst -= st[k] * xs[k];
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace gradinv
