#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace in2out {

using Shape = std::vector<std::int64_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    if (d < 1) throw std::invalid_argument("tensor axis length must be >= 1, got shape " + shape_str(s));
    n *= d;
  }
  return n;
}

/// Dense row-major n-axis array. Video tensors use the fixed axis order
/// (batch, frames, channels, height, width).
template <class S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), S(0)) {}
  Tensor(Shape shape, S fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_))
      throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, S v) { return Tensor(std::move(shape), v); }

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  // flat index for the canonical 5-axis (B,T,C,H,W) layout
  std::int64_t index5(std::int64_t b, std::int64_t t, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return (((b * shape_[1] + t) * shape_[2] + c) * shape_[3] + h) * shape_[4] + w;
  }
  S& at5(std::int64_t b, std::int64_t t, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[static_cast<std::size_t>(index5(b, t, c, h, w))];
  }
  const S& at5(std::int64_t b, std::int64_t t, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[static_cast<std::size_t>(index5(b, t, c, h, w))];
  }

  template <class T2>
  Tensor<T2> cast() const {
    Tensor<T2> out(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<T2>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

  bool all_finite() const {
    for (const S& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  void require_ndim(int n, const char* what) const {
    if (ndim() != n)
      throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(n) +
                                  " axes, got shape " + shape_str(shape_));
  }

 private:
  Shape shape_;
  std::vector<S> data_;
};

enum class Space { pixel, feature };

/// 5-axis video array (B,T,C,H,W) plus the space it lives in. Pixel-space
/// instances keep every element inside [0,1].
template <class S>
struct VideoTensor {
  Tensor<S> data;
  Space space = Space::feature;

  VideoTensor() = default;
  VideoTensor(Tensor<S> t, Space sp) : data(std::move(t)), space(sp) { validate(); }

  std::int64_t batches() const { return data.dim(0); }
  std::int64_t frames() const { return data.dim(1); }
  std::int64_t channels() const { return data.dim(2); }
  std::int64_t height() const { return data.dim(3); }
  std::int64_t width() const { return data.dim(4); }

  void validate() const {
    data.require_ndim(5, "VideoTensor");
    if (space == Space::pixel) {
      for (std::int64_t i = 0; i < data.numel(); ++i) {
        const double v = static_cast<double>(data[i]);
        if (!(v >= 0.0 && v <= 1.0))
          throw std::invalid_argument("pixel-space video element out of [0,1]: " + std::to_string(v));
      }
    }
  }
};

// exact elementwise equality (bit-level for finite values)
template <class S>
bool tensors_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

template <class S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

}  // namespace in2out
