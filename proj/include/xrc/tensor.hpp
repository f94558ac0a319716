#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xrc {

using i64 = std::int64_t;

/// Library-wide exception type. Messages name the offending field or
/// dimension so callers can surface a single-line diagnostic.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void concat_into(std::ostringstream&) {}
template <typename A, typename... Rest>
void concat_into(std::ostringstream& os, const A& a, const Rest&... rest) {
  os << a;
  concat_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  detail::concat_into(os, args...);
  return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw Error(concat(args...));
}

enum class Dtype { f32, f64 };

inline const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

template <typename T>
struct dtype_of;
template <>
struct dtype_of<float> {
  static constexpr Dtype value = Dtype::f32;
};
template <>
struct dtype_of<double> {
  static constexpr Dtype value = Dtype::f64;
};

/// Logical layout is (batch, channels, height, width), row-major with
/// width fastest. All dims must be >= 1.
struct Shape {
  i64 n = 1;
  i64 c = 1;
  i64 h = 1;
  i64 w = 1;

  i64 numel() const { return n * c * h * w; }

  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const { return concat(n, "x", c, "x", h, "x", w); }

  void validate(const char* what = "tensor") const {
    if (n < 1 || c < 1 || h < 1 || w < 1) {
      fail(what, ": all dims must be >= 1, got ", str());
    }
  }
};

/// Dense rank-4 array. Data length always equals shape.numel().
template <typename T>
class Tensor {
 public:
  static constexpr Dtype dtype = dtype_of<T>::value;

  Tensor() : shape_{1, 1, 1, 1}, data_(1, T{}) {}

  explicit Tensor(Shape s, T fill = T{}) : shape_(s) {
    shape_.validate();
    data_.assign(static_cast<std::size_t>(shape_.numel()), fill);
  }

  Tensor(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
    shape_.validate();
    if (static_cast<i64>(data_.size()) != shape_.numel()) {
      fail("tensor: data length ", data_.size(), " does not match shape ",
           shape_.str(), " (", shape_.numel(), " elements)");
    }
  }

  const Shape& shape() const { return shape_; }
  i64 numel() const { return shape_.numel(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  i64 index(i64 n, i64 c, i64 h, i64 w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(i64 n, i64 c, i64 h, i64 w) { return data_[static_cast<std::size_t>(index(n, c, h, w))]; }
  const T& at(i64 n, i64 c, i64 h, i64 w) const {
    return data_[static_cast<std::size_t>(index(n, c, h, w))];
  }

  /// Scalar tensors are 1x1x1x1.
  bool is_scalar() const { return shape_.numel() == 1; }
  T scalar() const {
    if (!is_scalar()) fail("scalar(): tensor has shape ", shape_.str());
    return data_[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> zeros(Shape s) {
  return Tensor<T>(s, T{});
}

template <typename T>
Tensor<T> full(Shape s, T v) {
  return Tensor<T>(s, v);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(what, ": shape mismatch ", a.shape().str(), " vs ", b.shape().str());
  }
}

}  // namespace xrc
