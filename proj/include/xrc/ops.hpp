#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "xrc/gemm.hpp"
#include "xrc/tensor.hpp"

namespace xrc {

enum class Padding { valid, same };

/// Convolution geometry. Output dims: valid -> floor((in - k) / stride) + 1,
/// same -> ceil(in / stride). Same-padding puts the extra row/column on the
/// bottom/right when the total is odd.
struct ConvSpec {
  i64 kernel_h = 1;
  i64 kernel_w = 1;
  i64 stride_h = 1;
  i64 stride_w = 1;
  Padding padding = Padding::valid;
  i64 in_channels = 1;
  i64 out_channels = 1;

  void validate() const {
    if (kernel_h < 1 || kernel_w < 1) {
      fail("conv spec: kernel dims must be >= 1, got ", kernel_h, "x", kernel_w);
    }
    if (stride_h < 1 || stride_w < 1) {
      fail("conv spec: strides must be >= 1, got ", stride_h, "x", stride_w);
    }
    if (in_channels < 1 || out_channels < 1) {
      fail("conv spec: channel counts must be >= 1, got in=", in_channels,
           " out=", out_channels);
    }
  }
};

inline i64 conv_out_dim(i64 in, i64 kernel, i64 stride, Padding padding) {
  if (padding == Padding::same) {
    return (in + stride - 1) / stride;
  }
  if (in < kernel) {
    fail("conv: input extent ", in, " smaller than kernel ", kernel,
         " with valid padding");
  }
  return (in - kernel) / stride + 1;
}

inline i64 pad_before(i64 in, i64 kernel, i64 stride, Padding padding) {
  if (padding == Padding::valid) return 0;
  const i64 out = (in + stride - 1) / stride;
  const i64 total = std::max<i64>((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

namespace detail {

/// Unfolds one image (c, h, w) into a (c*kh*kw) x (h_out*w_out) matrix with
/// zero fill outside the padded frame.
template <typename T>
void im2col(const T* x, i64 c, i64 h, i64 w, const ConvSpec& s, i64 h_out,
            i64 w_out, T* col) {
  const i64 pt = pad_before(h, s.kernel_h, s.stride_h, s.padding);
  const i64 pl = pad_before(w, s.kernel_w, s.stride_w, s.padding);
  const i64 patch = h_out * w_out;
  for (i64 ci = 0; ci < c; ++ci) {
    for (i64 dkh = 0; dkh < s.kernel_h; ++dkh) {
      for (i64 dkw = 0; dkw < s.kernel_w; ++dkw) {
        T* row = col + ((ci * s.kernel_h + dkh) * s.kernel_w + dkw) * patch;
        for (i64 ho = 0; ho < h_out; ++ho) {
          const i64 ih = ho * s.stride_h - pt + dkh;
          T* dst = row + ho * w_out;
          if (ih < 0 || ih >= h) {
            std::fill(dst, dst + w_out, T{});
            continue;
          }
          const T* src = x + (ci * h + ih) * w;
          const i64 shift = pl - dkw;
          i64 lo = 0;
          if (shift > 0) lo = (shift + s.stride_w - 1) / s.stride_w;
          lo = std::min(lo, w_out);
          const i64 last = w - 1 + shift;  // last input column reachable
          i64 hi = last < 0 ? 0 : std::min<i64>(w_out, last / s.stride_w + 1);
          if (hi < lo) hi = lo;
          std::fill(dst, dst + lo, T{});
          for (i64 wo = lo; wo < hi; ++wo) {
            dst[wo] = src[wo * s.stride_w - shift];
          }
          std::fill(dst + hi, dst + w_out, T{});
        }
      }
    }
  }
}

/// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* col, i64 c, i64 h, i64 w, const ConvSpec& s, i64 h_out,
            i64 w_out, T* dx) {
  const i64 pt = pad_before(h, s.kernel_h, s.stride_h, s.padding);
  const i64 pl = pad_before(w, s.kernel_w, s.stride_w, s.padding);
  const i64 patch = h_out * w_out;
  for (i64 ci = 0; ci < c; ++ci) {
    for (i64 dkh = 0; dkh < s.kernel_h; ++dkh) {
      for (i64 dkw = 0; dkw < s.kernel_w; ++dkw) {
        const T* row = col + ((ci * s.kernel_h + dkh) * s.kernel_w + dkw) * patch;
        for (i64 ho = 0; ho < h_out; ++ho) {
          const i64 ih = ho * s.stride_h - pt + dkh;
          if (ih < 0 || ih >= h) continue;
          T* dst = dx + (ci * h + ih) * w;
          const T* src = row + ho * w_out;
          const i64 shift = pl - dkw;
          i64 lo = 0;
          if (shift > 0) lo = (shift + s.stride_w - 1) / s.stride_w;
          lo = std::min(lo, w_out);
          const i64 last = w - 1 + shift;
          const i64 hi = last < 0 ? 0 : std::min<i64>(w_out, last / s.stride_w + 1);
          for (i64 wo = lo; wo < hi; ++wo) {
            dst[wo * s.stride_w - shift] += src[wo];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>* bias, const ConvSpec& spec) {
  spec.validate();
  if (x.shape().c != spec.in_channels) {
    fail("conv2d: input has ", x.shape().c, " channels, spec expects ",
         spec.in_channels);
  }
  const Shape expect{spec.out_channels, spec.in_channels, spec.kernel_h,
                     spec.kernel_w};
  if (w.shape() != expect) {
    fail("conv2d: weights shape ", w.shape().str(),
         " does not match (out, in, kh, kw) = ", expect.str());
  }
  if (bias != nullptr) {
    const Shape bshape{1, spec.out_channels, 1, 1};
    if (bias->shape() != bshape) {
      fail("conv2d: bias shape ", bias->shape().str(), " expected ",
           bshape.str());
    }
  }
}

/// 2D cross-correlation (the kernel is not flipped). Weights are laid out
/// (out_channels, in_channels, kernel_h, kernel_w); bias is per output
/// channel, shape (1, out_channels, 1, 1).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                 const ConvSpec& spec) {
  check_conv_args(x, w, bias, spec);
  const i64 h_out = conv_out_dim(x.shape().h, spec.kernel_h, spec.stride_h, spec.padding);
  const i64 w_out = conv_out_dim(x.shape().w, spec.kernel_w, spec.stride_w, spec.padding);
  const i64 k = spec.in_channels * spec.kernel_h * spec.kernel_w;
  const i64 patch = h_out * w_out;

  Tensor<T> y({x.shape().n, spec.out_channels, h_out, w_out});
  std::vector<T> col(static_cast<std::size_t>(k * patch));
  const i64 x_stride = x.shape().c * x.shape().h * x.shape().w;
  const i64 y_stride = spec.out_channels * patch;

  for (i64 n = 0; n < x.shape().n; ++n) {
    detail::im2col(x.data() + n * x_stride, x.shape().c, x.shape().h,
                   x.shape().w, spec, h_out, w_out, col.data());
    gemm(false, false, spec.out_channels, patch, k, T(1), w.data(), k,
         col.data(), patch, T(0), y.data() + n * y_stride, patch);
    if (bias != nullptr) {
      for (i64 co = 0; co < spec.out_channels; ++co) {
        const T b = bias->data()[co];
        T* row = y.data() + n * y_stride + co * patch;
        for (i64 p = 0; p < patch; ++p) row[p] += b;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec) {
  return conv2d(x, w, static_cast<const Tensor<T>*>(nullptr), spec);
}

/// Gradients of conv2d; any of dx/dw/db may be null to skip.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const ConvSpec& spec, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db) {
  const i64 h_out = conv_out_dim(x.shape().h, spec.kernel_h, spec.stride_h, spec.padding);
  const i64 w_out = conv_out_dim(x.shape().w, spec.kernel_w, spec.stride_w, spec.padding);
  const i64 k = spec.in_channels * spec.kernel_h * spec.kernel_w;
  const i64 patch = h_out * w_out;
  const Shape dy_shape{x.shape().n, spec.out_channels, h_out, w_out};
  if (dy.shape() != dy_shape) {
    fail("conv2d backward: upstream grad shape ", dy.shape().str(),
         " expected ", dy_shape.str());
  }

  if (dx != nullptr) *dx = zeros<T>(x.shape());
  if (dw != nullptr) *dw = zeros<T>(w.shape());
  if (db != nullptr) *db = zeros<T>({1, spec.out_channels, 1, 1});

  std::vector<T> col(static_cast<std::size_t>(k * patch));
  std::vector<T> dcol(static_cast<std::size_t>(k * patch));
  const i64 x_stride = x.shape().c * x.shape().h * x.shape().w;
  const i64 y_stride = spec.out_channels * patch;

  for (i64 n = 0; n < x.shape().n; ++n) {
    const T* dyn = dy.data() + n * y_stride;
    if (dw != nullptr || dx != nullptr) {
      if (dw != nullptr) {
        detail::im2col(x.data() + n * x_stride, x.shape().c, x.shape().h,
                       x.shape().w, spec, h_out, w_out, col.data());
        gemm(false, true, spec.out_channels, k, patch, T(1), dyn, patch,
             col.data(), patch, T(1), dw->data(), k);
      }
      if (dx != nullptr) {
        gemm(true, false, k, patch, spec.out_channels, T(1), w.data(), k, dyn,
             patch, T(0), dcol.data(), patch);
        detail::col2im(dcol.data(), x.shape().c, x.shape().h, x.shape().w,
                       spec, h_out, w_out, dx->data() + n * x_stride);
      }
    }
    if (db != nullptr) {
      for (i64 co = 0; co < spec.out_channels; ++co) {
        T acc{};
        const T* row = dyn + co * patch;
        for (i64 p = 0; p < patch; ++p) acc += row[p];
        db->data()[co] += acc;
      }
    }
  }
}

/// 2x2 max pooling with stride 2. Spatial dims must be even. When argmax is
/// given, it receives the flat input index of each block maximum; ties keep
/// the first element in row-major scan order.
template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& x, std::vector<i64>* argmax = nullptr) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    fail("maxpool2x2: spatial dims must be even, got ", s.h, "x", s.w);
  }
  Tensor<T> y({s.n, s.c, s.h / 2, s.w / 2});
  if (argmax != nullptr) argmax->assign(static_cast<std::size_t>(y.numel()), 0);
  i64 oi = 0;
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 c = 0; c < s.c; ++c) {
      for (i64 ho = 0; ho < s.h / 2; ++ho) {
        for (i64 wo = 0; wo < s.w / 2; ++wo, ++oi) {
          i64 best_idx = x.index(n, c, 2 * ho, 2 * wo);
          T best = x.data()[best_idx];
          for (i64 dy = 0; dy < 2; ++dy) {
            for (i64 dx = 0; dx < 2; ++dx) {
              const i64 idx = x.index(n, c, 2 * ho + dy, 2 * wo + dx);
              if (x.data()[idx] > best) {
                best = x.data()[idx];
                best_idx = idx;
              }
            }
          }
          y.data()[oi] = best;
          if (argmax != nullptr) (*argmax)[static_cast<std::size_t>(oi)] = best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Shape& in_shape,
                              const std::vector<i64>& argmax,
                              const Tensor<T>& dy) {
  Tensor<T> dx(in_shape);
  for (i64 i = 0; i < dy.numel(); ++i) {
    dx.data()[argmax[static_cast<std::size_t>(i)]] += dy.data()[i];
  }
  return dx;
}

/// Rearranges channel blocks into space: output pixel (y*b + dy, x*b + dx)
/// of channel k reads input channel k*b*b + dy*b + dx at (y, x). A pure
/// permutation of the values.
template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x, i64 block = 2) {
  const Shape& s = x.shape();
  if (block < 1) fail("depth_to_space: block must be >= 1, got ", block);
  if (s.c % (block * block) != 0) {
    fail("depth_to_space: channels ", s.c, " not divisible by block^2 = ",
         block * block);
  }
  Tensor<T> y({s.n, s.c / (block * block), s.h * block, s.w * block});
  for (i64 n = 0; n < s.n; ++n) {
    for (i64 k = 0; k < y.shape().c; ++k) {
      for (i64 dy = 0; dy < block; ++dy) {
        for (i64 dx = 0; dx < block; ++dx) {
          const i64 ci = k * block * block + dy * block + dx;
          for (i64 h = 0; h < s.h; ++h) {
            const T* src = x.data() + x.index(n, ci, h, 0);
            T* dst = y.data() + y.index(n, k, h * block + dy, dx);
            for (i64 w = 0; w < s.w; ++w) {
              dst[w * block] = src[w];
            }
          }
        }
      }
    }
  }
  return y;
}

/// Exact inverse of depth_to_space.
template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& x, i64 block = 2) {
  const Shape& s = x.shape();
  if (block < 1) fail("space_to_depth: block must be >= 1, got ", block);
  if (s.h % block != 0 || s.w % block != 0) {
    fail("space_to_depth: spatial dims ", s.h, "x", s.w,
         " not divisible by block ", block);
  }
  Tensor<T> y({s.n, s.c * block * block, s.h / block, s.w / block});
  for (i64 n = 0; n < y.shape().n; ++n) {
    for (i64 k = 0; k < s.c; ++k) {
      for (i64 dy = 0; dy < block; ++dy) {
        for (i64 dx = 0; dx < block; ++dx) {
          const i64 co = k * block * block + dy * block + dx;
          for (i64 h = 0; h < y.shape().h; ++h) {
            const T* src = x.data() + x.index(n, k, h * block + dy, dx);
            T* dst = y.data() + y.index(n, co, h, 0);
            for (i64 w = 0; w < y.shape().w; ++w) {
              dst[w] = src[w * block];
            }
          }
        }
      }
    }
  }
  return y;
}

enum class Activation { relu, sigmoid, tanh };

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  Tensor<T> y(x.shape());
  switch (kind) {
    case Activation::relu:
      for (i64 i = 0; i < x.numel(); ++i) y.data()[i] = std::max(T{}, x.data()[i]);
      break;
    case Activation::sigmoid:
      for (i64 i = 0; i < x.numel(); ++i) y.data()[i] = sigmoid_scalar(x.data()[i]);
      break;
    case Activation::tanh:
      for (i64 i = 0; i < x.numel(); ++i) y.data()[i] = std::tanh(x.data()[i]);
      break;
  }
  return y;
}

/// d(activation)/dx expressed through the forward output y.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& y, const Tensor<T>& dy,
                              Activation kind) {
  Tensor<T> dx(y.shape());
  switch (kind) {
    case Activation::relu:
      for (i64 i = 0; i < y.numel(); ++i) {
        dx.data()[i] = y.data()[i] > T(0) ? dy.data()[i] : T{};
      }
      break;
    case Activation::sigmoid:
      for (i64 i = 0; i < y.numel(); ++i) {
        const T v = y.data()[i];
        dx.data()[i] = dy.data()[i] * v * (T(1) - v);
      }
      break;
    case Activation::tanh:
      for (i64 i = 0; i < y.numel(); ++i) {
        const T v = y.data()[i];
        dx.data()[i] = dy.data()[i] * (T(1) - v * v);
      }
      break;
  }
  return dx;
}

enum class Combine { add, average };

template <typename T>
Tensor<T> elementwise_combine(const Tensor<T>& a, const Tensor<T>& b,
                              Combine kind) {
  require_same_shape(a, b, "elementwise_combine");
  Tensor<T> y(a.shape());
  const T scale = kind == Combine::average ? T(0.5) : T(1);
  for (i64 i = 0; i < a.numel(); ++i) {
    y.data()[i] = (a.data()[i] + b.data()[i]) * scale;
  }
  return y;
}

template <typename T>
Tensor<T> elementwise_mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "elementwise_mul");
  Tensor<T> y(a.shape());
  for (i64 i = 0; i < a.numel(); ++i) y.data()[i] = a.data()[i] * b.data()[i];
  return y;
}

template <typename T>
Tensor<T> clamp01(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) {
    y.data()[i] = std::min(T(1), std::max(T(0), x.data()[i]));
  }
  return y;
}

template <typename T>
T sum_all(const Tensor<T>& x) {
  T acc{};
  for (i64 i = 0; i < x.numel(); ++i) acc += x.data()[i];
  return acc;
}

/// Mean absolute difference over all elements.
template <typename T>
T mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mean_abs_diff");
  T acc{};
  for (i64 i = 0; i < a.numel(); ++i) acc += std::abs(a.data()[i] - b.data()[i]);
  return acc / static_cast<T>(a.numel());
}

}  // namespace xrc
