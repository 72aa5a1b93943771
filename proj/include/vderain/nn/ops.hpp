#pragma once

// Differentiable building blocks. Every forward has a matching backward that
// takes the forward input (not a hidden cache), so parameters stay read-only
// during evaluation and the caller decides what to keep alive.
//
// Feature maps use the (channels, depth, height, width) layout; depth is the
// frame axis for video and the batch axis for per-frame 2-D layers.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "vderain/tensor.hpp"

namespace vderain::nn {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// ---------------------------------------------------------------------------
// Fully connected layer: y = W x + b, applied to each row of a (batch, in) matrix.

template <class T>
struct Linear {
  Tensor<T> weight;  // (out, in)
  Tensor<T> bias;    // (out)

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : weight({out, in}), bias({out}) {}
  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + ".weight", self.weight);
    f(prefix + ".bias", self.bias);
  }
};

template <class T>
Tensor<T> linear_forward(const Linear<T>& layer, const Tensor<T>& x) {
  const std::size_t in = layer.in_features(), out = layer.out_features();
  if (x.rank() != 2 || x.dim(1) != in)
    throw ShapeError("linear expects (batch, " + std::to_string(in) + "), got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0);
  Tensor<T> y({batch, out});
  ConstMatrixMap<T> xm(x.data(), batch, in);
  ConstMatrixMap<T> wm(layer.weight.data(), out, in);
  MatrixMap<T> ym(y.data(), batch, out);
  ym.noalias() = xm * wm.transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(layer.bias.data(), out);
  ym.rowwise() += b;
  return y;
}

/// Accumulates parameter gradients into `grad` (when non-null) and returns dL/dx.
template <class T>
Tensor<T> linear_backward(const Linear<T>& layer, const Tensor<T>& x, const Tensor<T>& gy, Linear<T>* grad) {
  const std::size_t in = layer.in_features(), out = layer.out_features(), batch = x.dim(0);
  ConstMatrixMap<T> xm(x.data(), batch, in);
  ConstMatrixMap<T> gym(gy.data(), batch, out);
  if (grad) {
    MatrixMap<T> gw(grad->weight.data(), out, in);
    gw.noalias() += gym.transpose() * xm;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grad->bias.data(), out);
    gb += gym.colwise().sum();
  }
  Tensor<T> gx({batch, in});
  MatrixMap<T> gxm(gx.data(), batch, in);
  ConstMatrixMap<T> wm(layer.weight.data(), out, in);
  gxm.noalias() = gym * wm;
  return gx;
}

// ---------------------------------------------------------------------------
// 3-D convolution, stride 1, "same" output size (kernel extents must be odd).

enum class TemporalPadding { Zero, Replicate };

template <class T>
struct Conv3d {
  Tensor<T> weight;  // (out, in, kd, kh, kw)
  Tensor<T> bias;    // (out)

  Conv3d() = default;
  Conv3d(std::size_t in, std::size_t out, std::size_t kd, std::size_t kh, std::size_t kw)
      : weight({out, in, kd, kh, kw}), bias({out}) {
    if (kd % 2 == 0 || kh % 2 == 0 || kw % 2 == 0) throw ValueError("convolution kernel extents must be odd");
  }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t taps() const { return weight.dim(2) * weight.dim(3) * weight.dim(4); }

  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + ".weight", self.weight);
    f(prefix + ".bias", self.bias);
  }
};

namespace detail {

struct ConvGeometry {
  std::size_t c_in, depth, height, width;
  std::size_t kd, kh, kw, pd, ph, pw;
  std::size_t dp, hp, wp;  // padded extents
  std::size_t plane() const { return hp * wp; }
  std::size_t padded() const { return dp * hp * wp; }
  std::size_t first() const { return pd * plane() + ph * wp + pw; }
  std::size_t span() const {
    const std::size_t last = (pd + depth - 1) * plane() + (ph + height - 1) * wp + (pw + width - 1);
    return last + 1 - first();
  }
  std::size_t tap_offset(std::size_t a, std::size_t b, std::size_t c) const { return a * plane() + b * wp + c; }
};

template <class T>
ConvGeometry geometry(const Conv3d<T>& conv, const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(0) != conv.in_channels())
    throw ShapeError("conv3d expects (" + std::to_string(conv.in_channels()) + ", d, h, w), got " + shape_str(x.shape()));
  ConvGeometry g{};
  g.c_in = x.dim(0);
  g.depth = x.dim(1);
  g.height = x.dim(2);
  g.width = x.dim(3);
  g.kd = conv.weight.dim(2);
  g.kh = conv.weight.dim(3);
  g.kw = conv.weight.dim(4);
  g.pd = g.kd / 2;
  g.ph = g.kh / 2;
  g.pw = g.kw / 2;
  g.dp = g.depth + 2 * g.pd;
  g.hp = g.height + 2 * g.ph;
  g.wp = g.width + 2 * g.pw;
  return g;
}

template <class T>
Tensor<T> pad(const Tensor<T>& x, const ConvGeometry& g, TemporalPadding tp) {
  Tensor<T> xp({g.c_in, g.dp, g.hp, g.wp});
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t d = 0; d < g.dp; ++d) {
      std::size_t src_d;
      if (d < g.pd || d >= g.pd + g.depth) {
        if (tp == TemporalPadding::Zero) continue;
        src_d = d < g.pd ? 0 : g.depth - 1;
      } else {
        src_d = d - g.pd;
      }
      for (std::size_t h = 0; h < g.height; ++h)
        std::copy_n(&x.at(c, src_d, h, std::size_t{0}), g.width, &xp.at(c, d, h + g.ph, g.pw));
    }
  return xp;
}

// Rows ordered (in_channel, tap) so the weight tensor is already the matching
// (out, in * taps) matrix.
template <class T>
RowMatrix<T> columns(const Tensor<T>& xp, const ConvGeometry& g) {
  const std::size_t taps = g.kd * g.kh * g.kw, len = g.span(), n = g.padded();
  RowMatrix<T> col(g.c_in * taps, len);
  for (std::size_t c = 0; c < g.c_in; ++c) {
    std::size_t k = 0;
    for (std::size_t a = 0; a < g.kd; ++a)
      for (std::size_t b = 0; b < g.kh; ++b)
        for (std::size_t e = 0; e < g.kw; ++e, ++k)
          std::copy_n(xp.data() + c * n + g.tap_offset(a, b, e), len, col.row(c * taps + k).data());
  }
  return col;
}

}  // namespace detail

template <class T>
Tensor<T> conv3d_forward(const Conv3d<T>& conv, const Tensor<T>& x, TemporalPadding tp = TemporalPadding::Zero) {
  const auto g = detail::geometry(conv, x);
  const Tensor<T> xp = detail::pad(x, g, tp);
  const auto col = detail::columns(xp, g);
  const std::size_t c_out = conv.out_channels();
  ConstMatrixMap<T> wm(conv.weight.data(), c_out, g.c_in * conv.taps());
  RowMatrix<T> yp = wm * col;
  Tensor<T> y({c_out, g.depth, g.height, g.width});
  const std::size_t base = g.first();
  for (std::size_t o = 0; o < c_out; ++o) {
    const T b = conv.bias[o];
    for (std::size_t d = 0; d < g.depth; ++d)
      for (std::size_t h = 0; h < g.height; ++h) {
        const T* src = yp.row(o).data() + (d + g.pd) * g.plane() + (h + g.ph) * g.wp + g.pw - base;
        T* dst = &y.at(o, d, h, std::size_t{0});
        for (std::size_t w = 0; w < g.width; ++w) dst[w] = src[w] + b;
      }
  }
  return y;
}

/// Accumulates parameter gradients into `grad` (when non-null); returns dL/dx,
/// or an empty tensor when `need_input_grad` is false.
template <class T>
Tensor<T> conv3d_backward(const Conv3d<T>& conv, const Tensor<T>& x, const Tensor<T>& gy, Conv3d<T>* grad,
                          bool need_input_grad = true, TemporalPadding tp = TemporalPadding::Zero) {
  const auto g = detail::geometry(conv, x);
  const std::size_t c_out = conv.out_channels(), taps = conv.taps(), len = g.span(), base = g.first();
  if (gy.shape() != Shape{c_out, g.depth, g.height, g.width})
    throw ShapeError("conv3d_backward: gradient shape " + shape_str(gy.shape()));

  RowMatrix<T> gyp = RowMatrix<T>::Zero(c_out, len);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t d = 0; d < g.depth; ++d)
      for (std::size_t h = 0; h < g.height; ++h)
        std::copy_n(&gy.at(o, d, h, std::size_t{0}), g.width,
                    gyp.row(o).data() + (d + g.pd) * g.plane() + (h + g.ph) * g.wp + g.pw - base);

  if (grad) {
    const Tensor<T> xp = detail::pad(x, g, tp);
    const auto col = detail::columns(xp, g);
    MatrixMap<T> gw(grad->weight.data(), c_out, g.c_in * taps);
    gw.noalias() += gyp * col.transpose();
    for (std::size_t o = 0; o < c_out; ++o) grad->bias[o] += gyp.row(o).sum();
  }
  if (!need_input_grad) return {};

  ConstMatrixMap<T> wm(conv.weight.data(), c_out, g.c_in * taps);
  RowMatrix<T> gcol = wm.transpose() * gyp;
  Tensor<T> gxp({g.c_in, g.dp, g.hp, g.wp});
  const std::size_t n = g.padded();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    std::size_t k = 0;
    for (std::size_t a = 0; a < g.kd; ++a)
      for (std::size_t b = 0; b < g.kh; ++b)
        for (std::size_t e = 0; e < g.kw; ++e, ++k) {
          T* dst = gxp.data() + c * n + g.tap_offset(a, b, e);
          const T* src = gcol.row(c * taps + k).data();
          for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
        }
  }
  Tensor<T> gx({g.c_in, g.depth, g.height, g.width});
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t d = 0; d < g.dp; ++d) {
      std::size_t dst_d;
      if (d < g.pd || d >= g.pd + g.depth) {
        if (tp == TemporalPadding::Zero) continue;
        dst_d = d < g.pd ? 0 : g.depth - 1;
      } else {
        dst_d = d - g.pd;
      }
      for (std::size_t h = 0; h < g.height; ++h) {
        const T* src = &gxp.at(c, d, h + g.ph, g.pw);
        T* dst = &gx.at(c, dst_d, h, std::size_t{0});
        for (std::size_t w = 0; w < g.width; ++w) dst[w] += src[w];
      }
    }
  return gx;
}

// ---------------------------------------------------------------------------
// Sub-pixel rearrangements on (C, D, H, W). Channel index c*r*r + i*r + j holds
// the pixel at spatial offset (i, j) inside each r x r cell.

template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r) {
  if (x.rank() != 4) throw ShapeError("pixel_unshuffle expects rank 4");
  const std::size_t c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (r == 0 || h % r != 0 || w % r != 0)
    throw ShapeError("spatial size " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by shuffle factor " +
                     std::to_string(r));
  const std::size_t ho = h / r, wo = w / r;
  Tensor<T> y({c * r * r, d, ho, wo});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const std::size_t co = ci * r * r + i * r + j;
        for (std::size_t t = 0; t < d; ++t)
          for (std::size_t yy = 0; yy < ho; ++yy)
            for (std::size_t xx = 0; xx < wo; ++xx) y.at(co, t, yy, xx) = x.at(ci, t, yy * r + i, xx * r + j);
      }
  return y;
}

template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r) {
  if (x.rank() != 4) throw ShapeError("pixel_shuffle expects rank 4");
  const std::size_t cr = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (r == 0 || cr % (r * r) != 0) throw ShapeError("channel count not divisible by r^2");
  const std::size_t c = cr / (r * r);
  Tensor<T> y({c, d, h * r, w * r});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const std::size_t src = ci * r * r + i * r + j;
        for (std::size_t t = 0; t < d; ++t)
          for (std::size_t yy = 0; yy < h; ++yy)
            for (std::size_t xx = 0; xx < w; ++xx) y.at(ci, t, yy * r + i, xx * r + j) = x.at(src, t, yy, xx);
      }
  return y;
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities.

inline constexpr double kLeakySlope = 0.2;

template <class T>
Tensor<T> leaky_relu(Tensor<T> x) {
  for (auto& v : x) v = v > 0 ? v : T(kLeakySlope) * v;
  return x;
}

template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, Tensor<T> gy) {
  for (std::size_t i = 0; i < gy.size(); ++i)
    if (!(x[i] > 0)) gy[i] *= T(kLeakySlope);
  return gy;
}

template <class T>
Tensor<T> tanh(Tensor<T> x) {
  for (auto& v : x) v = std::tanh(v);
  return x;
}

/// Backward through tanh given its output y.
template <class T>
Tensor<T> tanh_backward(const Tensor<T>& y, Tensor<T> gy) {
  for (std::size_t i = 0; i < gy.size(); ++i) gy[i] *= T(1) - y[i] * y[i];
  return gy;
}

}  // namespace vderain::nn
