#pragma once

// Fidelity metrics on the luminance channel.

#include <array>
#include <cmath>
#include <vector>

#include "vderain/video.hpp"

namespace vderain {

inline constexpr double kPsnrCap = 100.0;

namespace detail {
inline void require_same_clip_shape(const VideoClip& a, const VideoClip& b, const char* what) {
  require_clip_shape(a, what);
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
}  // namespace detail

/// 10 log10(1 / MSE) over all luminance pixels, capped at 100 dB.
inline double psnr_luminance(const VideoClip& a, const VideoClip& b) {
  detail::require_same_clip_shape(a, b, "psnr_luminance");
  const VideoClip la = luminance_of(a), lb = luminance_of(b);
  double se = 0;
  for (std::size_t i = 0; i < la.size(); ++i) {
    const double d = static_cast<double>(la[i]) - static_cast<double>(lb[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(la.size());
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline constexpr int kSsimRadius = 5;

inline std::array<double, 2 * kSsimRadius + 1> ssim_kernel() {
  std::array<double, 2 * kSsimRadius + 1> k{};
  double s = 0;
  for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
    k[static_cast<std::size_t>(i + kSsimRadius)] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
    s += k[static_cast<std::size_t>(i + kSsimRadius)];
  }
  for (auto& v : k) v /= s;
  return k;
}

// Separable Gaussian filter keeping only positions where the window fits.
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w) {
  const auto k = ssim_kernel();
  const std::size_t win = k.size(), oh = h - win + 1, ow = w - win + 1;
  std::vector<double> tmp(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t i = 0; i < win; ++i) acc += k[i] * img[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t i = 0; i < win; ++i) acc += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

inline double ssim_frame(const float* a, const float* b, std::size_t h, std::size_t w) {
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const std::size_t n = h * w;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a[i];
    y[i] = b[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w), my = filter_valid(y, h, w);
  const auto sxx = filter_valid(xx, h, w), syy = filter_valid(yy, h, w), sxy = filter_valid(xy, h, w);
  double acc = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

}  // namespace detail

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2, data
/// range 1) over the valid window positions of each frame, averaged over frames.
inline double ssim_luminance(const VideoClip& a, const VideoClip& b) {
  detail::require_same_clip_shape(a, b, "ssim_luminance");
  const VideoClip la = luminance_of(a), lb = luminance_of(b);
  const std::size_t n = la.dim(0), h = la.dim(2), w = la.dim(3);
  if (h < 2 * detail::kSsimRadius + 1 || w < 2 * detail::kSsimRadius + 1)
    throw ShapeError("ssim_luminance needs frames of at least 11x11");
  double acc = 0;
  for (std::size_t t = 0; t < n; ++t) acc += detail::ssim_frame(la.data() + t * h * w, lb.data() + t * h * w, h, w);
  return acc / static_cast<double>(n);
}

}  // namespace vderain
