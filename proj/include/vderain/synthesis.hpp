#pragma once

// Procedural rain layers and panning background scenes for building
// synthetic rainy/clean training pairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "vderain/video.hpp"

namespace vderain {

struct RainRecipe {
  double direction_deg = 10.0;  // from vertical, positive leans right
  double speed = 6.0;           // pixels per frame along the streak direction
  double density = 2.0;         // streaks per kilopixel
  double length = 12.0;         // pixels
  double width = 1.0;           // pixels
  double intensity = 0.5;       // peak value in (0, 1]
  double jitter_deg = 0.0;      // std of per-frame direction noise
  std::uint64_t seed = 0;

  void validate() const {
    if (!(density > 0)) throw ValueError("rain density must be > 0");
    if (!(intensity > 0 && intensity <= 1)) throw ValueError("rain intensity must be in (0, 1]");
    if (!(length >= 1)) throw ValueError("rain streak length must be >= 1");
    if (!(width > 0)) throw ValueError("rain streak width must be > 0");
    if (!(speed >= 0) || !(jitter_deg >= 0)) throw ValueError("rain speed and jitter must be >= 0");
  }
};

/// Renders an (n, 1, h, w) rain layer. Streaks live on a torus larger than the
/// frame so they wrap off-screen; each frame they advance by `speed` along the
/// (jittered) direction. Overlapping streaks combine by maximum.
inline VideoClip procedural_rain(const RainRecipe& recipe, std::size_t n, std::size_t h, std::size_t w) {
  recipe.validate();
  if (n == 0 || h == 0 || w == 0) throw ValueError("procedural_rain: dimensions must be >= 1");
  const double margin = std::ceil(recipe.length / 2 + recipe.width + recipe.speed + 2);
  const double ext_h = static_cast<double>(h) + 2 * margin, ext_w = static_cast<double>(w) + 2 * margin;
  const auto count = static_cast<std::size_t>(std::llround(recipe.density * ext_h * ext_w / 1000.0));

  std::mt19937_64 rng(recipe.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  struct Streak {
    double x, y, amp;
  };
  std::vector<Streak> streaks(count);
  for (auto& s : streaks) {
    s.x = uni(rng) * ext_w;
    s.y = uni(rng) * ext_h;
    s.amp = recipe.intensity * (0.6 + 0.4 * uni(rng));
  }

  VideoClip clip({n, 1, h, w});
  const double deg = std::numbers::pi / 180.0;
  double dx = 0, dy = 0;
  const double half_len = recipe.length / 2 + 0.5, half_wid = recipe.width / 2 + 0.5;
  for (std::size_t t = 0; t < n; ++t) {
    const double theta = (recipe.direction_deg + (recipe.jitter_deg > 0 ? recipe.jitter_deg * normal(rng) : 0.0)) * deg;
    const double ux = std::sin(theta), uy = std::cos(theta);
    if (t > 0) {
      dx += recipe.speed * ux;
      dy += recipe.speed * uy;
    }
    const double rx = std::abs(ux) * half_len + std::abs(uy) * half_wid + 1;
    const double ry = std::abs(uy) * half_len + std::abs(ux) * half_wid + 1;
    float* frame = clip.data() + t * h * w;
    for (const auto& s : streaks) {
      double cx = std::fmod(s.x + dx, ext_w), cy = std::fmod(s.y + dy, ext_h);
      if (cx < 0) cx += ext_w;
      if (cy < 0) cy += ext_h;
      cx -= margin;
      cy -= margin;
      const long x0 = std::max(0L, static_cast<long>(std::floor(cx - rx)));
      const long x1 = std::min(static_cast<long>(w) - 1, static_cast<long>(std::ceil(cx + rx)));
      const long y0 = std::max(0L, static_cast<long>(std::floor(cy - ry)));
      const long y1 = std::min(static_cast<long>(h) - 1, static_cast<long>(std::ceil(cy + ry)));
      for (long y = y0; y <= y1; ++y)
        for (long x = x0; x <= x1; ++x) {
          const double px = (static_cast<double>(x) + 0.5) - cx, py = (static_cast<double>(y) + 0.5) - cy;
          const double along = px * ux + py * uy;
          const double perp = px * uy - py * ux;
          const double cov = std::clamp(half_len - std::abs(along), 0.0, 1.0) * std::clamp(half_wid - std::abs(perp), 0.0, 1.0);
          if (cov <= 0) continue;
          float& v = frame[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
          v = std::max(v, static_cast<float>(s.amp * cov));
        }
    }
  }
  return clip;
}

struct SceneRecipe {
  double pan_dx = 0.7;  // pixels per frame
  double pan_dy = 0.3;
  std::size_t shapes = 40;
  double texture = 0.05;  // amplitude of fine value-noise texture
  std::uint64_t seed = 0;
};

namespace detail {
// Bilinearly interpolated lattice noise with the given cell size.
inline std::vector<double> value_noise(std::size_t h, std::size_t w, double cell, std::mt19937_64& rng) {
  const std::size_t gh = static_cast<std::size_t>(std::ceil(static_cast<double>(h) / cell)) + 2;
  const std::size_t gw = static_cast<std::size_t>(std::ceil(static_cast<double>(w) / cell)) + 2;
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> grid(gh * gw);
  for (auto& g : grid) g = uni(rng);
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
      const auto iy = static_cast<std::size_t>(fy), ix = static_cast<std::size_t>(fx);
      double ty = fy - static_cast<double>(iy), tx = fx - static_cast<double>(ix);
      ty = ty * ty * (3 - 2 * ty);
      tx = tx * tx * (3 - 2 * tx);
      const double a = grid[iy * gw + ix], b = grid[iy * gw + ix + 1];
      const double c = grid[(iy + 1) * gw + ix], d = grid[(iy + 1) * gw + ix + 1];
      out[y * w + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  return out;
}
}  // namespace detail

/// A clean (n, 3, h, w) clip: a camera panning over a synthetic image made of
/// smooth colour fields, soft-edged shapes and fine texture.
inline VideoClip procedural_scene(const SceneRecipe& recipe, std::size_t n, std::size_t h, std::size_t w) {
  if (n == 0 || h == 0 || w == 0) throw ValueError("procedural_scene: dimensions must be >= 1");
  const double span_x = std::abs(recipe.pan_dx) * static_cast<double>(n), span_y = std::abs(recipe.pan_dy) * static_cast<double>(n);
  const std::size_t bw = w + static_cast<std::size_t>(std::ceil(span_x)) + 4;
  const std::size_t bh = h + static_cast<std::size_t>(std::ceil(span_y)) + 4;
  std::mt19937_64 rng(recipe.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<double> base(3 * bh * bw);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto low = detail::value_noise(bh, bw, 48.0, rng);
    const auto mid = detail::value_noise(bh, bw, 12.0, rng);
    const double offset = 0.35 + 0.3 * uni(rng);
    for (std::size_t i = 0; i < bh * bw; ++i) base[c * bh * bw + i] = offset + 0.25 * low[i] + 0.08 * mid[i];
  }
  for (std::size_t k = 0; k < recipe.shapes; ++k) {
    const double cx = uni(rng) * static_cast<double>(bw), cy = uni(rng) * static_cast<double>(bh);
    const double rx = 3 + 12 * uni(rng), ry = 3 + 12 * uni(rng);
    const bool box = uni(rng) < 0.5;
    double col[3];
    for (double& v : col) v = 0.1 + 0.8 * uni(rng);
    const double alpha = 0.5 + 0.5 * uni(rng);
    for (std::size_t y = 0; y < bh; ++y)
      for (std::size_t x = 0; x < bw; ++x) {
        const double px = (static_cast<double>(x) - cx) / rx, py = (static_cast<double>(y) - cy) / ry;
        const double d = box ? std::max(std::abs(px), std::abs(py)) : std::sqrt(px * px + py * py);
        const double cover = alpha * std::clamp((1.0 - d) * std::min(rx, ry), 0.0, 1.0);
        if (cover <= 0) continue;
        for (std::size_t c = 0; c < 3; ++c) {
          double& v = base[c * bh * bw + y * bw + x];
          v = v * (1 - cover) + col[c] * cover;
        }
      }
  }
  const auto fine = detail::value_noise(bh, bw, 2.0, rng);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < bh * bw; ++i)
      base[c * bh * bw + i] = std::clamp(base[c * bh * bw + i] + recipe.texture * fine[i], 0.0, 1.0);

  VideoClip clip({n, 3, h, w});
  const double ox = recipe.pan_dx < 0 ? span_x + 1 : 1, oy = recipe.pan_dy < 0 ? span_y + 1 : 1;
  for (std::size_t t = 0; t < n; ++t) {
    const double sx = ox + recipe.pan_dx * static_cast<double>(t), sy = oy + recipe.pan_dy * static_cast<double>(t);
    const auto ix = static_cast<std::size_t>(std::floor(sx)), iy = static_cast<std::size_t>(std::floor(sy));
    const double fx = sx - std::floor(sx), fy = sy - std::floor(sy);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double* b = base.data() + c * bh * bw;
          const std::size_t r0 = (iy + y) * bw + ix + x, r1 = r0 + bw;
          const double v = (b[r0] * (1 - fx) + b[r0 + 1] * fx) * (1 - fy) + (b[r1] * (1 - fx) + b[r1 + 1] * fx) * fy;
          clip.at(t, c, y, x) = static_cast<float>(v);
        }
  }
  return clip;
}

}  // namespace vderain
