#pragma once

// Video clips are Tensor<float> of shape (frames, channels, height, width)
// with values in [0, 1].

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "vderain/tensor.hpp"

namespace vderain {

using VideoClip = Tensor<float>;

struct ClipSample {
  std::string clip_id;
  VideoClip rainy;
  std::optional<VideoClip> clean;

  bool labeled() const { return clean.has_value(); }
  void validate() const {
    if (clean && clean->shape() != rainy.shape())
      throw ShapeError("clip " + clip_id + ": rainy " + shape_str(rainy.shape()) + " and clean " +
                       shape_str(clean->shape()) + " differ in shape");
  }
};

inline std::size_t frames(const VideoClip& c) { return c.dim(0); }
inline std::size_t channels(const VideoClip& c) { return c.dim(1); }
inline std::size_t height(const VideoClip& c) { return c.dim(2); }
inline std::size_t width(const VideoClip& c) { return c.dim(3); }

template <class T>
void require_clip_shape(const Tensor<T>& clip, const char* what) {
  if (clip.rank() != 4 || clip.dim(0) == 0 || clip.dim(2) == 0 || clip.dim(3) == 0)
    throw ShapeError(std::string(what) + ": expected a non-empty (n, c, h, w) clip, got " + shape_str(clip.shape()));
}

/// Throws unless the clip is rank 4, non-empty, finite and within [0, 1].
inline void validate_clip(const VideoClip& clip) {
  require_clip_shape(clip, "validate_clip");
  for (float v : clip)
    if (!std::isfinite(v) || v < 0.f || v > 1.f) throw ValueError("clip value " + std::to_string(v) + " outside [0,1]");
}

inline VideoClip clamp01(VideoClip clip) {
  for (auto& v : clip) v = std::clamp(v, 0.f, 1.f);
  return clip;
}

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
template <class T>
Tensor<T> rgb_to_luminance(const Tensor<T>& clip) {
  require_clip_shape(clip, "rgb_to_luminance");
  if (clip.dim(1) != 3) throw ShapeError("rgb_to_luminance needs 3 channels, got " + std::to_string(clip.dim(1)));
  const std::size_t n = clip.dim(0), plane = clip.dim(2) * clip.dim(3);
  Tensor<T> out({n, 1, clip.dim(2), clip.dim(3)});
  for (std::size_t t = 0; t < n; ++t) {
    const T* r = clip.data() + t * 3 * plane;
    const T* g = r + plane;
    const T* b = g + plane;
    T* y = out.data() + t * plane;
    for (std::size_t i = 0; i < plane; ++i) y[i] = T(0.299) * r[i] + T(0.587) * g[i] + T(0.114) * b[i];
  }
  return out;
}

/// Single-channel clips pass through; 3-channel clips are converted.
template <class T>
Tensor<T> luminance_of(const Tensor<T>& clip) {
  require_clip_shape(clip, "luminance_of");
  if (clip.dim(1) == 1) return clip;
  return rgb_to_luminance(clip);
}

inline VideoClip crop_fixed_patch(const VideoClip& clip, std::size_t top, std::size_t left, std::size_t size) {
  require_clip_shape(clip, "crop_fixed_patch");
  if (size == 0 || top + size > clip.dim(2) || left + size > clip.dim(3))
    throw ShapeError("crop window (" + std::to_string(top) + "," + std::to_string(left) + ") size " + std::to_string(size) +
                     " outside " + std::to_string(clip.dim(2)) + "x" + std::to_string(clip.dim(3)) + " frame");
  const std::size_t n = clip.dim(0), c = clip.dim(1);
  VideoClip out({n, c, size, size});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < size; ++y)
        std::copy_n(&clip.at(t, ch, top + y, left), size, &out.at(t, ch, y, std::size_t{0}));
  return out;
}

/// Consecutive non-overlapping chunks; a shorter tail is dropped.
inline std::vector<VideoClip> chunk_video(const VideoClip& clip, std::size_t chunk_len) {
  require_clip_shape(clip, "chunk_video");
  if (chunk_len == 0) throw ValueError("chunk_len must be >= 1");
  const std::size_t frame = clip.size() / clip.dim(0);
  std::vector<VideoClip> out;
  for (std::size_t start = 0; start + chunk_len <= clip.dim(0); start += chunk_len) {
    Shape s = clip.shape();
    s[0] = chunk_len;
    std::vector<float> data(clip.data() + start * frame, clip.data() + (start + chunk_len) * frame);
    out.emplace_back(s, std::move(data));
  }
  return out;
}

/// Frames [start, start + count) of a clip.
inline VideoClip frame_range(const VideoClip& clip, std::size_t start, std::size_t count) {
  require_clip_shape(clip, "frame_range");
  if (start + count > clip.dim(0) || count == 0) throw ShapeError("frame range outside clip");
  const std::size_t frame = clip.size() / clip.dim(0);
  Shape s = clip.shape();
  s[0] = count;
  return VideoClip(s, std::vector<float>(clip.data() + start * frame, clip.data() + (start + count) * frame));
}

/// Adds `src` (c_src channels) onto `dst`; a single-channel source is broadcast.
template <class T>
void add_broadcast(Tensor<T>& dst, const Tensor<T>& src, T scale = T(1)) {
  const Shape& d = dst.shape();
  const Shape& s = src.shape();
  if (s.size() != 4 || d.size() != 4 || s[0] != d[0] || s[2] != d[2] || s[3] != d[3] || (s[1] != d[1] && s[1] != 1))
    throw ShapeError("cannot broadcast " + shape_str(s) + " onto " + shape_str(d));
  const std::size_t plane = d[2] * d[3];
  for (std::size_t t = 0; t < d[0]; ++t)
    for (std::size_t c = 0; c < d[1]; ++c) {
      const T* a = src.data() + (t * s[1] + (s[1] == 1 ? 0 : c)) * plane;
      T* b = dst.data() + (t * d[1] + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) b[i] += scale * a[i];
    }
}

/// Sums a multi-channel clip over channels, the adjoint of `add_broadcast`.
template <class T>
Tensor<T> reduce_channels(const Tensor<T>& g, std::size_t to_channels) {
  if (g.dim(1) == to_channels) return g;
  if (to_channels != 1) throw ShapeError("reduce_channels supports reduction to 1 channel only");
  const std::size_t n = g.dim(0), c = g.dim(1), plane = g.dim(2) * g.dim(3);
  Tensor<T> out({n, 1, g.dim(2), g.dim(3)});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* a = g.data() + (t * c + ch) * plane;
      T* b = out.data() + t * plane;
      for (std::size_t i = 0; i < plane; ++i) b[i] += a[i];
    }
  return out;
}

/// Y = clamp(X + R, 0, 1); a 1-channel rain layer broadcasts over colour channels.
inline VideoClip composite_rainy(const VideoClip& clean, const VideoClip& rain) {
  require_clip_shape(clean, "composite_rainy");
  VideoClip y = clean;
  add_broadcast(y, rain);
  return clamp01(std::move(y));
}

}  // namespace vderain
