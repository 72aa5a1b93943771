#pragma once

// Frame directories: lexicographically ordered 8-bit PNG files. Saved frames are
// named frame_%05d.png.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vderain/tensor_io.hpp"
#include "vderain/video.hpp"

namespace vderain {

namespace detail {

struct PngFrame {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<png_byte> pixels;
};

inline PngFrame read_png(const std::filesystem::path& path, int force_channels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read image " + path.string() + ": " + image.message);
  const bool color = force_channels ? force_channels == 3 : (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  PngFrame f;
  f.width = image.width;
  f.height = image.height;
  f.channels = color ? 3 : 1;
  f.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, f.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode image " + path.string() + ": " + image.message);
  }
  return f;
}

inline void write_png(const std::filesystem::path& path, const std::vector<png_byte>& pixels, std::size_t w, std::size_t h,
                      std::size_t channels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr))
    throw IoError("cannot write image " + path.string() + ": " + image.message);
}

}  // namespace detail

inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// Loads every PNG in `dir` (sorted by name) into an (n, c, h, w) clip scaled by 1/255.
/// The first frame decides between grayscale and RGB.
inline VideoClip load_frames_dir(const std::filesystem::path& dir) {
  const auto files = list_frames(dir);
  if (files.empty()) throw IoError("no PNG frames in " + dir.string());
  const auto first = detail::read_png(files.front(), 0);
  const std::size_t c = first.channels, h = first.height, w = first.width;
  VideoClip clip({files.size(), c, h, w});
  for (std::size_t t = 0; t < files.size(); ++t) {
    const auto f = t == 0 ? first : detail::read_png(files[t], static_cast<int>(c));
    if (f.width != w || f.height != h)
      throw ShapeError("frame " + files[t].filename().string() + " is " + std::to_string(f.width) + "x" +
                       std::to_string(f.height) + ", expected " + std::to_string(w) + "x" + std::to_string(h));
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          clip.at(t, ch, y, x) = static_cast<float>(f.pixels[(y * w + x) * c + ch]) / 255.f;
  }
  return clip;
}

inline std::uint8_t quantize8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

/// Writes frame_00000.png, frame_00001.png, ... (1 or 3 channels), rounding to nearest.
inline void save_frames_dir(const std::filesystem::path& dir, const VideoClip& clip) {
  require_clip_shape(clip, "save_frames_dir");
  const std::size_t n = clip.dim(0), c = clip.dim(1), h = clip.dim(2), w = clip.dim(3);
  if (c != 1 && c != 3) throw ShapeError("frames must have 1 or 3 channels, got " + std::to_string(c));
  std::filesystem::create_directories(dir);
  std::vector<png_byte> pixels(h * w * c);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) pixels[(y * w + x) * c + ch] = quantize8(clip.at(t, ch, y, x));
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.png", t);
    detail::write_png(dir / name, pixels, w, h, c);
  }
}

/// Accepts either a frame directory or a tensor container file.
inline VideoClip load_clip(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_frames_dir(path);
  VideoClip clip = read_tensor_container(path.string());
  require_clip_shape(clip, "load_clip");
  return clip;
}

}  // namespace vderain
