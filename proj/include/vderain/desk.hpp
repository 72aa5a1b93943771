#pragma once

// Small synthetic benchmark: procedural rain composited over panning
// procedural scenes. Used by the make-dataset command and the acceptance runs.

#include <cstdint>
#include <string>
#include <vector>

#include "vderain/dataset.hpp"
#include "vderain/inference.hpp"
#include "vderain/synthesis.hpp"

namespace vderain {

struct DeskSpec {
  std::size_t labeled = 6;
  std::size_t unlabeled = 2;
  std::size_t validation = 2;
  std::size_t frames = 20;
  std::size_t size = 64;
  std::uint64_t seed = 0;
};

struct DeskClip {
  std::string name;
  VideoClip clean;
  VideoClip rain;
  VideoClip rainy;
};

struct DeskData {
  std::vector<DeskClip> labeled, unlabeled, validation;
};

/// Rain varies per clip in direction, density, length and intensity so the
/// unlabeled and validation clips are not copies of the labeled rain.
inline DeskClip make_desk_clip(const std::string& name, const DeskSpec& spec) {
  std::mt19937_64 rng(stream_seed(spec.seed, "desk/" + name));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SceneRecipe scene;
  scene.pan_dx = 1.5 * (u(rng) - 0.5);
  scene.pan_dy = 1.0 * (u(rng) - 0.5);
  scene.seed = rng();
  RainRecipe rain;
  rain.direction_deg = -20 + 40 * u(rng);
  rain.speed = 4 + 4 * u(rng);
  rain.density = 3 + 3 * u(rng);
  rain.length = 8 + 8 * u(rng);
  rain.intensity = 0.35 + 0.3 * u(rng);
  rain.seed = rng();
  DeskClip c;
  c.name = name;
  c.clean = procedural_scene(scene, spec.frames, spec.size, spec.size);
  c.rain = procedural_rain(rain, spec.frames, spec.size, spec.size);
  c.rainy = composite_rainy(c.clean, c.rain);
  return c;
}

inline DeskData make_desk_data(const DeskSpec& spec) {
  DeskData d;
  for (std::size_t i = 0; i < spec.labeled; ++i) d.labeled.push_back(make_desk_clip("labeled" + std::to_string(i), spec));
  for (std::size_t i = 0; i < spec.unlabeled; ++i) d.unlabeled.push_back(make_desk_clip("unlabeled" + std::to_string(i), spec));
  for (std::size_t i = 0; i < spec.validation; ++i) d.validation.push_back(make_desk_clip("validation" + std::to_string(i), spec));
  return d;
}

inline std::vector<LabeledSource> labeled_sources(const std::vector<DeskClip>& clips) {
  std::vector<LabeledSource> out;
  for (const auto& c : clips) out.push_back({c.name, c.rainy, c.clean});
  return out;
}

inline std::vector<UnlabeledSource> unlabeled_sources(const std::vector<DeskClip>& clips) {
  std::vector<UnlabeledSource> out;
  for (const auto& c : clips) out.push_back({c.name, c.rainy});
  return out;
}

inline std::vector<ClipSample> validation_samples(const std::vector<DeskClip>& clips) {
  std::vector<ClipSample> out;
  for (const auto& c : clips) out.push_back({c.name, c.rainy, c.clean});
  return out;
}

}  // namespace vderain
