#pragma once

// Fixed training set: each source video is cut into non-overlapping chunks,
// each chunk gets one spatial crop chosen at build time, and the resulting
// clips are partitioned once into labeled and unlabeled mini-batches.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vderain/inference.hpp"
#include "vderain/video.hpp"

namespace vderain {

struct LabeledSource {
  std::string name;
  VideoClip rainy;
  VideoClip clean;
};

struct UnlabeledSource {
  std::string name;
  VideoClip rainy;
};

struct DatasetConfig {
  std::size_t patch = 64;
  std::size_t chunk_len = 20;
  std::size_t batch_size = 12;
  std::uint64_t seed = 0;
};

struct BatchSpec {
  std::vector<std::size_t> members;  // indices into Dataset::samples
  bool labeled = false;
};

struct Dataset {
  std::vector<ClipSample> samples;
  std::vector<BatchSpec> batches;  // labeled batches first, then unlabeled
  std::size_t labeled_batches = 0;
  std::size_t unlabeled_batches = 0;
};

namespace detail {

inline ClipSample cut_sample(const std::string& name, std::size_t chunk, const VideoClip& rainy, const VideoClip* clean,
                             const DatasetConfig& cfg) {
  if (cfg.patch > rainy.dim(2) || cfg.patch > rainy.dim(3))
    throw ShapeError("source " + name + " (" + std::to_string(rainy.dim(2)) + "x" + std::to_string(rainy.dim(3)) +
                     ") is smaller than the patch size " + std::to_string(cfg.patch));
  std::mt19937_64 rng(stream_seed(cfg.seed, "crop/" + name, chunk));
  std::uniform_int_distribution<std::size_t> top(0, rainy.dim(2) - cfg.patch), left(0, rainy.dim(3) - cfg.patch);
  const std::size_t y = top(rng), x = left(rng);
  ClipSample s;
  s.clip_id = name + "#" + std::to_string(chunk);
  s.rainy = crop_fixed_patch(rainy, y, x, cfg.patch);
  if (clean) s.clean = crop_fixed_patch(*clean, y, x, cfg.patch);
  return s;
}

inline std::vector<std::vector<std::size_t>> partition(std::vector<std::size_t> ids, std::size_t batch, std::uint64_t seed,
                                                       const char* kind) {
  std::mt19937_64 rng(stream_seed(seed, std::string("partition/") + kind));
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i + batch <= ids.size(); i += batch) {
    std::vector<std::size_t> b(ids.begin() + static_cast<std::ptrdiff_t>(i), ids.begin() + static_cast<std::ptrdiff_t>(i + batch));
    std::sort(b.begin(), b.end());
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

inline Dataset build_dataset(const std::vector<LabeledSource>& labeled, const std::vector<UnlabeledSource>& unlabeled,
                             const DatasetConfig& cfg) {
  if (cfg.batch_size == 0 || cfg.chunk_len == 0 || cfg.patch == 0) throw ValueError("dataset sizes must be >= 1");
  std::vector<ClipSample> pool;
  std::vector<std::size_t> lab_ids, unl_ids;
  for (const auto& src : labeled) {
    if (src.rainy.shape() != src.clean.shape()) throw ShapeError("labeled source " + src.name + ": rainy/clean shape mismatch");
    const auto rc = chunk_video(src.rainy, cfg.chunk_len);
    const auto cc = chunk_video(src.clean, cfg.chunk_len);
    for (std::size_t k = 0; k < rc.size(); ++k) {
      lab_ids.push_back(pool.size());
      pool.push_back(detail::cut_sample(src.name, k, rc[k], &cc[k], cfg));
    }
  }
  for (const auto& src : unlabeled) {
    const auto rc = chunk_video(src.rainy, cfg.chunk_len);
    for (std::size_t k = 0; k < rc.size(); ++k) {
      unl_ids.push_back(pool.size());
      pool.push_back(detail::cut_sample(src.name, k, rc[k], nullptr, cfg));
    }
  }
  if (lab_ids.size() < cfg.batch_size)
    throw ValueError("insufficient labeled data: " + std::to_string(lab_ids.size()) + " clips for batch size " +
                     std::to_string(cfg.batch_size));
  if (!unlabeled.empty() && unl_ids.size() < cfg.batch_size)
    throw ValueError("insufficient unlabeled data: " + std::to_string(unl_ids.size()) + " clips for batch size " +
                     std::to_string(cfg.batch_size));

  const auto lab_batches = detail::partition(lab_ids, cfg.batch_size, cfg.seed, "labeled");
  const auto unl_batches = detail::partition(unl_ids, cfg.batch_size, cfg.seed, "unlabeled");

  // Keep only clips that landed in a batch, renumbered in batch order.
  Dataset ds;
  auto add = [&](const std::vector<std::vector<std::size_t>>& groups, bool is_labeled) {
    for (const auto& g : groups) {
      BatchSpec b;
      b.labeled = is_labeled;
      for (auto id : g) {
        b.members.push_back(ds.samples.size());
        ds.samples.push_back(pool[id]);
      }
      ds.batches.push_back(std::move(b));
    }
  };
  add(lab_batches, true);
  add(unl_batches, false);
  ds.labeled_batches = lab_batches.size();
  ds.unlabeled_batches = unl_batches.size();
  return ds;
}

}  // namespace vderain
