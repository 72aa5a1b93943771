#pragma once

// E-step: persistent latent chains sampled with Langevin dynamics,
//   u <- u - (delta^2 / 2) dg/du + delta xi,   xi ~ N(0, I).

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vderain/networks.hpp"
#include "vderain/video.hpp"

namespace vderain {

struct LangevinConfig {
  double delta = 0.01;     // step size
  std::size_t steps = 5;   // Langevin steps per EM iteration
  double sigma = 0.05;     // residual noise std in pixel units
  bool noise_enabled = true;

  void validate() const {
    if (!(delta > 0)) throw ValueError("langevin delta must be > 0");
    if (steps < 1) throw ValueError("langevin steps must be >= 1");
    if (!(sigma > 0)) throw ValueError("sigma must be > 0");
  }
};

template <class T>
struct LatentChain {
  std::string clip_id;
  Latents<T> latents;
  bool operator==(const LatentChain&) const = default;
};

/// 64-bit mix of (seed, name, counter) used to key independent RNG streams.
inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view name, std::uint64_t counter = 0) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : name) h = (h ^ ch) * 0x100000001b3ull;
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(seed ^ h) + counter);
}

template <class T>
void fill_standard_normal(Tensor<T>& t, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : t) v = static_cast<T>(normal(rng));
}

/// s0, z_1..z_n and m drawn i.i.d. standard normal.
template <class T>
LatentChain<T> init_chain(const std::string& clip_id, std::size_t frames, const TransitionConfig& dims, std::uint64_t seed) {
  dims.validate();
  if (frames == 0) throw ValueError("init_chain: frames must be >= 1");
  LatentChain<T> chain{clip_id, zero_latents<T>(dims, frames)};
  std::mt19937_64 rng(seed);
  chain.latents.for_each([&](Tensor<T>& t) { fill_standard_normal(t, rng); });
  return chain;
}

template <class T>
struct EnergyResult {
  T energy;
  Latents<T> grad;
};

/// g = 1/(2 sigma^2) mean((Y - B - G)^2) + 0.5 (|z|^2 + |s0|^2 + |m|^2) / latent_count,
/// with G broadcast over the channels of Y. Returns g and dg/d(s0, z, m).
template <class T>
EnergyResult<T> latent_energy(const GeneratorConfig& gcfg, const GeneratorParams<T>& theta, const Latents<T>& lat,
                              const Tensor<T>& rainy, const Tensor<T>& background, double sigma) {
  rainy.require_same(background);
  GeneratorTrace<T> trace;
  const Tensor<T> rain = generate_rain(gcfg, theta, lat, &trace);
  Tensor<T> residual = rainy - background;
  add_broadcast(residual, rain, T(-1));

  const T inv_count = T(1) / static_cast<T>(residual.size());
  const T inv_var = T(1) / static_cast<T>(sigma * sigma);
  Tensor<T> g_full(residual.shape());
  T se = 0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    se += residual[i] * residual[i];
    g_full[i] = -residual[i] * inv_var * inv_count;
  }
  EnergyResult<T> out;
  out.energy = T(0.5) * inv_var * se * inv_count;
  generator_backward(gcfg, theta, trace, reduce_channels(g_full, rain.dim(1)), nullptr, &out.grad);

  const T inv_latent = T(1) / static_cast<T>(lat.count());
  T prior = 0;
  const Tensor<T>* src[] = {&lat.s0, &lat.z, &lat.m};
  Tensor<T>* dst[] = {&out.grad.s0, &out.grad.z, &out.grad.m};
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < src[k]->size(); ++i) {
      const T u = (*src[k])[i];
      prior += u * u;
      (*dst[k])[i] += u * inv_latent;
    }
  out.energy += T(0.5) * prior * inv_latent;
  if (!std::isfinite(static_cast<double>(out.energy))) throw ValueError("latent energy is not finite");
  return out;
}

/// One Langevin update of every latent component. `noise` may be null to
/// disable the injected Gaussian term.
template <class T>
void langevin_step(Latents<T>& lat, const Latents<T>& grad, double delta, std::mt19937_64* noise) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double drift = 0.5 * delta * delta;
  Tensor<T>* dst[] = {&lat.s0, &lat.z, &lat.m};
  const Tensor<T>* g[] = {&grad.s0, &grad.z, &grad.m};
  for (int k = 0; k < 3; ++k) {
    dst[k]->require_same(*g[k]);
    if (!all_finite(*g[k])) throw ValueError("langevin_step: non-finite gradient");
  }
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < dst[k]->size(); ++i) {
      double u = static_cast<double>((*dst[k])[i]) - drift * static_cast<double>((*g[k])[i]);
      if (noise) u += delta * normal(*noise);
      (*dst[k])[i] = static_cast<T>(u);
    }
}

inline constexpr double kDivergenceFactor = 1e6;

/// Runs cfg.steps Langevin updates on `chain` in place, warm-starting from its
/// current state. `energy_fn(latents)` returns the energy and its gradient.
/// Optionally records the energy before each step and after the last one.
template <class T, class EnergyFn>
void run_langevin(LatentChain<T>& chain, EnergyFn&& energy_fn, const LangevinConfig& cfg, std::mt19937_64& rng,
                  std::vector<double>* energies = nullptr) {
  cfg.validate();
  EnergyResult<T> cur = energy_fn(chain.latents);
  const double initial = static_cast<double>(cur.energy);
  const double limit = kDivergenceFactor * std::max(std::abs(initial), 1.0);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    if (energies) energies->push_back(static_cast<double>(cur.energy));
    langevin_step(chain.latents, cur.grad, cfg.delta, cfg.noise_enabled ? &rng : nullptr);
    try {
      cur = energy_fn(chain.latents);
    } catch (const ValueError&) {
      throw DivergenceError("Langevin chain for clip '" + chain.clip_id + "' produced a non-finite energy");
    }
    if (static_cast<double>(cur.energy) > limit)
      throw DivergenceError("Langevin chain for clip '" + chain.clip_id + "' diverged: energy " +
                            std::to_string(static_cast<double>(cur.energy)) + " vs initial " + std::to_string(initial));
  }
  if (energies) energies->push_back(static_cast<double>(cur.energy));
}

/// E-step for one clip: samples the chain's posterior given the rainy clip and
/// the current background estimate f(Y; W_old).
template <class T>
void run_langevin(LatentChain<T>& chain, const Tensor<T>& rainy, const Tensor<T>& background, const GeneratorConfig& gcfg,
                  const GeneratorParams<T>& theta, const LangevinConfig& cfg, std::mt19937_64& rng,
                  std::vector<double>* energies = nullptr) {
  run_langevin(
      chain, [&](const Latents<T>& lat) { return latent_energy(gcfg, theta, lat, rainy, background, cfg.sigma); }, cfg, rng,
      energies);
}

}  // namespace vderain
