#pragma once

// Background priors: Markov-random-field smoothness on the derainer output and
// the ground-truth term for labeled clips. All energies use mean reduction
// over the pixel count of the clip.

#include <array>
#include <cmath>

#include "vderain/tensor.hpp"
#include "vderain/video.hpp"

namespace vderain {

struct PriorConfig {
  double rho = 0.5;
  std::array<double, 3> gamma{1.0, 1.0, 2.0};  // weights for (vertical, horizontal, temporal) differences
  double eps0_sq = 1e-6;
  double charbonnier_eps = 1e-3;

  void validate() const {
    if (!(rho >= 0)) throw ValueError("rho must be >= 0");
    for (double g : gamma)
      if (!(g >= 0)) throw ValueError("gamma entries must be >= 0");
    if (!(eps0_sq > 0)) throw ValueError("eps0_sq must be > 0");
    if (!(charbonnier_eps > 0)) throw ValueError("charbonnier_eps must be > 0");
  }
};

/// sqrt(x^2 + eps^2), a smooth stand-in for |x|.
template <class T>
T charbonnier_abs(T x, T eps) {
  return std::sqrt(x * x + eps * eps);
}

template <class T>
T charbonnier_abs_derivative(T x, T eps) {
  return x / std::sqrt(x * x + eps * eps);
}

/// rho / N * sum over channels and valid positions of
///   g1 A(f[i+1,j,t] - f[i,j,t]) + g2 A(f[i,j+1,t] - f[i,j,t]) + g3 A(f[i,j,t+1] - f[i,j,t]),
/// with A = charbonnier_abs, N = total element count and no wraparound.
/// Adds dE/df into `grad` when non-null.
template <class T>
T mrf_energy(const Tensor<T>& f, const PriorConfig& cfg, Tensor<T>* grad = nullptr) {
  require_clip_shape(f, "mrf_energy");
  if (!all_finite(f)) throw ValueError("mrf_energy: non-finite input");
  if (grad) f.require_same(*grad);
  const std::size_t n = f.dim(0), c = f.dim(1), h = f.dim(2), w = f.dim(3);
  const std::size_t frame = c * h * w;
  const T eps = static_cast<T>(cfg.charbonnier_eps);
  const T scale = static_cast<T>(cfg.rho) / static_cast<T>(f.size());
  const T g1 = static_cast<T>(cfg.gamma[0]), g2 = static_cast<T>(cfg.gamma[1]), g3 = static_cast<T>(cfg.gamma[2]);
  const T* p = f.data();
  T* gp = grad ? grad->data() : nullptr;
  T acc = 0;
  auto term = [&](std::size_t a, std::size_t b, T weight) {
    const T d = p[b] - p[a];
    acc += weight * charbonnier_abs(d, eps);
    if (gp) {
      const T g = scale * weight * charbonnier_abs_derivative(d, eps);
      gp[b] += g;
      gp[a] -= g;
    }
  };
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const std::size_t idx = t * frame + (ch * h + i) * w + j;
          if (i + 1 < h) term(idx, idx + w, g1);
          if (j + 1 < w) term(idx, idx + 1, g2);
          if (t + 1 < n) term(idx, idx + frame, g3);
        }
  return scale * acc;
}

/// mean((f - X)^2) / eps0^2 + mrf_energy(f).
template <class T>
T labeled_prior_energy(const Tensor<T>& f, const Tensor<T>& clean, const PriorConfig& cfg, Tensor<T>* grad = nullptr) {
  f.require_same(clean);
  const T inv = T(1) / (static_cast<T>(cfg.eps0_sq) * static_cast<T>(f.size()));
  T se = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const T d = f[i] - clean[i];
    se += d * d;
    if (grad) (*grad)[i] += T(2) * inv * d;
  }
  return se * inv + mrf_energy(f, cfg, grad);
}

}  // namespace vderain
