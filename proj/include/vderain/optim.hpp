#pragma once

#include <cmath>
#include <cstdint>

#include "vderain/nn/params.hpp"

namespace vderain {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments for one parameter struct.
template <class P>
struct AdamState {
  P m;
  P v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(const P& like) : m(nn::zeros_like(like)), v(nn::zeros_like(like)) {}
};

template <class P>
void adam_update(P& params, const P& grad, AdamState<P>& state, double lr, const AdamOptions& opt = {}) {
  using T = typename P::value_type;
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  auto pt = nn::param_tensors(params);
  auto gt = nn::param_tensors(grad);
  auto mt = nn::param_tensors(state.m);
  auto vt = nn::param_tensors(state.v);
  for (std::size_t k = 0; k < pt.size(); ++k) {
    auto& p = *pt[k];
    const auto& g = *gt[k];
    auto& m = *mt[k];
    auto& v = *vt[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = opt.beta1 * static_cast<double>(m[i]) + (1 - opt.beta1) * gi;
      const double vi = opt.beta2 * static_cast<double>(v[i]) + (1 - opt.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * (mi / bc1) / (std::sqrt(vi / bc2) + opt.eps));
    }
  }
}

/// Rescales `grad` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
template <class P>
double clip_grad_norm(P& grad, double max_norm) {
  using T = typename P::value_type;
  const double norm = std::sqrt(nn::param_squared_norm(grad));
  if (norm > max_norm && norm > 0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto* t : nn::param_tensors(grad)) *t *= s;
  }
  return norm;
}

/// Step decay: base * 0.5^floor((epoch - 1) / every), epochs counted from 1.
inline double step_decay_lr(double base, std::size_t epoch, std::size_t every = 30, double factor = 0.5) {
  if (epoch == 0 || every == 0) return base;
  return base * std::pow(factor, static_cast<double>((epoch - 1) / every));
}

}  // namespace vderain
