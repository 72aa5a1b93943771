#pragma once

// Derainer f(Y; W) and the dynamical rain generator G(s0, z, m; theta).

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "vderain/nn/init.hpp"
#include "vderain/nn/ops.hpp"
#include "vderain/nn/params.hpp"
#include "vderain/tensor.hpp"

namespace vderain {

using nn::Conv3d;
using nn::Linear;
using nn::TemporalPadding;

// ===========================================================================
// Derainer
// ===========================================================================

struct DerainerConfig {
  std::size_t channels = 3;     // image channels of Y
  std::size_t shuffle = 2;      // pixel-(un)shuffle factor r
  std::size_t width = 32;       // feature channels inside the network
  std::size_t blocks = 4;       // residual blocks
  std::size_t kernel_t = 3;     // temporal kernel extent
  std::size_t kernel_s = 3;     // spatial kernel extent
  bool global_skip = true;      // output = input + predicted correction
  bool zero_tail = false;       // zero the last convolution at init (identity start with global_skip)
  TemporalPadding temporal_padding = TemporalPadding::Zero;

  void validate() const {
    if (channels == 0 || shuffle == 0 || width == 0) throw ValueError("derainer: channels, shuffle, width must be >= 1");
    if (kernel_t % 2 == 0 || kernel_s % 2 == 0) throw ValueError("derainer: kernel extents must be odd");
  }
};

template <class T>
struct ResBlock {
  Conv3d<T> conv1, conv2;
};

template <class T>
struct DerainerParams {
  using value_type = T;
  Conv3d<T> head;
  std::vector<ResBlock<T>> blocks;
  Conv3d<T> tail;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    Conv3d<T>::visit(self.head, "derainer.head", f);
    for (std::size_t i = 0; i < self.blocks.size(); ++i) {
      const std::string p = "derainer.block" + std::to_string(i);
      Conv3d<T>::visit(self.blocks[i].conv1, p + ".conv1", f);
      Conv3d<T>::visit(self.blocks[i].conv2, p + ".conv2", f);
    }
    Conv3d<T>::visit(self.tail, "derainer.tail", f);
  }
};

namespace detail {
template <class P>
void orthogonal_init_all(P& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::for_each_param(params, [&](const std::string& name, auto& t) {
    if (name.ends_with(".bias"))
      t.fill(0);
    else
      nn::orthogonal_(t, rng);
  });
}
}  // namespace detail

/// Orthogonal weights (kernels flattened to (out, in*taps)), zero biases.
template <class T>
DerainerParams<T> init_params(const DerainerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t io = cfg.channels * cfg.shuffle * cfg.shuffle;
  const std::size_t kt = cfg.kernel_t, ks = cfg.kernel_s;
  DerainerParams<T> p;
  p.head = Conv3d<T>(io, cfg.width, kt, ks, ks);
  p.blocks.resize(cfg.blocks);
  for (auto& b : p.blocks) {
    b.conv1 = Conv3d<T>(cfg.width, cfg.width, kt, ks, ks);
    b.conv2 = Conv3d<T>(cfg.width, cfg.width, kt, ks, ks);
  }
  p.tail = Conv3d<T>(cfg.width, io, kt, ks, ks);
  detail::orthogonal_init_all(p, seed);
  if (cfg.zero_tail) p.tail.weight.fill(0);
  return p;
}

/// Intermediate activations kept for the backward pass.
template <class T>
struct DerainerTrace {
  Tensor<T> unshuffled;             // head input
  std::vector<Tensor<T>> block_in;  // input of each residual block
  std::vector<Tensor<T>> block_mid; // conv1 output of each block (pre-activation)
  Tensor<T> tail_in_pre;            // last features before the tail activation
};

namespace detail {
inline void check_derainer_input(const DerainerConfig& cfg, const Shape& s) {
  if (s.size() != 4) throw ShapeError("derainer expects an (n, c, h, w) clip, got " + shape_str(s));
  if (s[1] != cfg.channels)
    throw ShapeError("derainer configured for " + std::to_string(cfg.channels) + " channels, clip has " + std::to_string(s[1]));
  if (s[2] % cfg.shuffle != 0 || s[3] % cfg.shuffle != 0)
    throw ShapeError("clip size " + std::to_string(s[2]) + "x" + std::to_string(s[3]) + " not divisible by shuffle factor " +
                     std::to_string(cfg.shuffle));
}
}  // namespace detail

/// Pixel-unshuffle -> 3-D conv -> residual blocks -> 3-D conv -> pixel-shuffle,
/// plus an optional global skip. Output is not clamped; see `derain_clip`.
template <class T>
Tensor<T> derainer_forward(const DerainerConfig& cfg, const DerainerParams<T>& w, const Tensor<T>& y,
                           DerainerTrace<T>* trace = nullptr) {
  detail::check_derainer_input(cfg, y.shape());
  const auto tp = cfg.temporal_padding;
  const Tensor<T> x = swap_leading_axes(y);  // (c, n, h, w)
  Tensor<T> u = nn::pixel_unshuffle(x, cfg.shuffle);
  Tensor<T> h = nn::conv3d_forward(w.head, u, tp);
  if (trace) {
    trace->unshuffled = std::move(u);
    trace->block_in.clear();
    trace->block_mid.clear();
  }
  for (const auto& b : w.blocks) {
    Tensor<T> mid = nn::conv3d_forward(b.conv1, nn::leaky_relu(h), tp);
    Tensor<T> out = nn::conv3d_forward(b.conv2, nn::leaky_relu(mid), tp);
    out += h;
    if (trace) {
      trace->block_in.push_back(std::move(h));
      trace->block_mid.push_back(std::move(mid));
    }
    h = std::move(out);
  }
  Tensor<T> t = nn::conv3d_forward(w.tail, nn::leaky_relu(h), tp);
  if (trace) trace->tail_in_pre = std::move(h);
  Tensor<T> o = nn::pixel_shuffle(t, cfg.shuffle);
  if (cfg.global_skip) o += x;
  return swap_leading_axes(o);
}

/// Backpropagates dL/d(output); accumulates into `grad` (when non-null) and
/// returns dL/dY.
template <class T>
Tensor<T> derainer_backward(const DerainerConfig& cfg, const DerainerParams<T>& w, const DerainerTrace<T>& trace,
                            const Tensor<T>& grad_out, DerainerParams<T>* grad) {
  const auto tp = cfg.temporal_padding;
  const Tensor<T> go = swap_leading_axes(grad_out);
  Tensor<T> gt = nn::pixel_unshuffle(go, cfg.shuffle);
  Tensor<T> gh = nn::conv3d_backward(w.tail, nn::leaky_relu(trace.tail_in_pre), gt, grad ? &grad->tail : nullptr, true, tp);
  gh = nn::leaky_relu_backward(trace.tail_in_pre, std::move(gh));
  for (std::size_t i = w.blocks.size(); i-- > 0;) {
    const auto& b = w.blocks[i];
    const Tensor<T>& in = trace.block_in[i];
    const Tensor<T>& mid = trace.block_mid[i];
    Tensor<T> g_mid = nn::conv3d_backward(b.conv2, nn::leaky_relu(mid), gh, grad ? &grad->blocks[i].conv2 : nullptr, true, tp);
    g_mid = nn::leaky_relu_backward(mid, std::move(g_mid));
    Tensor<T> g_in = nn::conv3d_backward(b.conv1, nn::leaky_relu(in), g_mid, grad ? &grad->blocks[i].conv1 : nullptr, true, tp);
    gh += nn::leaky_relu_backward(in, std::move(g_in));
  }
  Tensor<T> gu = nn::conv3d_backward(w.head, trace.unshuffled, gh, grad ? &grad->head : nullptr, true, tp);
  Tensor<T> gx = nn::pixel_shuffle(gu, cfg.shuffle);
  if (cfg.global_skip) gx += go;
  return swap_leading_axes(gx);
}

// ===========================================================================
// Dynamical rain generator
// ===========================================================================

struct TransitionConfig {
  std::size_t state_dim = 64;
  std::size_t noise_dim = 32;
  std::size_t appearance_dim = 64;
  std::size_t hidden = 128;

  void validate() const {
    if (!state_dim || !noise_dim || !appearance_dim || !hidden) throw ValueError("transition dims must be >= 1");
  }
};

struct EmissionConfig {
  std::size_t seed_size = 8;                        // spatial side of the seed feature map
  std::size_t seed_channels = 64;
  std::vector<std::size_t> stage_channels{16, 8, 8};  // channels after each x2 sub-pixel stage
  std::size_t out_channels = 1;
  std::size_t target_h = 64;
  std::size_t target_w = 64;
  // Output level at initialisation, set through the final bias. Rain layers
  // are sparse; starting at 0.5 makes Adam overshoot into tanh saturation.
  double initial_level = 0.02;

  std::size_t stages() const { return stage_channels.size(); }
  void validate() const {
    if (!seed_size || !seed_channels || !out_channels) throw ValueError("emission dims must be >= 1");
    for (auto c : stage_channels)
      if (!c) throw ValueError("emission stage channels must be >= 1");
    if (!(initial_level > 0 && initial_level < 1)) throw ValueError("emission initial_level must be in (0, 1)");
    const std::size_t side = seed_size << stages();
    if (side != target_h || side != target_w)
      throw ValueError("emission seed size x 2^stages (" + std::to_string(side) + ") must equal target size " +
                       std::to_string(target_h) + "x" + std::to_string(target_w));
  }
};

template <class T>
struct TransitionParams {
  using value_type = T;
  Linear<T> fc1, fc2;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    Linear<T>::visit(self.fc1, "transition.fc1", f);
    Linear<T>::visit(self.fc2, "transition.fc2", f);
  }
};

template <class T>
struct EmissionParams {
  using value_type = T;
  Linear<T> fc;
  std::vector<Conv3d<T>> stages;
  Conv3d<T> out;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    Linear<T>::visit(self.fc, "emission.fc", f);
    for (std::size_t i = 0; i < self.stages.size(); ++i)
      Conv3d<T>::visit(self.stages[i], "emission.stage" + std::to_string(i), f);
    Conv3d<T>::visit(self.out, "emission.out", f);
  }
};

template <class T>
struct GeneratorParams {
  using value_type = T;
  TransitionParams<T> transition;
  EmissionParams<T> emission;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    TransitionParams<T>::visit(self.transition, f);
    EmissionParams<T>::visit(self.emission, f);
  }
};

struct GeneratorConfig {
  TransitionConfig transition;
  EmissionConfig emission;
  void validate() const {
    transition.validate();
    emission.validate();
  }
};

template <class T>
GeneratorParams<T> init_params(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& tc = cfg.transition;
  const auto& ec = cfg.emission;
  GeneratorParams<T> p;
  p.transition.fc1 = Linear<T>(tc.state_dim + tc.noise_dim + tc.appearance_dim, tc.hidden);
  p.transition.fc2 = Linear<T>(tc.hidden, tc.state_dim);
  p.emission.fc = Linear<T>(tc.state_dim, ec.seed_channels * ec.seed_size * ec.seed_size);
  std::size_t c = ec.seed_channels;
  for (auto next : ec.stage_channels) {
    p.emission.stages.emplace_back(c, 4 * next, 1, 3, 3);
    c = next;
  }
  p.emission.out = Conv3d<T>(c, ec.out_channels, 1, 3, 3);
  detail::orthogonal_init_all(p, seed);
  p.emission.out.bias.fill(static_cast<T>(std::atanh(2 * ec.initial_level - 1)));
  return p;
}

/// Latent inputs of the generator for one clip: s0 (d_s), z (n, d_z), m (d_m).
template <class T>
struct Latents {
  Tensor<T> s0;
  Tensor<T> z;
  Tensor<T> m;

  std::size_t frames() const { return z.dim(0); }
  std::size_t count() const { return s0.size() + z.size() + m.size(); }
  template <class F>
  void for_each(F&& f) {
    f(s0);
    f(z);
    f(m);
  }
  template <class F>
  void for_each(F&& f) const {
    f(s0);
    f(z);
    f(m);
  }
  bool operator==(const Latents&) const = default;
};

template <class T>
Latents<T> zero_latents(const TransitionConfig& tc, std::size_t frames) {
  return {Tensor<T>({tc.state_dim}), Tensor<T>({frames, tc.noise_dim}), Tensor<T>({tc.appearance_dim})};
}

namespace detail {
inline void check_latents(const TransitionConfig& tc, const Shape& s0, const Shape& z, const Shape& m) {
  if (s0 != Shape{tc.state_dim} || m != Shape{tc.appearance_dim} || z.size() != 2 || z[1] != tc.noise_dim || z[0] == 0)
    throw ShapeError("generator latents have shapes s0" + shape_str(s0) + " z" + shape_str(z) + " m" + shape_str(m) +
                     ", expected s0(" + std::to_string(tc.state_dim) + ") z(n," + std::to_string(tc.noise_dim) + ") m(" +
                     std::to_string(tc.appearance_dim) + ")");
}
}  // namespace detail

/// One transition s_t = tanh(FC2(tanh(FC1([s_prev; z_t; m])))). When `hidden`
/// is non-null the inner activation is stored there.
template <class T>
Tensor<T> transition_step(const TransitionConfig& tc, const TransitionParams<T>& alpha, const Tensor<T>& s_prev,
                          const Tensor<T>& z_t, const Tensor<T>& m, Tensor<T>* hidden = nullptr) {
  if (s_prev.size() != tc.state_dim || z_t.size() != tc.noise_dim || m.size() != tc.appearance_dim)
    throw ShapeError("transition_step: input dims (" + std::to_string(s_prev.size()) + ", " + std::to_string(z_t.size()) +
                     ", " + std::to_string(m.size()) + ") do not match config");
  Tensor<T> in({1, tc.state_dim + tc.noise_dim + tc.appearance_dim});
  std::copy(s_prev.begin(), s_prev.end(), in.begin());
  std::copy(z_t.begin(), z_t.end(), in.begin() + static_cast<std::ptrdiff_t>(tc.state_dim));
  std::copy(m.begin(), m.end(), in.begin() + static_cast<std::ptrdiff_t>(tc.state_dim + tc.noise_dim));
  Tensor<T> h = nn::tanh(nn::linear_forward(alpha.fc1, in));
  Tensor<T> s = nn::tanh(nn::linear_forward(alpha.fc2, h));
  if (hidden) *hidden = std::move(h);
  s.reshape({tc.state_dim});
  return s;
}

template <class T>
struct EmissionTrace {
  Tensor<T> states;                  // (n, d_s)
  Tensor<T> seed;                    // (C0, n, S, S)
  std::vector<Tensor<T>> stage_pre;  // post-shuffle, pre-activation per stage
  Tensor<T> tanh_out;                // (out_c, n, H, W)
};

/// Emits one frame per row of `states` (n, d_s); returns (n, out_c, H, W) in [0,1].
template <class T>
Tensor<T> emit_frames(const EmissionConfig& ec, const EmissionParams<T>& beta, const Tensor<T>& states,
                      EmissionTrace<T>* trace = nullptr) {
  if (states.rank() != 2 || states.dim(1) != beta.fc.in_features())
    throw ShapeError("emission expects states (n, " + std::to_string(beta.fc.in_features()) + "), got " + shape_str(states.shape()));
  const std::size_t n = states.dim(0);
  Tensor<T> seed = nn::linear_forward(beta.fc, states);
  seed.reshape({n, ec.seed_channels, ec.seed_size, ec.seed_size});
  seed = swap_leading_axes(seed);
  Tensor<T> h = seed;
  if (trace) {
    trace->states = states;
    trace->seed = std::move(seed);
    trace->stage_pre.clear();
  }
  for (const auto& conv : beta.stages) {
    Tensor<T> pre = nn::pixel_shuffle(nn::conv3d_forward(conv, h), 2);
    h = nn::leaky_relu(pre);
    if (trace) trace->stage_pre.push_back(std::move(pre));
  }
  Tensor<T> y = nn::tanh(nn::conv3d_forward(beta.out, h));
  Tensor<T> frames = y;
  for (auto& v : frames) v = (v + T(1)) * T(0.5);
  if (trace) trace->tanh_out = std::move(y);
  return swap_leading_axes(frames);
}

/// Single-state convenience wrapper: returns (out_c, H, W).
template <class T>
Tensor<T> emit_frame(const EmissionConfig& ec, const EmissionParams<T>& beta, const Tensor<T>& state) {
  Tensor<T> s = state.reshaped({1, state.size()});
  Tensor<T> f = emit_frames(ec, beta, s);
  f.reshape({ec.out_channels, ec.target_h, ec.target_w});
  return f;
}

/// Returns dL/d(states); accumulates parameter gradients into `grad` when non-null.
template <class T>
Tensor<T> emission_backward(const EmissionConfig& ec, const EmissionParams<T>& beta, const EmissionTrace<T>& trace,
                            const Tensor<T>& grad_frames, EmissionParams<T>* grad) {
  Tensor<T> g = swap_leading_axes(grad_frames);
  for (auto& v : g) v *= T(0.5);
  g = nn::tanh_backward(trace.tanh_out, std::move(g));
  const std::size_t ns = beta.stages.size();
  const Tensor<T> last_in = ns ? nn::leaky_relu(trace.stage_pre.back()) : trace.seed;
  g = nn::conv3d_backward(beta.out, last_in, g, grad ? &grad->out : nullptr);
  for (std::size_t i = ns; i-- > 0;) {
    g = nn::pixel_unshuffle(nn::leaky_relu_backward(trace.stage_pre[i], std::move(g)), 2);
    const Tensor<T> in = i ? nn::leaky_relu(trace.stage_pre[i - 1]) : trace.seed;
    g = nn::conv3d_backward(beta.stages[i], in, g, grad ? &grad->stages[i] : nullptr);
  }
  g = swap_leading_axes(g);
  const std::size_t n = trace.states.dim(0);
  g.reshape({n, ec.seed_channels * ec.seed_size * ec.seed_size});
  return nn::linear_backward(beta.fc, trace.states, g, grad ? &grad->fc : nullptr);
}

template <class T>
struct GeneratorTrace {
  Tensor<T> inputs;   // (n, d_s + d_z + d_m), transition inputs per step
  Tensor<T> hidden;   // (n, hidden)
  Tensor<T> states;   // (n, d_s), s_1..s_n
  EmissionTrace<T> emission;
};

/// R = G(s0, z, m; theta): unrolls the transition for t = 1..n and emits each
/// state. Returns an (n, out_c, H, W) clip.
template <class T>
Tensor<T> generate_rain(const GeneratorConfig& cfg, const GeneratorParams<T>& theta, const Latents<T>& lat,
                        GeneratorTrace<T>* trace = nullptr) {
  const auto& tc = cfg.transition;
  detail::check_latents(tc, lat.s0.shape(), lat.z.shape(), lat.m.shape());
  const std::size_t n = lat.z.dim(0), din = tc.state_dim + tc.noise_dim + tc.appearance_dim;
  Tensor<T> inputs({n, din}), hidden({n, tc.hidden}), states({n, tc.state_dim});
  Tensor<T> s = lat.s0, h, z_t({tc.noise_dim});
  for (std::size_t t = 0; t < n; ++t) {
    std::copy_n(lat.z.data() + t * tc.noise_dim, tc.noise_dim, z_t.data());
    T* row = inputs.data() + t * din;
    std::copy(s.begin(), s.end(), row);
    std::copy(z_t.begin(), z_t.end(), row + tc.state_dim);
    std::copy(lat.m.begin(), lat.m.end(), row + tc.state_dim + tc.noise_dim);
    s = transition_step(tc, theta.transition, s, z_t, lat.m, &h);
    std::copy(h.begin(), h.end(), hidden.data() + t * tc.hidden);
    std::copy(s.begin(), s.end(), states.data() + t * tc.state_dim);
  }
  Tensor<T> frames = emit_frames(cfg.emission, theta.emission, states, trace ? &trace->emission : nullptr);
  if (trace) {
    trace->inputs = std::move(inputs);
    trace->hidden = std::move(hidden);
    trace->states = std::move(states);
  }
  return frames;
}

/// Backpropagation through time. Accumulates into `grad_theta` and/or
/// `grad_latents` (either may be null; latents grads are overwritten).
template <class T>
void generator_backward(const GeneratorConfig& cfg, const GeneratorParams<T>& theta, const GeneratorTrace<T>& trace,
                        const Tensor<T>& grad_frames, std::type_identity_t<GeneratorParams<T>>* grad_theta,
                        std::type_identity_t<Latents<T>>* grad_latents) {
  const auto& tc = cfg.transition;
  const Tensor<T> g_states =
      emission_backward(cfg.emission, theta.emission, trace.emission, grad_frames, grad_theta ? &grad_theta->emission : nullptr);
  const std::size_t n = trace.states.dim(0), ds = tc.state_dim, dz = tc.noise_dim, dm = tc.appearance_dim;
  const std::size_t din = ds + dz + dm;
  Latents<T> gl = zero_latents<T>(tc, n);
  Tensor<T> carry({ds});
  Tensor<T> g_pre({1, ds}), x_row({1, din}), h_row({1, tc.hidden});
  for (std::size_t t = n; t-- > 0;) {
    const T* s_t = trace.states.data() + t * ds;
    for (std::size_t k = 0; k < ds; ++k) {
      const T g = g_states[t * ds + k] + carry[k];
      g_pre[k] = g * (T(1) - s_t[k] * s_t[k]);
    }
    std::copy_n(trace.hidden.data() + t * tc.hidden, tc.hidden, h_row.data());
    std::copy_n(trace.inputs.data() + t * din, din, x_row.data());
    Tensor<T> g_h = nn::linear_backward(theta.transition.fc2, h_row, g_pre, grad_theta ? &grad_theta->transition.fc2 : nullptr);
    for (std::size_t k = 0; k < tc.hidden; ++k) g_h[k] *= T(1) - h_row[k] * h_row[k];
    Tensor<T> g_in = nn::linear_backward(theta.transition.fc1, x_row, g_h, grad_theta ? &grad_theta->transition.fc1 : nullptr);
    std::copy_n(g_in.data(), ds, carry.data());
    std::copy_n(g_in.data() + ds, dz, gl.z.data() + t * dz);
    for (std::size_t k = 0; k < dm; ++k) gl.m[k] += g_in[ds + dz + k];
  }
  gl.s0 = std::move(carry);
  if (grad_latents) *grad_latents = std::move(gl);
}

}  // namespace vderain
