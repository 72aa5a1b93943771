#pragma once

// Monte Carlo EM training of the derainer with one dynamical rain generator
// per mini-batch.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vderain/dataset.hpp"
#include "vderain/inference.hpp"
#include "vderain/metrics.hpp"
#include "vderain/networks.hpp"
#include "vderain/optim.hpp"
#include "vderain/priors.hpp"

namespace vderain {

enum class TrainMode {
  S2VD,       // full loss on labeled + unlabeled batches
  Baseline1,  // supervised MSE only, labeled batches, no generators
  Baseline2,  // full loss with rho = 0, labeled batches only
  Baseline3,  // full loss with the configured rho, labeled batches only
};

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::S2VD: return "S2VD";
    case TrainMode::Baseline1: return "Baseline1";
    case TrainMode::Baseline2: return "Baseline2";
    case TrainMode::Baseline3: return "Baseline3";
  }
  return "?";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "S2VD") return TrainMode::S2VD;
  if (s == "Baseline1") return TrainMode::Baseline1;
  if (s == "Baseline2") return TrainMode::Baseline2;
  if (s == "Baseline3") return TrainMode::Baseline3;
  throw ConfigError("unknown training mode '" + s + "' (expected S2VD, Baseline1, Baseline2 or Baseline3)");
}

inline bool uses_unlabeled(TrainMode m) { return m == TrainMode::S2VD; }
inline bool uses_generators(TrainMode m) { return m != TrainMode::Baseline1; }

struct TrainConfig {
  PriorConfig prior;
  LangevinConfig langevin;
  DerainerConfig derainer;
  GeneratorConfig generator;
  double lr_transition = 1e-3;
  double lr_emission = 1e-4;
  double lr_derainer = 2e-4;
  std::size_t decay_every = 30;
  double decay_factor = 0.5;
  std::size_t pretrain_epochs = 5;
  std::size_t epochs = 60;
  TrainMode mode = TrainMode::S2VD;
  double clip_norm = 10.0;
  std::uint64_t seed = 0;

  void validate() const {
    prior.validate();
    langevin.validate();
    derainer.validate();
    generator.validate();
    if (!(lr_transition > 0 && lr_emission > 0 && lr_derainer > 0)) throw ValueError("learning rates must be > 0");
    if (!(clip_norm > 0)) throw ValueError("clip_norm must be > 0");
    if (pretrain_epochs >= epochs) throw ValueError("pretrain_epochs must be smaller than epochs");
  }

  double lr_at(double base, std::size_t epoch) const { return step_decay_lr(base, epoch, decay_every, decay_factor); }
};

// ---------------------------------------------------------------------------
// M-step loss

struct LossTerms {
  double likelihood = 0;    // mean((Y - f - R)^2) / (2 sigma^2)
  double mrf = 0;           // smoothness prior on f
  double ground_truth = 0;  // mean((f - X)^2) / eps0^2, or plain MSE in Baseline1
  double total() const { return likelihood + mrf + ground_truth; }
};

/// Which terms enter the loss.
struct LossSpec {
  bool likelihood = true;
  bool mrf = true;
  bool plain_mse = false;  // Baseline1: ground truth term is mean((f - X)^2) without 1/eps0^2
  double rho = 0.5;
};

inline LossSpec loss_spec(TrainMode mode, const PriorConfig& prior, bool pretraining = false) {
  LossSpec s;
  s.rho = prior.rho;
  switch (mode) {
    case TrainMode::Baseline1:
      s.likelihood = false;
      s.mrf = false;
      s.plain_mse = true;
      break;
    case TrainMode::Baseline2: s.rho = 0; break;
    case TrainMode::Baseline3:
    case TrainMode::S2VD: break;
  }
  if (pretraining) s.likelihood = false;
  return s;
}

/// Evaluates the M-step loss for one clip. `rain` may be null when the spec
/// has no likelihood term. Gradients w.r.t. f and R are accumulated (scaled by
/// `weight`) into the optional outputs.
template <class T>
LossTerms m_step_loss(const Tensor<T>& rainy, const Tensor<T>* clean, const Tensor<T>& f_out, const Tensor<T>* rain,
                      const PriorConfig& prior, const LangevinConfig& lcfg, const LossSpec& spec, T weight = T(1),
                      Tensor<T>* grad_f = nullptr, Tensor<T>* grad_rain = nullptr) {
  rainy.require_same(f_out);
  if (spec.plain_mse && !clean) throw ValueError("supervised MSE loss needs a clean clip");
  if (clean) clean->require_same(f_out);
  LossTerms terms;
  const T inv_count = T(1) / static_cast<T>(f_out.size());

  if (spec.likelihood) {
    if (!rain) throw ValueError("likelihood term needs the generator output");
    Tensor<T> residual = rainy - f_out;
    add_broadcast(residual, *rain, T(-1));
    const T inv_var = T(1) / static_cast<T>(lcfg.sigma * lcfg.sigma);
    T se = 0;
    for (T r : residual) se += r * r;
    terms.likelihood = static_cast<double>(T(0.5) * inv_var * se * inv_count);
    if (grad_f || grad_rain) {
      // d/d f and d/d R of the residual term are both -r / (sigma^2 N).
      for (auto& r : residual) r *= -weight * inv_var * inv_count;
      if (grad_f) *grad_f += residual;
      if (grad_rain) *grad_rain += reduce_channels(residual, rain->dim(1));
    }
  }
  if (spec.mrf && spec.rho > 0) {
    PriorConfig p = prior;
    p.rho = spec.rho;
    Tensor<T> g;
    if (grad_f) g = Tensor<T>(f_out.shape());
    terms.mrf = static_cast<double>(mrf_energy(f_out, p, grad_f ? &g : nullptr));
    if (grad_f) *grad_f += g * weight;
  }
  if (clean) {
    const T scale = spec.plain_mse ? T(1) : T(1) / static_cast<T>(prior.eps0_sq);
    T se = 0;
    for (std::size_t i = 0; i < f_out.size(); ++i) {
      const T d = f_out[i] - (*clean)[i];
      se += d * d;
      if (grad_f) (*grad_f)[i] += weight * T(2) * scale * inv_count * d;
    }
    terms.ground_truth = static_cast<double>(se * scale * inv_count);
  }
  return terms;
}

// ---------------------------------------------------------------------------
// Training state

struct BatchState {
  std::vector<std::size_t> members;
  bool labeled = false;
  GeneratorParams<float> generator;
  AdamState<TransitionParams<float>> transition_opt;
  AdamState<EmissionParams<float>> emission_opt;
  std::vector<LatentChain<float>> chains;  // one per member, same order
};

struct TrainState {
  DerainerParams<float> derainer;
  AdamState<DerainerParams<float>> derainer_opt;
  std::vector<BatchState> batches;  // the batch registry
  std::size_t epoch = 0;            // completed epochs
};

/// Builds the initial state: orthogonal networks, one generator per batch and
/// a standard-normal chain per clip. Baseline modes keep only labeled batches.
inline TrainState init_train_state(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.derainer = init_params<float>(cfg.derainer, stream_seed(cfg.seed, "derainer"));
  st.derainer_opt = AdamState<DerainerParams<float>>(st.derainer);
  for (std::size_t j = 0; j < data.batches.size(); ++j) {
    const auto& spec = data.batches[j];
    if (!spec.labeled && !uses_unlabeled(cfg.mode)) continue;
    BatchState b;
    b.members = spec.members;
    b.labeled = spec.labeled;
    b.generator = init_params<float>(cfg.generator, stream_seed(cfg.seed, "generator", j));
    b.transition_opt = AdamState<TransitionParams<float>>(b.generator.transition);
    b.emission_opt = AdamState<EmissionParams<float>>(b.generator.emission);
    for (auto idx : spec.members) {
      const auto& s = data.samples[idx];
      b.chains.push_back(init_chain<float>(s.clip_id, s.rainy.dim(0), cfg.generator.transition, stream_seed(cfg.seed, "chain/" + s.clip_id)));
    }
    st.batches.push_back(std::move(b));
  }
  return st;
}

/// Derains a clip with a trained network: forward pass, then clamp to [0, 1].
inline VideoClip derain_clip(const DerainerConfig& cfg, const DerainerParams<float>& w, const VideoClip& rainy) {
  return clamp01(derainer_forward(cfg, w, rainy));
}

struct ValidationScore {
  double psnr = 0;
  double ssim = 0;
};

inline ValidationScore evaluate_derainer(const DerainerConfig& cfg, const DerainerParams<float>& w,
                                         const std::vector<ClipSample>& clips) {
  ValidationScore s;
  if (clips.empty()) return s;
  for (const auto& c : clips) {
    if (!c.clean) throw ValueError("validation clip " + c.clip_id + " has no ground truth");
    const VideoClip out = derain_clip(cfg, w, c.rainy);
    s.psnr += psnr_luminance(out, *c.clean);
    s.ssim += ssim_luminance(out, *c.clean);
  }
  s.psnr /= static_cast<double>(clips.size());
  s.ssim /= static_cast<double>(clips.size());
  return s;
}

struct EpochLog {
  std::size_t epoch = 0;
  std::string batch_kind;  // "labeled" or "unlabeled"
  double mean_loss = 0;
  double val_psnr = 0;
  double val_ssim = 0;
  double lr_derainer = 0, lr_transition = 0, lr_emission = 0;
  double wall_seconds = 0;
};

struct BatchStepResult {
  LossTerms terms;  // averaged over the batch members
  bool skipped = false;
};

/// One E-step + M-step on batch `j` during epoch `epoch` (1-based). With
/// `e_step` false the chains are used as they are.
inline BatchStepResult train_batch(const Dataset& data, TrainState& st, std::size_t j, std::size_t epoch, const TrainConfig& cfg,
                                   bool e_step = true) {
  BatchState& b = st.batches[j];
  const bool pretraining = epoch <= cfg.pretrain_epochs;
  BatchStepResult res;
  if (pretraining && !b.labeled) {
    res.skipped = true;
    return res;
  }
  const bool with_generator = uses_generators(cfg.mode) && !pretraining;
  const LossSpec spec = loss_spec(cfg.mode, cfg.prior, pretraining);
  const float weight = 1.f / static_cast<float>(b.members.size());

  auto g_w = nn::zeros_like(st.derainer);
  auto g_theta = nn::zeros_like(b.generator);
  for (std::size_t i = 0; i < b.members.size(); ++i) {
    const ClipSample& s = data.samples[b.members[i]];
    DerainerTrace<float> trace;
    const Tensor<float> f = derainer_forward(cfg.derainer, st.derainer, s.rainy, &trace);
    if (!all_finite(f))
      throw ValueError("non-finite derainer output at epoch " + std::to_string(epoch) + ", batch " + std::to_string(j + 1));
    Tensor<float> g_f(f.shape());
    if (with_generator) {
      auto& chain = b.chains[i];
      if (e_step) {
        std::mt19937_64 rng(stream_seed(cfg.seed, "langevin/" + chain.clip_id, epoch));
        run_langevin(chain, s.rainy, f, cfg.generator, b.generator, cfg.langevin, rng);
      }
      GeneratorTrace<float> gtrace;
      const Tensor<float> rain = generate_rain(cfg.generator, b.generator, chain.latents, &gtrace);
      Tensor<float> g_r(rain.shape());
      const auto t = m_step_loss(s.rainy, s.clean ? &*s.clean : nullptr, f, &rain, cfg.prior, cfg.langevin, spec, weight, &g_f, &g_r);
      generator_backward(cfg.generator, b.generator, gtrace, g_r, &g_theta, nullptr);
      res.terms.likelihood += t.likelihood / static_cast<double>(b.members.size());
      res.terms.mrf += t.mrf / static_cast<double>(b.members.size());
      res.terms.ground_truth += t.ground_truth / static_cast<double>(b.members.size());
    } else {
      const auto t = m_step_loss<float>(s.rainy, s.clean ? &*s.clean : nullptr, f, nullptr, cfg.prior, cfg.langevin, spec,
                                        weight, &g_f, nullptr);
      res.terms.likelihood += t.likelihood / static_cast<double>(b.members.size());
      res.terms.mrf += t.mrf / static_cast<double>(b.members.size());
      res.terms.ground_truth += t.ground_truth / static_cast<double>(b.members.size());
    }
    derainer_backward(cfg.derainer, st.derainer, trace, g_f, &g_w);
  }
  if (!std::isfinite(res.terms.total()))
    throw ValueError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(j + 1));

  clip_grad_norm(g_w, cfg.clip_norm);
  adam_update(st.derainer, g_w, st.derainer_opt, cfg.lr_at(cfg.lr_derainer, epoch));
  if (with_generator) {
    clip_grad_norm(g_theta.transition, cfg.clip_norm);
    clip_grad_norm(g_theta.emission, cfg.clip_norm);
    adam_update(b.generator.transition, g_theta.transition, b.transition_opt, cfg.lr_at(cfg.lr_transition, epoch));
    adam_update(b.generator.emission, g_theta.emission, b.emission_opt, cfg.lr_at(cfg.lr_emission, epoch));
  }
  return res;
}

/// Batch-mean M-step loss at the current parameters and chains, no updates.
inline LossTerms batch_loss(const Dataset& data, const TrainState& st, std::size_t j, std::size_t epoch, const TrainConfig& cfg) {
  const BatchState& b = st.batches[j];
  const bool pretraining = epoch <= cfg.pretrain_epochs;
  const bool with_generator = uses_generators(cfg.mode) && !pretraining;
  const LossSpec spec = loss_spec(cfg.mode, cfg.prior, pretraining);
  LossTerms acc;
  for (std::size_t i = 0; i < b.members.size(); ++i) {
    const ClipSample& s = data.samples[b.members[i]];
    const Tensor<float> f = derainer_forward(cfg.derainer, st.derainer, s.rainy);
    std::optional<Tensor<float>> rain;
    if (with_generator) rain = generate_rain(cfg.generator, b.generator, b.chains[i].latents);
    const auto t = m_step_loss<float>(s.rainy, s.clean ? &*s.clean : nullptr, f, rain ? &*rain : nullptr, cfg.prior,
                                      cfg.langevin, spec);
    acc.likelihood += t.likelihood / static_cast<double>(b.members.size());
    acc.mrf += t.mrf / static_cast<double>(b.members.size());
    acc.ground_truth += t.ground_truth / static_cast<double>(b.members.size());
  }
  return acc;
}

/// Runs epochs st.epoch + 1 .. up_to (cfg.epochs when 0), visiting batches in
/// registry order. `on_epoch` receives the log rows of each finished epoch.
inline std::vector<EpochLog> em_train(const Dataset& data, TrainState& st, const TrainConfig& cfg,
                                      const std::vector<ClipSample>& validation = {}, std::size_t up_to = 0,
                                      const std::function<void(const std::vector<EpochLog>&)>& on_epoch = {}) {
  cfg.validate();
  if (up_to == 0 || up_to > cfg.epochs) up_to = cfg.epochs;
  std::vector<EpochLog> log;
  while (st.epoch < up_to) {
    const std::size_t epoch = st.epoch + 1;
    const auto start = std::chrono::steady_clock::now();
    double loss_sum[2] = {0, 0};
    std::size_t loss_n[2] = {0, 0};
    for (std::size_t j = 0; j < st.batches.size(); ++j) {
      const auto r = train_batch(data, st, j, epoch, cfg);
      if (r.skipped) continue;
      const int k = st.batches[j].labeled ? 0 : 1;
      loss_sum[k] += r.terms.total();
      ++loss_n[k];
    }
    st.epoch = epoch;
    const auto val = evaluate_derainer(cfg.derainer, st.derainer, validation);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<EpochLog> rows;
    for (int k = 0; k < 2; ++k) {
      if (!loss_n[k]) continue;
      EpochLog row;
      row.epoch = epoch;
      row.batch_kind = k == 0 ? "labeled" : "unlabeled";
      row.mean_loss = loss_sum[k] / static_cast<double>(loss_n[k]);
      row.val_psnr = val.psnr;
      row.val_ssim = val.ssim;
      row.lr_derainer = cfg.lr_at(cfg.lr_derainer, epoch);
      row.lr_transition = cfg.lr_at(cfg.lr_transition, epoch);
      row.lr_emission = cfg.lr_at(cfg.lr_emission, epoch);
      row.wall_seconds = secs;
      rows.push_back(row);
    }
    if (on_epoch) on_epoch(rows);
    log.insert(log.end(), rows.begin(), rows.end());
  }
  return log;
}

// ---------------------------------------------------------------------------
// Fitting a generator to a standalone rain layer

struct FitConfig {
  GeneratorConfig generator;
  LangevinConfig langevin;
  double lr_transition = 1e-3;
  double lr_emission = 1e-4;
  double clip_norm = 10.0;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
};

struct FitResult {
  GeneratorParams<float> generator;
  LatentChain<float> chain;
  VideoClip reconstruction;
  std::vector<double> losses;       // per-iteration M-step loss, prior included
  std::vector<double> data_losses;  // reconstruction term alone
};

/// Alternates Langevin E-steps on (s0, z, m) with Adam steps on theta that
/// minimise mean((R - G)^2) / (2 sigma^2) plus the latent prior.
inline FitResult fit_generator(const VideoClip& rain, const FitConfig& cfg,
                               const std::function<void(std::size_t, double)>& on_iter = {}) {
  require_clip_shape(rain, "fit_generator");
  cfg.generator.validate();
  cfg.langevin.validate();
  const auto& ec = cfg.generator.emission;
  if (rain.dim(1) != ec.out_channels || rain.dim(2) != ec.target_h || rain.dim(3) != ec.target_w)
    throw ShapeError("rain clip " + shape_str(rain.shape()) + " does not match the emission output size");
  FitResult res;
  res.generator = init_params<float>(cfg.generator, stream_seed(cfg.seed, "generator"));
  res.chain = init_chain<float>("rain", rain.dim(0), cfg.generator.transition, stream_seed(cfg.seed, "chain/rain"));
  AdamState<TransitionParams<float>> t_opt(res.generator.transition);
  AdamState<EmissionParams<float>> e_opt(res.generator.emission);
  const Tensor<float> background(rain.shape());

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    std::mt19937_64 rng(stream_seed(cfg.seed, "langevin/rain", it));
    run_langevin(res.chain, rain, background, cfg.generator, res.generator, cfg.langevin, rng);

    GeneratorTrace<float> trace;
    const Tensor<float> out = generate_rain(cfg.generator, res.generator, res.chain.latents, &trace);
    const float inv_count = 1.f / static_cast<float>(out.size());
    const float inv_var = static_cast<float>(1.0 / (cfg.langevin.sigma * cfg.langevin.sigma));
    Tensor<float> g(out.shape());
    double se = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const float d = out[i] - rain[i];
      se += static_cast<double>(d) * d;
      g[i] = d * inv_var * inv_count;
    }
    double prior = 0;
    res.chain.latents.for_each([&](const Tensor<float>& t) { prior += squared_norm(t); });
    const double data = 0.5 * static_cast<double>(inv_var) * se / static_cast<double>(out.size());
    const double loss = data + 0.5 * prior / static_cast<double>(res.chain.latents.count());
    if (!std::isfinite(loss)) throw ValueError("non-finite generator loss at iteration " + std::to_string(it));
    res.losses.push_back(loss);
    res.data_losses.push_back(data);

    auto g_theta = nn::zeros_like(res.generator);
    generator_backward(cfg.generator, res.generator, trace, g, &g_theta, nullptr);
    clip_grad_norm(g_theta.transition, cfg.clip_norm);
    clip_grad_norm(g_theta.emission, cfg.clip_norm);
    adam_update(res.generator.transition, g_theta.transition, t_opt, cfg.lr_transition);
    adam_update(res.generator.emission, g_theta.emission, e_opt, cfg.lr_emission);
    if (on_iter) on_iter(it, loss);
  }
  res.reconstruction = generate_rain(cfg.generator, res.generator, res.chain.latents);
  return res;
}

}  // namespace vderain
