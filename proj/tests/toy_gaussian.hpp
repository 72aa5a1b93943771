#pragma once

// Linear-Gaussian toy for the Langevin sampler: identity emission over a
// 2x2 frame, frozen linear transition s1 = B [s0; z1; m], n = 1, d_z = 4.
// The mean-reduced energy
//   g(u) = |y - B u|^2 / (2 sigma^2 P) + |u|^2 / (2 K)
// has the Gaussian posterior N(mu, Lambda^-1) with
//   Lambda = B^T B / (sigma^2 P) + I / K,  mu = Lambda^-1 B^T y / (sigma^2 P).

#include <Eigen/Dense>
#include <random>

#include "vderain/inference.hpp"

namespace toy {

using vderain::EnergyResult;
using vderain::Latents;
using vderain::Tensor;

struct LinearGaussian {
  static constexpr int kState = 4, kNoise = 4, kAppearance = 1, kLatent = kState + kNoise + kAppearance, kPixels = 4;
  double sigma = 0.5;
  Eigen::MatrixXd B;  // kPixels x kLatent
  Eigen::VectorXd y;  // observed frame

  explicit LinearGaussian(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd g(kLatent, kPixels);
    for (int i = 0; i < g.size(); ++i) g.data()[i] = n(rng);
    // orthonormal rows so the observed directions share one curvature
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    B = Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(kLatent, kPixels)).transpose();
    y = Eigen::VectorXd(kPixels);
    for (int i = 0; i < kPixels; ++i) y[i] = 3 * n(rng);
  }

  static Eigen::VectorXd pack(const Latents<double>& l) {
    Eigen::VectorXd u(kLatent);
    int k = 0;
    l.for_each([&](const Tensor<double>& t) {
      for (double v : t) u[k++] = v;
    });
    return u;
  }

  static Latents<double> unpack(const Eigen::VectorXd& u) {
    Latents<double> l{Tensor<double>({kState}), Tensor<double>({1, kNoise}), Tensor<double>({kAppearance})};
    int k = 0;
    l.for_each([&](Tensor<double>& t) {
      for (auto& v : t) v = u[k++];
    });
    return l;
  }

  double scale() const { return sigma * sigma * kPixels; }

  EnergyResult<double> energy(const Latents<double>& l) const {
    const Eigen::VectorXd u = pack(l);
    const Eigen::VectorXd r = y - B * u;
    const double e = r.squaredNorm() / (2 * scale()) + u.squaredNorm() / (2.0 * kLatent);
    const Eigen::VectorXd g = -B.transpose() * r / scale() + u / double(kLatent);
    return {e, unpack(g)};
  }

  Eigen::MatrixXd precision() const {
    return B.transpose() * B / scale() + Eigen::MatrixXd::Identity(kLatent, kLatent) / double(kLatent);
  }
  Eigen::VectorXd posterior_mean() const { return precision().ldlt().solve(B.transpose() * y / scale()); }
  Eigen::VectorXd posterior_var() const { return precision().inverse().diagonal(); }
};

struct SampleStats {
  Eigen::VectorXd mean, var;
  double mean_rel_err = 0, var_rel_err = 0;  // var error: worst marginal
};

/// One persistent chain: `burn` steps, then `samples` draws taken every `thin` steps.
inline SampleStats sample_posterior(const LinearGaussian& m, double delta, std::size_t burn, std::size_t samples,
                                    std::size_t thin, std::uint64_t seed) {
  vderain::LangevinConfig cfg;
  cfg.delta = delta;
  cfg.steps = burn;
  vderain::LatentChain<double> chain{"toy", LinearGaussian::unpack(Eigen::VectorXd::Zero(LinearGaussian::kLatent))};
  std::mt19937_64 rng(seed);
  auto fn = [&](const Latents<double>& l) { return m.energy(l); };
  vderain::run_langevin(chain, fn, cfg, rng);
  cfg.steps = thin;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(LinearGaussian::kLatent), ss = s;
  for (std::size_t k = 0; k < samples; ++k) {
    vderain::run_langevin(chain, fn, cfg, rng);
    const Eigen::VectorXd u = LinearGaussian::pack(chain.latents);
    s += u;
    ss += u.cwiseProduct(u);
  }
  SampleStats st;
  const double n = static_cast<double>(samples);
  st.mean = s / n;
  st.var = (ss / n - st.mean.cwiseProduct(st.mean)) * n / (n - 1);
  const Eigen::VectorXd mu = m.posterior_mean(), v = m.posterior_var();
  st.mean_rel_err = (st.mean - mu).norm() / mu.norm();
  st.var_rel_err = ((st.var - v).cwiseAbs().array() / v.array()).maxCoeff();
  return st;
}

}  // namespace toy
