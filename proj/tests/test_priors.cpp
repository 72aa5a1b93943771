#include <catch_amalgamated.hpp>

#include "support.hpp"
#include "vderain/priors.hpp"

using namespace vderain;
using testing_support::numeric_grad;
using testing_support::numeric_grad5;
using testing_support::random_tensor;
using testing_support::rel_err;

namespace {

// Scalar loop over explicit neighbour pairs.
double mrf_oracle(const Tensor<double>& f, const PriorConfig& c) {
  const std::size_t n = f.dim(0), ch = f.dim(1), h = f.dim(2), w = f.dim(3);
  auto A = [&](double d) { return std::sqrt(d * d + c.charbonnier_eps * c.charbonnier_eps); };
  double s = 0;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t k = 0; k < ch; ++k)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double v = f.at(t, k, i, j);
          if (i + 1 < h) s += c.gamma[0] * A(f.at(t, k, i + 1, j) - v);
          if (j + 1 < w) s += c.gamma[1] * A(f.at(t, k, i, j + 1) - v);
          if (t + 1 < n) s += c.gamma[2] * A(f.at(t + 1, k, i, j) - v);
        }
  return c.rho * s / static_cast<double>(f.size());
}

}  // namespace

TEST_CASE("charbonnier absolute value") {
  CHECK(charbonnier_abs(0.0, 1e-3) == 1e-3);
  CHECK(charbonnier_abs(1.0, 1e-3) == Catch::Approx(1.0000005).epsilon(1e-12));
  CHECK(charbonnier_abs_derivative(0.0, 1e-3) == 0.0);
  CHECK(charbonnier_abs(-0.3, 1e-3) == charbonnier_abs(0.3, 1e-3));
  CHECK(charbonnier_abs(-0.3, 1e-3) >= 0.3);
  CHECK(charbonnier_abs(-0.3, 1e-9) == Catch::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("mrf energy values") {
  PriorConfig c;
  c.charbonnier_eps = 1e-12;
  CHECK(mrf_energy(Tensor<double>({3, 2, 4, 4}, 0.7), c) < 1e-11);

  Tensor<double> two({2, 1, 1, 1}, std::vector<double>{0, 1});
  CHECK(mrf_energy(two, c) == Catch::Approx(0.5).epsilon(1e-9));

  PriorConfig d;
  const auto f = random_tensor<double>({3, 2, 5, 4}, 1);
  CHECK(mrf_energy(f, d) == Catch::Approx(mrf_oracle(f, d)).epsilon(1e-12));
  auto shifted = f;
  for (auto& v : shifted) v += 0.37;
  CHECK(mrf_energy(shifted, d) == Catch::Approx(mrf_energy(f, d)).epsilon(1e-10));
  CHECK(mrf_energy(f, d) >= 0);

  Tensor<double> bad({1, 1, 2, 2});
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(mrf_energy(bad, d), ValueError);
}

TEST_CASE("mrf energy prefers temporally ordered frames") {
  PriorConfig c;
  const auto k0 = random_tensor<double>({1, 1, 6, 6}, 2, 0, 1);
  const auto k1 = random_tensor<double>({1, 1, 6, 6}, 3, 0, 1);
  const std::size_t n = 8;
  Tensor<double> clip({n, 1, 6, 6});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t i = 0; i < 36; ++i) {
      const double a = static_cast<double>(t) / (n - 1);
      clip[t * 36 + i] = (1 - a) * k0[i] + a * k1[i];
    }
  const double base = mrf_energy(clip, c);
  for (const std::vector<std::size_t>& perm : {std::vector<std::size_t>{7, 6, 5, 4, 3, 2, 1, 0},
                                                std::vector<std::size_t>{0, 4, 1, 5, 2, 6, 3, 7},
                                                std::vector<std::size_t>{1, 0, 2, 3, 4, 5, 7, 6}}) {
    Tensor<double> p(clip.shape());
    for (std::size_t t = 0; t < n; ++t) std::copy_n(clip.data() + perm[t] * 36, 36, p.data() + t * 36);
    CHECK(mrf_energy(p, c) >= base - 1e-12);
  }
}

TEST_CASE("prior energy gradients match finite differences") {
  PriorConfig c;
  auto f = random_tensor<double>({3, 1, 4, 5}, 4);
  Tensor<double> g(f.shape());
  mrf_energy(f, c, &g);
  CHECK(rel_err(g, numeric_grad5(f, [&] { return mrf_energy(f, c); })) < 1e-4);
  // the two-point stencil is limited by truncation error on near-eps differences
  CHECK(rel_err(g, numeric_grad(f, [&] { return mrf_energy(f, c); })) < 1e-3);

  auto x = random_tensor<double>({3, 1, 4, 5}, 5);
  auto h = x;
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += 1e-3 * f[i];
  Tensor<double> gl(h.shape());
  labeled_prior_energy(h, x, c, &gl);
  CHECK(rel_err(gl, numeric_grad5(h, [&] { return labeled_prior_energy(h, x, c); })) < 1e-4);
}

TEST_CASE("labeled prior energy") {
  PriorConfig c;
  c.rho = 0;
  Tensor<double> x({2, 1, 3, 3}, 0.4), f({2, 1, 3, 3}, 0.401);
  CHECK(labeled_prior_energy(f, x, c) == Catch::Approx(1.0).epsilon(1e-9));
  CHECK(labeled_prior_energy(x, x, c) == 0);

  PriorConfig d;
  d.charbonnier_eps = 1e-12;
  CHECK(labeled_prior_energy(x, x, d) < 1e-10);

  PriorConfig e;
  const auto a = random_tensor<double>({2, 3, 4, 4}, 6, 0, 1), b = random_tensor<double>({2, 3, 4, 4}, 7, 0, 1);
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double expect = se / static_cast<double>(a.size()) / 1e-6 + mrf_oracle(a, e);
  CHECK(labeled_prior_energy(a, b, e) == Catch::Approx(expect).epsilon(1e-12));

  // with rho = 0 any perturbation away from X raises the energy
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto p = b;
    const auto n = random_tensor<double>(b.shape(), 100 + s, -1e-3, 1e-3);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += n[i];
    CHECK(labeled_prior_energy(p, b, c) > labeled_prior_energy(b, b, c));
  }
  CHECK_THROWS_AS(labeled_prior_energy(a, Tensor<double>({2, 3, 4, 3}), e), ShapeError);
}

TEST_CASE("prior config validation") {
  PriorConfig c;
  c.rho = -1;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c = {};
  c.gamma[2] = -0.1;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c = {};
  c.eps0_sq = 0;
  CHECK_THROWS_AS(c.validate(), ValueError);
}
