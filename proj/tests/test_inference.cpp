#include <catch_amalgamated.hpp>

#include "support.hpp"
#include "toy_gaussian.hpp"
#include "vderain/inference.hpp"

using namespace vderain;
using testing_support::numeric_grad;
using testing_support::random_tensor;
using testing_support::rel_err;

namespace {

GeneratorConfig toy_generator() {
  GeneratorConfig g;
  g.transition = {3, 2, 2, 4};
  g.emission.seed_size = 2;
  g.emission.seed_channels = 3;
  g.emission.stage_channels = {2};
  g.emission.target_h = g.emission.target_w = 4;
  g.emission.initial_level = 0.3;
  return g;
}

// g(u) = 0.5 |u|^2 over every latent entry (no mean reduction).
EnergyResult<double> half_square(const Latents<double>& l) {
  EnergyResult<double> r{0, l};
  l.for_each([&](const Tensor<double>& t) { r.energy += 0.5 * squared_norm(t); });
  return r;
}

}  // namespace

TEST_CASE("init_chain draws standard normal latents") {
  const TransitionConfig dims;
  const auto c = init_chain<float>("clip", 20, dims, 3);
  CHECK(c.clip_id == "clip");
  CHECK(c.latents.z.shape() == Shape{20, 32});
  CHECK(c.latents.s0.shape() == Shape{64});
  CHECK(c.latents.m.shape() == Shape{64});
  CHECK(init_chain<float>("clip", 20, dims, 3) == c);
  CHECK_FALSE(init_chain<float>("clip", 20, dims, 4) == c);
  CHECK_THROWS_AS(init_chain<float>("clip", 0, dims, 3), ValueError);

  const TransitionConfig small{3, 2, 2, 4};
  constexpr int kChains = 10000;
  auto acc = zero_latents<double>(small, 2);
  for (int k = 0; k < kChains; ++k) {
    const auto l = init_chain<double>("c", 2, small, stream_seed(1, "chain", static_cast<std::uint64_t>(k))).latents;
    acc.s0 += l.s0;
    acc.z += l.z;
    acc.m += l.m;
  }
  acc.for_each([&](const Tensor<double>& t) {
    for (double v : t) CHECK(std::abs(v / kChains) <= 0.04);
  });
}

TEST_CASE("stream seeds separate names and counters") {
  CHECK(stream_seed(1, "a") == stream_seed(1, "a"));
  CHECK(stream_seed(1, "a") != stream_seed(1, "b"));
  CHECK(stream_seed(1, "a") != stream_seed(2, "a"));
  CHECK(stream_seed(1, "a", 0) != stream_seed(1, "a", 1));
}

TEST_CASE("latent energy") {
  const auto gc = toy_generator();
  auto theta = init_params<double>(gc, 5);
  nn::for_each_param(theta, [&, k = 50ull](const std::string&, Tensor<double>& t) mutable {
    t = random_tensor<double>(t.shape(), k++, -0.5, 0.5);
  });
  const auto bg = random_tensor<double>({3, 3, 4, 4}, 6, 0, 0.5);

  SECTION("exact decomposition with zero latents gives zero energy") {
    const auto lat = zero_latents<double>(gc.transition, 3);
    auto y = bg;
    add_broadcast(y, generate_rain(gc, theta, lat));
    CHECK(latent_energy(gc, theta, lat, y, bg, 0.05).energy == Catch::Approx(0).margin(1e-12));
  }
  SECTION("vanishing residual leaves only the prior term") {
    const auto lat = init_chain<double>("c", 3, gc.transition, 7).latents;
    auto y = bg;
    add_broadcast(y, generate_rain(gc, theta, lat));
    double sq = 0;
    lat.for_each([&](const Tensor<double>& t) { sq += squared_norm(t); });
    CHECK(latent_energy(gc, theta, lat, y, bg, 0.05).energy == Catch::Approx(0.5 * sq / static_cast<double>(lat.count())).epsilon(1e-9));
  }
  SECTION("gradient matches finite differences") {
    auto lat = init_chain<double>("c", 3, gc.transition, 8).latents;
    const auto y = random_tensor<double>({3, 3, 4, 4}, 9, 0, 1);
    const auto r = latent_energy(gc, theta, lat, y, bg, 0.05);
    auto f = [&] { return latent_energy(gc, theta, lat, y, bg, 0.05).energy; };
    CHECK(rel_err(r.grad.s0, numeric_grad(lat.s0, f)) < 1e-6);
    CHECK(rel_err(r.grad.z, numeric_grad(lat.z, f)) < 1e-6);
    CHECK(rel_err(r.grad.m, numeric_grad(lat.m, f)) < 1e-6);
  }
  SECTION("shape mismatch") {
    const auto lat = zero_latents<double>(gc.transition, 3);
    CHECK_THROWS_AS(latent_energy(gc, theta, lat, bg, Tensor<double>({3, 3, 4, 2}), 0.05), ShapeError);
    CHECK_THROWS_AS(latent_energy(gc, theta, zero_latents<double>(gc.transition, 2), bg, bg, 0.05), ShapeError);
  }
}

TEST_CASE("langevin step") {
  Latents<double> l{Tensor<double>({1}, 1.0), Tensor<double>({1, 1}, 1.0), Tensor<double>({1}, 1.0)};
  const auto before = l;
  std::mt19937_64 rng(1);
  langevin_step(l, half_square(l).grad, 0.0, &rng);
  CHECK(l == before);
  langevin_step(l, half_square(l).grad, 0.1, nullptr);
  CHECK(l.z[0] == Catch::Approx(0.995).epsilon(1e-15));
  CHECK(l.s0[0] == Catch::Approx(0.995).epsilon(1e-15));

  auto a = before, b = before;
  std::mt19937_64 r1(9), r2(9);
  for (int k = 0; k < 4; ++k) {
    langevin_step(a, half_square(a).grad, 0.1, &r1);
    langevin_step(b, half_square(b).grad, 0.1, &r2);
  }
  CHECK(a == b);
  CHECK_FALSE(a == before);

  auto bad = half_square(l).grad;
  bad.z[0] = std::nan("");
  CHECK_THROWS_AS(langevin_step(l, bad, 0.1, nullptr), ValueError);
}

TEST_CASE("run_langevin") {
  LangevinConfig cfg;
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg.steps = 1;

  const auto start = init_chain<double>("c", 2, {3, 2, 2, 4}, 4);
  SECTION("one step equals langevin_step") {
    auto c = start;
    std::mt19937_64 r1(5), r2(5);
    run_langevin(c, half_square, cfg, r1);
    auto l = start.latents;
    langevin_step(l, half_square(l).grad, cfg.delta, &r2);
    CHECK(c.latents == l);
  }
  SECTION("noise-free steps descend") {
    cfg.noise_enabled = false;
    cfg.steps = 20;
    cfg.delta = 0.5;
    auto c = start;
    std::mt19937_64 rng(1);
    std::vector<double> e;
    run_langevin(c, half_square, cfg, rng, &e);
    REQUIRE(e.size() == 21);
    for (std::size_t k = 1; k < e.size(); ++k) CHECK(e[k] <= e[k - 1]);

    const auto gc = toy_generator();
    const auto theta = init_params<double>(gc, 3);
    const auto y = random_tensor<double>({2, 1, 4, 4}, 2, 0, 1);
    const Tensor<double> bg(y.shape());
    auto c2 = init_chain<double>("c2", 2, gc.transition, 6);
    std::vector<double> e2;
    cfg.delta = 0.05;
    run_langevin(c2, y, bg, gc, theta, cfg, rng, &e2);
    for (std::size_t k = 1; k < e2.size(); ++k) CHECK(e2[k] <= e2[k - 1]);
  }
  SECTION("chains persist across calls") {
    cfg.steps = 3;
    auto a = start, b = start;
    std::mt19937_64 r1(8), r2(8);
    run_langevin(a, half_square, cfg, r1);
    run_langevin(a, half_square, cfg, r1);
    cfg.steps = 6;
    run_langevin(b, half_square, cfg, r2);
    CHECK(a == b);
  }
  SECTION("divergence guard names the clip") {
    cfg.steps = 5;
    auto c = start;
    c.clip_id = "storm#3";
    std::mt19937_64 rng(1);
    int calls = 0;
    auto exploding = [&](const Latents<double>& l) {
      auto r = half_square(l);
      r.energy *= std::pow(1e4, calls++);
      return r;
    };
    try {
      run_langevin(c, exploding, cfg, rng);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("storm#3") != std::string::npos);
    }
  }
}

TEST_CASE("Langevin samples the linear-Gaussian posterior") {
  const toy::LinearGaussian m(100);
  const auto st = toy::sample_posterior(m, 0.3, 2000, 5000, 400, 7);
  CHECK(st.mean_rel_err <= 0.05);
  CHECK(st.var_rel_err <= 0.15);
}
