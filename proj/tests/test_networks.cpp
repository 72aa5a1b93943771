#include <catch_amalgamated.hpp>

#include "support.hpp"
#include "vderain/inference.hpp"
#include "vderain/networks.hpp"

using namespace vderain;
using testing_support::numeric_grad;
using testing_support::random_tensor;
using testing_support::rel_err;

namespace {

DerainerConfig tiny_derainer() {
  DerainerConfig c;
  c.width = 4;
  c.blocks = 1;
  return c;
}

GeneratorConfig tiny_generator() {
  GeneratorConfig g;
  g.transition = {3, 2, 2, 4};
  g.emission.seed_size = 2;
  g.emission.seed_channels = 3;
  g.emission.stage_channels = {2};
  g.emission.target_h = g.emission.target_w = 4;
  g.emission.initial_level = 0.3;
  return g;
}

template <class P>
void randomize(P& p, std::uint64_t seed, double scale = 0.5) {
  std::uint64_t k = seed;
  nn::for_each_param(p, [&](const std::string&, auto& t) {
    using V = typename std::decay_t<decltype(t)>::value_type;
    t = random_tensor<V>(t.shape(), k++, -scale, scale);
  });
}

}  // namespace

TEST_CASE("derainer preserves shape") {
  DerainerConfig cfg;
  cfg.width = 8;
  cfg.blocks = 1;
  const auto w = init_params<float>(cfg, 1);
  const auto y = random_tensor<float>({20, 3, 64, 64}, 2, 0, 1);
  CHECK(derainer_forward(cfg, w, y).shape() == y.shape());
  const auto y2 = random_tensor<float>({2, 3, 6, 10}, 3, 0, 1);
  CHECK(derainer_forward(cfg, w, y2).shape() == y2.shape());
}

TEST_CASE("zero tail with global skip is the identity") {
  DerainerConfig cfg = tiny_derainer();
  cfg.zero_tail = true;
  for (auto tp : {TemporalPadding::Zero, TemporalPadding::Replicate}) {
    cfg.temporal_padding = tp;
    const auto w = init_params<float>(cfg, 3);
    const auto y = random_tensor<float>({5, 3, 8, 8}, 4, 0, 1);
    CHECK(derainer_forward(cfg, w, y) == y);
  }
}

TEST_CASE("derainer rejects bad input") {
  const auto cfg = tiny_derainer();
  const auto w = init_params<float>(cfg, 3);
  CHECK_THROWS_AS(derainer_forward(cfg, w, Tensor<float>({2, 3, 5, 4})), ShapeError);
  CHECK_THROWS_AS(derainer_forward(cfg, w, Tensor<float>({2, 1, 4, 4})), ShapeError);
  DerainerConfig even = cfg;
  even.kernel_t = 2;
  CHECK_THROWS_AS(init_params<float>(even, 0), ValueError);
}

TEST_CASE("derainer gradients match finite differences") {
  for (bool skip : {true, false}) {
    DerainerConfig cfg = tiny_derainer();
    cfg.global_skip = skip;
    auto w = init_params<double>(cfg, 7);
    randomize(w, 70, 0.3);
    auto y = random_tensor<double>({3, 3, 4, 4}, 8, 0, 1);
    auto loss = [&] {
      const auto out = derainer_forward(cfg, w, y);
      return sum(out) / static_cast<double>(out.size());
    };
    DerainerTrace<double> trace;
    const auto out = derainer_forward(cfg, w, y, &trace);
    auto g = nn::zeros_like(w);
    const auto gy = derainer_backward(cfg, w, trace, Tensor<double>(out.shape(), 1.0 / static_cast<double>(out.size())), &g);
    CHECK(rel_err(gy, numeric_grad(y, loss)) < 1e-6);
    const auto ga = nn::param_tensors(g);
    const auto pa = nn::param_tensors(w);
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(rel_err(*ga[k], numeric_grad(*pa[k], loss)) < 1e-6);
  }
}

TEST_CASE("orthogonal init: orthonormal matrices, zero biases, deterministic") {
  const auto w = init_params<double>(tiny_derainer(), 5);
  nn::for_each_param(w, [&](const std::string& name, const Tensor<double>& t) {
    if (name.ends_with(".bias")) {
      CHECK(std::all_of(t.begin(), t.end(), [](double v) { return v == 0; }));
      return;
    }
    const auto rows = static_cast<Eigen::Index>(t.dim(0)), cols = static_cast<Eigen::Index>(t.size() / t.dim(0));
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(t.data(), rows, cols);
    const Eigen::MatrixXd gram = rows <= cols ? Eigen::MatrixXd(m * m.transpose()) : Eigen::MatrixXd(m.transpose() * m);
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-5);
  });
  CHECK(nn::params_equal(init_params<float>(tiny_derainer(), 5), init_params<float>(tiny_derainer(), 5)));
  CHECK_FALSE(nn::params_equal(init_params<float>(tiny_derainer(), 5), init_params<float>(tiny_derainer(), 6)));

  // Generator FC weights: W^T W = I on the smaller side.
  GeneratorConfig gc;
  gc.emission.initial_level = 0.5;
  const auto theta = init_params<double>(gc, 9);
  nn::for_each_param(theta, [&](const std::string& name, const Tensor<double>& t) {
    if (name.ends_with(".bias")) CHECK(std::all_of(t.begin(), t.end(), [](double v) { return v == 0; }));
  });
  CHECK(nn::params_equal(init_params<float>(gc, 9), init_params<float>(gc, 9)));
}

TEST_CASE("emission output bias starts at the configured level") {
  GeneratorConfig gc;
  const auto theta = init_params<double>(gc, 9);
  CHECK((std::tanh(theta.emission.out.bias[0]) + 1) / 2 == Catch::Approx(0.02).epsilon(1e-12));
  gc.emission.initial_level = 1.0;
  CHECK_THROWS_AS(init_params<double>(gc, 9), ValueError);
}

TEST_CASE("transition step") {
  TransitionConfig tc{2, 2, 2, 2};
  GeneratorConfig gc;
  gc.transition = tc;
  gc.emission.initial_level = 0.5;
  auto theta = init_params<double>(gc, 1);
  SECTION("zero inputs and zero biases give zero") {
    const auto s = transition_step(tc, theta.transition, Tensor<double>({2}), Tensor<double>({2}), Tensor<double>({2}));
    CHECK(s == Tensor<double>({2}));
  }
  SECTION("hand-unrolled two-layer computation") {
    randomize(theta.transition, 11);
    const Tensor<double> s({2}, std::vector<double>{0.3, -0.7}), z({2}, std::vector<double>{1.2, 0.1}),
        m({2}, std::vector<double>{-0.4, 0.9});
    const double in[6] = {0.3, -0.7, 1.2, 0.1, -0.4, 0.9};
    double h[2], out[2];
    for (int o = 0; o < 2; ++o) {
      double a = theta.transition.fc1.bias[static_cast<std::size_t>(o)];
      for (int i = 0; i < 6; ++i) a += theta.transition.fc1.weight.at(static_cast<std::size_t>(o), static_cast<std::size_t>(i)) * in[i];
      h[o] = std::tanh(a);
    }
    for (int o = 0; o < 2; ++o) {
      double a = theta.transition.fc2.bias[static_cast<std::size_t>(o)];
      for (int i = 0; i < 2; ++i) a += theta.transition.fc2.weight.at(static_cast<std::size_t>(o), static_cast<std::size_t>(i)) * h[i];
      out[o] = std::tanh(a);
    }
    const auto got = transition_step(tc, theta.transition, s, z, m);
    CHECK(got[0] == Catch::Approx(out[0]).margin(1e-6));
    CHECK(got[1] == Catch::Approx(out[1]).margin(1e-6));
  }
  SECTION("default dims and bounded outputs") {
    GeneratorConfig d;
    auto th = init_params<float>(d, 2);
    randomize(th.transition, 3, 2.0);
    const auto s = transition_step(d.transition, th.transition, random_tensor<float>({64}, 1, -3, 3),
                                   random_tensor<float>({32}, 2, -3, 3), random_tensor<float>({64}, 3, -3, 3));
    CHECK(s.size() == 64);
    CHECK(std::all_of(s.begin(), s.end(), [](float v) { return std::abs(v) <= 1; }));
  }
  CHECK_THROWS_AS(transition_step(tc, theta.transition, Tensor<double>({3}), Tensor<double>({2}), Tensor<double>({2})), ShapeError);
}

TEST_CASE("emit_frame") {
  GeneratorConfig gc;
  auto theta = init_params<float>(gc, 4);
  const auto f = emit_frame(gc.emission, theta.emission, random_tensor<float>({64}, 5));
  CHECK(f.shape() == Shape{1, 64, 64});
  SECTION("random parameters stay within [0, 1]") {
    std::uint64_t k = 100;
    nn::for_each_param(theta.emission, [&](const std::string&, Tensor<float>& t) { t = random_tensor<float>(t.shape(), k++, -1, 1); });
    const auto g = emit_frame(gc.emission, theta.emission, random_tensor<float>({64}, 6));
    CHECK(std::all_of(g.begin(), g.end(), [](float v) { return v >= 0 && v <= 1; }));
  }
  SECTION("zero parameters give a constant 0.5 frame") {
    nn::set_zero(theta.emission);
    const auto g = emit_frame(gc.emission, theta.emission, random_tensor<float>({64}, 7));
    CHECK(std::all_of(g.begin(), g.end(), [](float v) { return v == 0.5f; }));
  }
  CHECK_THROWS_AS(emit_frame(gc.emission, theta.emission, Tensor<float>({63})), ShapeError);
  EmissionConfig bad;
  bad.target_h = bad.target_w = 32;
  CHECK_THROWS_AS(bad.validate(), ValueError);
}

TEST_CASE("generate_rain unrolls transition then emission") {
  const auto gc = tiny_generator();
  auto theta = init_params<double>(gc, 12);
  randomize(theta, 120);
  const auto chain = init_chain<double>("c", 3, gc.transition, 13);
  const auto r = generate_rain(gc, theta, chain.latents);
  REQUIRE(r.shape() == Shape{3, 1, 4, 4});
  Tensor<double> s = chain.latents.s0;
  for (std::size_t t = 0; t < 3; ++t) {
    Tensor<double> z({2}, std::vector<double>{chain.latents.z.at(t, std::size_t{0}), chain.latents.z.at(t, std::size_t{1})});
    s = transition_step(gc.transition, theta.transition, s, z, chain.latents.m);
    const auto f = emit_frame(gc.emission, theta.emission, s);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == Catch::Approx(r[t * 16 + i]).margin(1e-12));
  }
  CHECK(generate_rain(gc, theta, chain.latents) == r);

  GeneratorConfig d;
  const auto th = init_params<float>(d, 1);
  auto lat = zero_latents<float>(d.transition, 20);
  lat.s0 = random_tensor<float>({64}, 2);
  lat.m = random_tensor<float>({64}, 3);
  const auto a = generate_rain(d, th, lat);
  CHECK(a.shape() == Shape{20, 1, 64, 64});
  CHECK(generate_rain(d, th, lat) == a);
  auto bad = lat;
  bad.m = Tensor<float>({3});
  CHECK_THROWS_AS(generate_rain(d, th, bad), ShapeError);
}

TEST_CASE("generator gradients match finite differences") {
  const auto gc = tiny_generator();
  auto theta = init_params<double>(gc, 21);
  randomize(theta, 210, 0.6);
  auto chain = init_chain<double>("c", 3, gc.transition, 22);
  auto& lat = chain.latents;
  const auto probe = random_tensor<double>({3, 1, 4, 4}, 23);
  auto loss = [&] {
    const auto r = generate_rain(gc, theta, lat);
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * probe[i];
    return s;
  };
  GeneratorTrace<double> trace;
  generate_rain(gc, theta, lat, &trace);
  auto g = nn::zeros_like(theta);
  Latents<double> gl;
  generator_backward(gc, theta, trace, probe, &g, &gl);
  const auto ga = nn::param_tensors(g);
  const auto pa = nn::param_tensors(theta);
  for (std::size_t k = 0; k < pa.size(); ++k) CHECK(rel_err(*ga[k], numeric_grad(*pa[k], loss)) < 1e-6);
  CHECK(rel_err(gl.s0, numeric_grad(lat.s0, loss)) < 1e-6);
  CHECK(rel_err(gl.z, numeric_grad(lat.z, loss)) < 1e-6);
  CHECK(rel_err(gl.m, numeric_grad(lat.m, loss)) < 1e-6);
}
