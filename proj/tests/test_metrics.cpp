#include <catch_amalgamated.hpp>

#include "support.hpp"
#include "vderain/metrics.hpp"

using namespace vderain;
using testing_support::random_tensor;

namespace {

// Direct windowed SSIM: for each valid 11x11 window, weighted local moments
// with the 2-D Gaussian computed from scratch.
double ssim_naive(const VideoClip& a, const VideoClip& b) {
  const std::size_t n = a.dim(0), h = a.dim(2), w = a.dim(3);
  double wk[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += wk[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  double acc = 0;
  for (std::size_t t = 0; t < n; ++t) {
    double frame = 0;
    for (std::size_t y = 0; y + 11 <= h; ++y)
      for (std::size_t x = 0; x + 11 <= w; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < 11; ++i)
          for (std::size_t j = 0; j < 11; ++j) {
            const double g = wk[i][j] / total, p = a.at(t, 0, y + i, x + j), q = b.at(t, 0, y + i, x + j);
            mx += g * p;
            my += g * q;
            sxx += g * p * p;
            syy += g * q * q;
            sxy += g * p * q;
          }
        const double vx = sxx - mx * mx, vy = syy - my * my, cv = sxy - mx * my;
        frame += (2 * mx * my + 1e-4) * (2 * cv + 9e-4) / ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
      }
    acc += frame / static_cast<double>((h - 10) * (w - 10));
  }
  return acc / static_cast<double>(n);
}

// 2 frames of 24x20, reproduced by the reference script that produced the frozen value.
std::pair<VideoClip, VideoClip> analytic_pair() {
  VideoClip a({2, 1, 24, 20}), b({2, 1, 24, 20});
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t y = 0; y < 24; ++y)
      for (std::size_t x = 0; x < 20; ++x) {
        const double td = static_cast<double>(t), yd = static_cast<double>(y), xd = static_cast<double>(x);
        const float va = static_cast<float>(0.5 + 0.4 * std::sin(0.37 * yd + 0.21 * xd + 1.3 * td));
        a.at(t, 0, y, x) = va;
        b.at(t, 0, y, x) = static_cast<float>(std::clamp(static_cast<double>(va) + 0.15 * std::sin(1.7 * yd * xd + 0.9 * td), 0.0, 1.0));
      }
  return {a, b};
}

}  // namespace

TEST_CASE("identical clips hit the PSNR cap and SSIM 1") {
  const auto a = random_tensor<float>({3, 3, 16, 16}, 1, 0, 1);
  CHECK(psnr_luminance(a, a) == 100.0);
  CHECK(ssim_luminance(a, a) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("a 0.1 luminance offset is 20 dB") {
  VideoClip a({2, 1, 12, 12}, 0.25f), b({2, 1, 12, 12}, 0.25f + 0.1f);
  CHECK(psnr_luminance(a, b) == Catch::Approx(20.0).margin(1e-5));
  // same offset on every RGB channel moves luminance by 0.1 as well
  VideoClip c({1, 3, 12, 12}, 0.5f), d({1, 3, 12, 12}, 0.6f);
  CHECK(psnr_luminance(c, d) == Catch::Approx(20.0).margin(1e-4));
}

TEST_CASE("PSNR decreases with noise amplitude") {
  const auto clean = random_tensor<float>({2, 1, 16, 16}, 2, 0.3, 0.7);
  const auto noise = random_tensor<float>({2, 1, 16, 16}, 3, -1, 1);
  double last = 101;
  for (float amp : {0.01f, 0.05f, 0.1f, 0.2f}) {
    VideoClip noisy = clean;
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += amp * noise[i];
    const double p = psnr_luminance(clean, noisy);
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("SSIM agrees with reference implementations") {
  const auto [a, b] = analytic_pair();
  // frozen from skimage.metrics.structural_similarity(gaussian_weights=True, sigma=1.5,
  // use_sample_covariance=False, data_range=1.0), averaged over both frames
  CHECK(ssim_luminance(a, b) == Catch::Approx(0.7922029016540277).margin(1e-6));
  CHECK(ssim_luminance(a, b) == Catch::Approx(ssim_naive(a, b)).margin(1e-9));

  const auto r = random_tensor<float>({2, 1, 17, 13}, 4, 0, 1);
  const auto s = random_tensor<float>({2, 1, 17, 13}, 5, 0, 1);
  CHECK(ssim_luminance(r, s) == Catch::Approx(ssim_naive(r, s)).margin(1e-9));
  CHECK(ssim_luminance(r, s) == Catch::Approx(ssim_luminance(s, r)).margin(1e-12));
  CHECK(ssim_luminance(r, s) < 0.5);
}

TEST_CASE("metrics reject mismatched or tiny inputs") {
  CHECK_THROWS_AS(psnr_luminance(VideoClip({1, 1, 12, 12}), VideoClip({1, 1, 12, 13})), ShapeError);
  CHECK_THROWS_AS(ssim_luminance(VideoClip({1, 1, 12, 12}), VideoClip({2, 1, 12, 12})), ShapeError);
  CHECK_THROWS_AS(ssim_luminance(VideoClip({1, 1, 10, 12}), VideoClip({1, 1, 10, 12})), ShapeError);
}
