#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "vderain/tensor.hpp"

namespace testing_support {

using vderain::Tensor;

template <class T>
Tensor<T> random_tensor(vderain::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t) v = static_cast<T>(u(rng));
  return t;
}

/// max_i |a_i - n_i| / max(max_i |n_i|, floor): one relative error for the
/// whole gradient, robust to individual entries that are near zero.
inline double rel_err(const Tensor<double>& analytic, const Tensor<double>& numeric, double floor = 1e-8) {
  double diff = 0, scale = floor;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  return diff / scale;
}

/// Central differences of `f` with respect to every entry of `x`.
inline Tensor<double> numeric_grad(Tensor<double>& x, const std::function<double()>& f, double h = 1e-4) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Five-point central stencil, O(h^4). Needed where the curvature is large
/// relative to h, e.g. Charbonnier terms with differences near eps.
inline Tensor<double> numeric_grad5(Tensor<double>& x, const std::function<double()>& f, double h = 1e-4) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    double v[4];
    const double off[4] = {2 * h, h, -h, -2 * h};
    for (int k = 0; k < 4; ++k) {
      x[i] = keep + off[k];
      v[k] = f();
    }
    x[i] = keep;
    g[i] = (-v[0] + 8 * v[1] - 8 * v[2] + v[3]) / (12 * h);
  }
  return g;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vderain_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
