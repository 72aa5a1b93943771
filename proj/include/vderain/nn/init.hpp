#pragma once

#include <Eigen/Dense>

#include <random>

#include "vderain/tensor.hpp"

namespace vderain::nn {

/// Fills `weight` with a (semi-)orthogonal matrix. The tensor is viewed as
/// (dim(0), everything else); rows are orthonormal when dim(0) is the smaller
/// side, columns otherwise. Signs follow diag(R) so the draw is Haar-uniform.
template <class T>
void orthogonal_(Tensor<T>& weight, std::mt19937_64& rng, double gain = 1.0) {
  if (weight.rank() < 2) throw ShapeError("orthogonal init needs a matrix-shaped tensor");
  const auto rows = static_cast<Eigen::Index>(weight.dim(0));
  const auto cols = static_cast<Eigen::Index>(weight.size() / weight.dim(0));
  const bool tall = rows >= cols;
  const Eigen::Index big = tall ? rows : cols, small = tall ? cols : rows;

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index j = 0; j < small; ++j)
    for (Eigen::Index i = 0; i < big; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (Eigen::Index j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;

  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      weight[static_cast<std::size_t>(i * cols + j)] = static_cast<T>(gain * (tall ? q(i, j) : q(j, i)));
}

}  // namespace vderain::nn
