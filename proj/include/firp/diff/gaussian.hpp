#pragma once

#include <random>

#include "firp/diff/ops.hpp"

namespace firp::diff {

/// Diagonal Gaussian with strictly positive standard deviations.
struct DiagGaussian {
  Vector mean;
  Vector stddev;

  /// Throws DimensionError / DomainError when the invariants fail.
  DiagGaussian(Vector mean, Vector stddev);
  Eigen::Index dim() const { return mean.size(); }
};

/// KL(q || p) summed over dimensions.
Real gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);

/// mean + stddev * noise.
Vector sample_reparam(const DiagGaussian& d, const Vector& noise);

/// Tape form of sample_reparam over rows; gradients flow to mean and stddev.
Var sample_reparam(Var mean, Var stddev, const Matrix& noise);

/// Standard-normal noise matrix drawn from `rng`.
Matrix standard_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols);

}  // namespace firp::diff
