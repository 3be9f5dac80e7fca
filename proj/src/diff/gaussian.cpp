#include "firp/diff/gaussian.hpp"

#include "firp/errors.hpp"

namespace firp::diff {

DiagGaussian::DiagGaussian(Vector m, Vector s) : mean(std::move(m)), stddev(std::move(s)) {
  if (mean.size() != stddev.size()) throw DimensionError("DiagGaussian: mean and stddev lengths differ");
  if ((stddev.array() <= 0).any() || !stddev.allFinite()) {
    throw DomainError("DiagGaussian: stddev must be strictly positive");
  }
  if (!mean.allFinite()) throw NumericError("DiagGaussian: non-finite mean");
}

Real gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.dim() != p.dim()) throw DimensionError("gaussian_kl: dimensions differ");
  Tape t;
  auto row = [&t](const Vector& v) { return t.constant(v.transpose()); };
  return gaussian_kl_rows(row(q.mean), row(q.stddev), row(p.mean), row(p.stddev)).scalar();
}

Vector sample_reparam(const DiagGaussian& d, const Vector& noise) {
  if (noise.size() != d.dim()) throw DimensionError("sample_reparam: noise length differs");
  return d.mean + d.stddev.cwiseProduct(noise);
}

Var sample_reparam(Var mean, Var stddev, const Matrix& noise) {
  if (noise.rows() != mean.rows() || noise.cols() != mean.cols()) {
    throw DimensionError("sample_reparam: noise shape differs");
  }
  Tape& t = *mean.tape();
  return add(mean, mul(stddev, t.constant(noise)));
}

Matrix standard_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<Real> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace firp::diff
