#include "firp/model/layers.hpp"

#include <cmath>

#include "firp/errors.hpp"

namespace firp::model {

Matrix glorot_uniform(std::mt19937_64& rng, int fan_in, int fan_out) {
  const Real limit = std::sqrt(6.0 / static_cast<Real>(fan_in + fan_out));
  std::uniform_real_distribution<Real> u(-limit, limit);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void add_mlp2_params(ParamSet& params, const std::string& prefix, int in, int hidden, int out,
                     std::mt19937_64& rng) {
  params.add(prefix + ".0.W", glorot_uniform(rng, in, hidden));
  params.add(prefix + ".0.b", Matrix::Zero(1, hidden));
  params.add(prefix + ".1.W", glorot_uniform(rng, hidden, out));
  params.add(prefix + ".1.b", Matrix::Zero(1, out));
}

Mlp2Vars bind_mlp2(Tape& tape, ParamSet& params, const std::string& prefix, bool trainable) {
  return Mlp2Vars{tape.param(params.at(prefix + ".0.W"), trainable), tape.param(params.at(prefix + ".0.b"), trainable),
                  tape.param(params.at(prefix + ".1.W"), trainable), tape.param(params.at(prefix + ".1.b"), trainable)};
}

Var mlp2(Var x, const Mlp2Vars& m) {
  Var hidden = diff::relu(diff::add_row(diff::matmul(x, m.w0), m.b0));
  return diff::add_row(diff::matmul(hidden, m.w1), m.b1);
}

GaussianVars gaussian_head(Var raw) {
  const Eigen::Index d = raw.cols() / 2;
  Var mean = diff::slice_cols(raw, 0, d);
  Var stddev = diff::add_scalar(diff::softplus(diff::slice_cols(raw, d, d)), kStddevFloor);
  return GaussianVars{mean, stddev};
}

Matrix normalize_cols(const Matrix& x, const Vector& shift, const Vector& scale) {
  if (scale.size() == 0) return x;
  if (x.cols() != scale.size() || shift.size() != scale.size()) throw DimensionError("normalize: width mismatch");
  return (x.rowwise() - shift.transpose()).array().rowwise() * scale.transpose().array();
}

Var normalize_cols(Var x, const Vector& shift, const Vector& scale) {
  if (scale.size() == 0) return x;
  if (x.cols() != scale.size() || shift.size() != scale.size()) throw DimensionError("normalize: width mismatch");
  Tape& tape = *x.tape();
  Var centered = diff::add_row(x, tape.constant(-shift.transpose()));
  return diff::mul(centered, tape.constant(scale.transpose().replicate(x.rows(), 1)));
}

}  // namespace firp::model
