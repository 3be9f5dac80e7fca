#include "firp/diff/gru.hpp"

#include <cmath>

#include "firp/errors.hpp"

namespace firp::diff {
namespace {

Matrix glorot(std::mt19937_64& rng, int fan_in, int fan_out) {
  const Real limit = std::sqrt(6.0 / static_cast<Real>(fan_in + fan_out));
  std::uniform_real_distribution<Real> u(-limit, limit);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

void add_gru_params(ParamSet& params, const std::string& prefix, int input_dim, int hidden_dim,
                    std::mt19937_64& rng) {
  Matrix w(input_dim, 3 * hidden_dim);
  for (int g = 0; g < 3; ++g) w.middleCols(g * hidden_dim, hidden_dim) = glorot(rng, input_dim, hidden_dim);
  Matrix u(hidden_dim, 2 * hidden_dim);
  for (int g = 0; g < 2; ++g) u.middleCols(g * hidden_dim, hidden_dim) = glorot(rng, hidden_dim, hidden_dim);
  params.add(prefix + ".W", std::move(w));
  params.add(prefix + ".U", std::move(u));
  params.add(prefix + ".Uh", glorot(rng, hidden_dim, hidden_dim));
  params.add(prefix + ".b", Matrix::Zero(1, 3 * hidden_dim));
}

GruVars bind_gru(Tape& tape, ParamSet& params, const std::string& prefix, bool trainable) {
  return GruVars{tape.param(params.at(prefix + ".W"), trainable), tape.param(params.at(prefix + ".U"), trainable),
                 tape.param(params.at(prefix + ".Uh"), trainable), tape.param(params.at(prefix + ".b"), trainable)};
}

Var gru_cell(Var h_prev, Var x, const GruVars& w) {
  const Eigen::Index hidden = h_prev.cols();
  if (w.candidate.rows() != hidden || w.candidate.cols() != hidden || w.recurrent.rows() != hidden ||
      w.recurrent.cols() != 2 * hidden || w.input.cols() != 3 * hidden || w.bias.cols() != 3 * hidden) {
    throw DimensionError("gru_cell: hidden size does not match the weights");
  }
  if (x.cols() != w.input.rows()) throw DimensionError("gru_cell: input size does not match the weights");
  if (x.rows() != h_prev.rows()) throw DimensionError("gru_cell: batch sizes differ");

  Var xw = add_row(matmul(x, w.input), w.bias);
  Var hu = matmul(h_prev, w.recurrent);
  Var r = sigmoid(add(slice_cols(xw, 0, hidden), slice_cols(hu, 0, hidden)));
  Var z = sigmoid(add(slice_cols(xw, hidden, hidden), slice_cols(hu, hidden, hidden)));
  Var cand = tanh(add(slice_cols(xw, 2 * hidden, hidden), matmul(mul(r, h_prev), w.candidate)));
  // h + z * (h~ - h)
  return add(h_prev, mul(z, sub(cand, h_prev)));
}

Vector gru_cell(const Vector& h_prev, const Vector& x, ParamSet& params, const std::string& prefix) {
  Tape t;
  GruVars w = bind_gru(t, params, prefix, false);
  Var out = gru_cell(t.constant(h_prev.transpose()), t.constant(x.transpose()), w);
  return out.value().row(0).transpose();
}

}  // namespace firp::diff
