#pragma once

#include <random>
#include <string>

#include "firp/diff/ops.hpp"

namespace firp::model {

using diff::Matrix;
using diff::ParamSet;
using diff::Real;
using diff::Tape;
using diff::Var;
using diff::Vector;

/// Two fully connected layers with a ReLU in between; the output layer is linear.
struct Mlp2Vars {
  Var w0, b0, w1, b1;
};

/// Registers `<prefix>.0.W`, `<prefix>.0.b`, `<prefix>.1.W`, `<prefix>.1.b`
/// with Glorot-uniform weights and zero biases.
void add_mlp2_params(ParamSet& params, const std::string& prefix, int in, int hidden, int out,
                     std::mt19937_64& rng);
Mlp2Vars bind_mlp2(Tape& tape, ParamSet& params, const std::string& prefix, bool trainable);
Var mlp2(Var x, const Mlp2Vars& m);

/// Glorot-uniform (fan_in x fan_out) matrix.
Matrix glorot_uniform(std::mt19937_64& rng, int fan_in, int fan_out);

/// Splits an (n x 2d) head output into mean and stddev = softplus(raw) + 1e-4.
struct GaussianVars {
  Var mean;
  Var stddev;
};
GaussianVars gaussian_head(Var raw);

/// Fixed per-column map (x - shift) * scale applied to raw network inputs.
/// An empty norm is the identity.
struct InputNorm {
  Vector obs_shift, obs_scale;
  Vector act_shift, act_scale;

  bool empty() const { return obs_scale.size() == 0; }
  bool operator==(const InputNorm&) const = default;
};

/// (x - shift) * scale per column; identity when `scale` is empty.
Var normalize_cols(Var x, const Vector& shift, const Vector& scale);
Matrix normalize_cols(const Matrix& x, const Vector& shift, const Vector& scale);

inline constexpr Real kStddevFloor = 1e-4;
// Initial bias of the stddev half of a Gaussian head; softplus(-3) ~ 0.05.
inline constexpr Real kStddevInitBias = -3.0;

}  // namespace firp::model
