#pragma once

#include <random>
#include <string>

#include "firp/diff/ops.hpp"

namespace firp::diff {

/// Gated recurrent unit weights in row-vector form:
///   r  = sigmoid(x Wr + h Ur + br)
///   z  = sigmoid(x Wz + h Uz + bz)
///   h~ = tanh(x Wh + (r * h) Uh + bh)
///   h' = (1 - z) * h + z * h~
/// `input` packs [Wr | Wz | Wh] (X x 3H), `recurrent` packs [Ur | Uz] (H x 2H),
/// `candidate` is Uh (H x H) and `bias` packs [br | bz | bh] (1 x 3H).
struct GruVars {
  Var input;
  Var recurrent;
  Var candidate;
  Var bias;
};

/// Registers `<prefix>.W`, `<prefix>.U`, `<prefix>.Uh`, `<prefix>.b`.
void add_gru_params(ParamSet& params, const std::string& prefix, int input_dim, int hidden_dim,
                    std::mt19937_64& rng);
GruVars bind_gru(Tape& tape, ParamSet& params, const std::string& prefix, bool trainable = true);

/// One batched step; h_prev is (n x H), x is (n x X).
Var gru_cell(Var h_prev, Var x, const GruVars& w);

/// Single-vector convenience form over a ParamSet holding the `gru.*` entries.
Vector gru_cell(const Vector& h_prev, const Vector& x, ParamSet& params, const std::string& prefix = "gru");

}  // namespace firp::diff
