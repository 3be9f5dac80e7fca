#pragma once

#include <vector>

#include "firp/diff/tape.hpp"

// Differentiable operations on Tape nodes. Rows are batch entries unless an
// operation says otherwise. Shape violations throw DimensionError.
namespace firp::diff {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real s);
Var add_scalar(Var a, Real s);
/// a (n x m) + bias (1 x m), broadcast over rows.
Var add_row(Var a, Var bias);
/// Multiplies row i of a by w(i, 0).
Var mul_col(Var a, Var w);

Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// log(1 + exp(a)), evaluated stably.
Var softplus(Var a);
Var square(Var a);
Var abs(Var a);
/// Natural log; the argument must be positive.
Var log(Var a);
/// arccos with the argument clamped to [-1, 1]. The derivative is taken as
/// zero where |x| is within 1e-12 of 1, where the true derivative is
/// unbounded.
Var acos_clamped(Var a);

Var sum(Var a);
/// Sum over columns: (n x m) -> (n x 1).
Var row_sum(Var a);
/// Sum over rows: (n x m) -> (1 x m).
Var col_sum(Var a);

Var concat_cols(Var a, Var b);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index first, Eigen::Index count);
/// out.row(k) = a.row(index[k]).
Var gather_rows(Var a, const std::vector<int>& index);

/// Row-wise cosine similarity (n x 1). A zero-norm row on either side gives
/// cosine 0 with zero gradient.
Var row_cosine(Var a, Var b);

/// Closed-form KL(q || p) between diagonal Gaussians, summed over columns:
/// returns (n x 1). Standard deviations must be strictly positive.
Var gaussian_kl_rows(Var q_mean, Var q_std, Var p_mean, Var p_std);

/// Mean binary cross-entropy of probabilities p (n x 1) against 0/1 labels.
/// Probabilities are clamped to [1e-7, 1 - 1e-7] first.
Var binary_cross_entropy(Var p, const std::vector<int>& labels);

/// Prototype pooling weights for `episodes` sequences of `steps` rows each,
/// stored time-major (row t * episodes + b). For prototype i the cosine of
/// every step against prototypes.row(i) is divided by `temperature` and
/// soft-maxed over time; the M softmaxes are averaged. Returns
/// (steps * episodes x 1). Zero-norm vectors give cosine 0.
Var pool_weights(Var q, Var prototypes, Real temperature, int steps, int episodes);

/// Per-episode weighted sum over time for time-major rows:
/// out.row(b) = sum_t w(t * episodes + b) * q.row(t * episodes + b).
Var weighted_time_sum(Var q, Var w, int steps, int episodes);

}  // namespace firp::diff
