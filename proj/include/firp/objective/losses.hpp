#pragma once

#include <vector>

#include "firp/diff/gaussian.hpp"
#include "firp/model/layers.hpp"

namespace firp::objective {

using diff::DiagGaussian;
using diff::Matrix;
using diff::Real;
using diff::Var;

/// Sum of KL(q_row || p_row) over the given rows, divided by N * T. The
/// caller passes only the valid (t, n) terms.
Var loss_kl(const model::GaussianVars& q, const model::GaussianVars& p, int N, int T);
/// Sum of squared row distances divided by N * T.
Var loss_re(Var e, Var e_hat, int N, int T);
/// Mean binary cross-entropy.
Var loss_ce(Var p, const std::vector<int>& labels);

// Value forms over per-episode sequences, index [n][t] with t = 0..T-1.

/// Terms with t + 1 - tau < 1 are skipped; the prior entries there are ignored.
Real loss_kl(const std::vector<std::vector<DiagGaussian>>& posteriors,
             const std::vector<std::vector<DiagGaussian>>& priors, int tau);
/// targets[n] and decoded[n] are T x d; rows t = tau..T-1 (0-based) contribute.
Real loss_re(const std::vector<Matrix>& targets, const std::vector<Matrix>& decoded, int tau);
Real loss_ce(const std::vector<Real>& p, const std::vector<int>& labels);

}  // namespace firp::objective
