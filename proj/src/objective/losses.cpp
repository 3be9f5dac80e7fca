#include "firp/objective/losses.hpp"

#include "firp/errors.hpp"

namespace firp::objective {

namespace {

Real norm_factor(int N, int T) {
  if (N < 1 || T < 1) throw DimensionError("loss normalization needs N, T >= 1");
  return 1.0 / (static_cast<Real>(N) * static_cast<Real>(T));
}

}  // namespace

Var loss_kl(const model::GaussianVars& q, const model::GaussianVars& p, int N, int T) {
  return diff::scale(diff::sum(diff::gaussian_kl_rows(q.mean, q.stddev, p.mean, p.stddev)), norm_factor(N, T));
}

Var loss_re(Var e, Var e_hat, int N, int T) {
  return diff::scale(diff::sum(diff::square(diff::sub(e, e_hat))), norm_factor(N, T));
}

Var loss_ce(Var p, const std::vector<int>& labels) { return diff::binary_cross_entropy(p, labels); }

Real loss_kl(const std::vector<std::vector<DiagGaussian>>& posteriors,
             const std::vector<std::vector<DiagGaussian>>& priors, int tau) {
  if (posteriors.empty() || posteriors.size() != priors.size()) throw DimensionError("loss_kl: batch size mismatch");
  if (tau < 1) throw DomainError("loss_kl: tau must be >= 1");
  const int N = static_cast<int>(posteriors.size());
  const int T = static_cast<int>(posteriors.front().size());
  Real total = 0;
  for (int n = 0; n < N; ++n) {
    if (static_cast<int>(posteriors[n].size()) != T || static_cast<int>(priors[n].size()) != T) {
      throw DimensionError("loss_kl: sequence length mismatch");
    }
    for (int t = tau; t < T; ++t) total += diff::gaussian_kl(posteriors[n][t], priors[n][t]);
  }
  return total * norm_factor(N, T);
}

Real loss_re(const std::vector<Matrix>& targets, const std::vector<Matrix>& decoded, int tau) {
  if (targets.empty() || targets.size() != decoded.size()) throw DimensionError("loss_re: batch size mismatch");
  if (tau < 1) throw DomainError("loss_re: tau must be >= 1");
  const int N = static_cast<int>(targets.size());
  const auto T = targets.front().rows();
  Real total = 0;
  for (int n = 0; n < N; ++n) {
    if (targets[n].rows() != T || decoded[n].rows() != T || targets[n].cols() != decoded[n].cols()) {
      throw DimensionError("loss_re: shape mismatch");
    }
    for (Eigen::Index t = tau; t < T; ++t) total += (targets[n].row(t) - decoded[n].row(t)).squaredNorm();
  }
  return total * norm_factor(N, static_cast<int>(T));
}

Real loss_ce(const std::vector<Real>& p, const std::vector<int>& labels) {
  diff::Tape tape;
  Matrix m(static_cast<Eigen::Index>(p.size()), 1);
  for (std::size_t i = 0; i < p.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = p[i];
  return diff::binary_cross_entropy(tape.constant(m), labels).scalar();
}

}  // namespace firp::objective
