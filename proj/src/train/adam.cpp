#include "firp/train/adam.hpp"

#include <cmath>

#include "firp/errors.hpp"

namespace firp::train {

void Adam::step(ParamSet& params, const Filter& trainable) {
  if (!(cfg_.lr >= 0)) throw ConfigError("learning rate must be non-negative");
  ++t_;
  const Real c1 = 1 - std::pow(cfg_.beta1, t_);
  const Real c2 = 1 - std::pow(cfg_.beta2, t_);
  for (auto& [name, p] : params) {
    if (trainable && !trainable(name)) continue;
    Matrix& m = m_.try_emplace(name, Matrix::Zero(p.value.rows(), p.value.cols())).first->second;
    Matrix& v = v_.try_emplace(name, Matrix::Zero(p.value.rows(), p.value.cols())).first->second;
    m = cfg_.beta1 * m + (1 - cfg_.beta1) * p.grad;
    v = cfg_.beta2 * v + (1 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  }
}

Real global_grad_norm(const ParamSet& params) {
  Real sq = 0;
  for (const auto& [name, p] : params) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

Real clip_global_norm(ParamSet& params, Real max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip norm must be positive");
  const Real norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (norm > max_norm) {
    const Real s = max_norm / norm;
    for (auto& [name, p] : params) p.grad *= s;
  }
  return norm;
}

}  // namespace firp::train
