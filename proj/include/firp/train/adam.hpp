#pragma once

#include <functional>
#include <map>
#include <string>

#include "firp/diff/tensor.hpp"

namespace firp::train {

using diff::Matrix;
using diff::ParamSet;
using diff::Real;

struct AdamConfig {
  Real lr = 1e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

/// Adam with bias correction. Moments are created lazily per parameter name.
class Adam {
 public:
  using Filter = std::function<bool(const std::string&)>;

  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  /// Updates every parameter for which `trainable(name)` holds (all if empty).
  /// Skipped parameters keep their values and moments untouched.
  void step(ParamSet& params, const Filter& trainable = {});
  int steps() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
};

/// L2 norm over all gradients.
Real global_grad_norm(const ParamSet& params);
/// Rescales all gradients so the global norm is at most `max_norm`.
/// Returns the norm before clipping.
Real clip_global_norm(ParamSet& params, Real max_norm);

}  // namespace firp::train
