#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "firp/diff/tape.hpp"

namespace firp::diff {

/// Builds a 1x1 loss on the given tape from the parameters (bound with
/// tape.param). Must be deterministic.
using ScalarFn = std::function<Var(Tape&, ParamSet&)>;
/// Several 1x1 outputs recorded on one tape; the count must not change.
using MultiFn = std::function<std::vector<Var>(Tape&, ParamSet&)>;

struct GradCheckReport {
  Real max_rel_error = 0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  Real analytic = 0;
  Real numeric = 0;
  std::size_t coordinates = 0;
};

/// Compares the reverse-mode gradient of `f` against central differences
/// (f(x+h) - f(x-h)) / 2h for every parameter coordinate. The relative error
/// of a coordinate is |a - n| / max(|a|, |n|, 1e-6 * max(1, |f|)); the floor
/// keeps rounding noise on exactly-zero gradients from counting as error.
/// Parameter values are restored on return; their gradient slots hold the
/// analytic gradient. Throws NumericError when f is not finite.
GradCheckReport grad_check_report(const ScalarFn& f, ParamSet& params, Real h = 1e-5);

/// As above, but checks at most `per_param` coordinates of each parameter,
/// drawn without replacement from `seed`. per_param = 0 checks all.
GradCheckReport grad_check_report(const ScalarFn& f, ParamSet& params, Real h, std::size_t per_param,
                                  std::uint64_t seed);

/// One report per output of `f`, sharing each perturbed evaluation.
/// Gradient slots are left zeroed.
std::vector<GradCheckReport> grad_check_reports(const MultiFn& f, ParamSet& params, Real h, std::size_t per_param,
                                                std::uint64_t seed);

/// Worst relative error from grad_check_report.
Real grad_check(const ScalarFn& f, ParamSet& params, Real h = 1e-5);

}  // namespace firp::diff
