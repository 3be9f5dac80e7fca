#include "firp/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "firp/errors.hpp"

namespace firp::diff {
namespace {

std::vector<Real> evaluate(const MultiFn& f, ParamSet& params) {
  Tape t;
  std::vector<Real> out;
  for (Var v : f(t, params)) {
    if (v.value().size() != 1) throw DimensionError("grad_check: function must return 1x1 nodes");
    if (!std::isfinite(v.scalar())) throw NumericError("grad_check: function value is not finite");
    out.push_back(v.scalar());
  }
  return out;
}

/// Analytic gradient of output k, copied out of the parameter slots.
std::map<std::string, Matrix> analytic_grad(const MultiFn& f, ParamSet& params, std::size_t k) {
  params.zero_grad();
  {
    Tape t;
    std::vector<Var> outs = f(t, params);
    Var out = outs.at(k);
    if (out.value().size() != 1) throw DimensionError("grad_check: function must return 1x1 nodes");
    if (!std::isfinite(out.scalar())) throw NumericError("grad_check: function value is not finite");
    t.backward(out);
  }
  std::map<std::string, Matrix> g;
  for (auto& [name, p] : params) g[name] = p.grad;
  return g;
}

}  // namespace

std::vector<GradCheckReport> grad_check_reports(const MultiFn& f, ParamSet& params, Real h, std::size_t per_param,
                                                std::uint64_t seed) {
  const std::vector<Real> base = evaluate(f, params);
  std::vector<std::map<std::string, Matrix>> grads;
  for (std::size_t k = 0; k < base.size(); ++k) grads.push_back(analytic_grad(f, params, k));
  params.zero_grad();

  std::mt19937_64 rng(seed);
  std::vector<GradCheckReport> reports(base.size());
  for (auto& [name, p] : params) {
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.value.size()));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    if (per_param > 0 && coords.size() > per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (Eigen::Index i : coords) {
      Real& x = p.value.data()[i];
      const Real saved = x;
      x = saved + h;
      const std::vector<Real> up = evaluate(f, params);
      x = saved - h;
      const std::vector<Real> down = evaluate(f, params);
      x = saved;
      for (std::size_t k = 0; k < base.size(); ++k) {
        const Real numeric = (up[k] - down[k]) / (2 * h);
        const Real analytic = grads[k].at(name).data()[i];
        const Real floor = 1e-6 * std::max(Real(1), std::abs(base[k]));
        const Real err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
        GradCheckReport& r = reports[k];
        ++r.coordinates;
        if (err > r.max_rel_error || r.worst_index < 0) {
          r.max_rel_error = err;
          r.worst_param = name;
          r.worst_index = i;
          r.analytic = analytic;
          r.numeric = numeric;
        }
      }
    }
  }
  return reports;
}

GradCheckReport grad_check_report(const ScalarFn& f, ParamSet& params, Real h, std::size_t per_param,
                                  std::uint64_t seed) {
  MultiFn multi = [&f](Tape& t, ParamSet& p) { return std::vector<Var>{f(t, p)}; };
  GradCheckReport r = grad_check_reports(multi, params, h, per_param, seed).front();
  // Leave the analytic gradient in the slots.
  params.zero_grad();
  Tape t;
  t.backward(f(t, params));
  return r;
}

GradCheckReport grad_check_report(const ScalarFn& f, ParamSet& params, Real h) {
  return grad_check_report(f, params, h, 0, 0);
}

Real grad_check(const ScalarFn& f, ParamSet& params, Real h) { return grad_check_report(f, params, h).max_rel_error; }

}  // namespace firp::diff
