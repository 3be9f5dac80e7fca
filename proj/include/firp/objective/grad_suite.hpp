#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "firp/model/firp_model.hpp"

namespace firp::objective {

/// Finite-difference checks of every objective term on random micro-batches.
struct GradSuiteConfig {
  model::ModelDims dims = micro_dims();
  int instances = 10;
  int T = 6;
  int B = 3;
  /// Coordinates checked per parameter; 0 checks all of them.
  std::size_t per_param = 0;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;

  /// Every model width at most 8.
  static model::ModelDims micro_dims();
};

struct GradTermResult {
  std::string term;
  int instance = 0;
  double max_rel_error = 0;
  std::string worst_param;
  double analytic = 0;
  double numeric = 0;
  bool pass = false;
};

struct GradSuiteResult {
  std::vector<GradTermResult> rows;
  bool pass = true;
  double worst = 0;

  nlohmann::json to_json() const;
};

/// Terms, in order: L_KL_1, L_KL_2, L_re, L_ce, R_TTC, R_ATC, total.
const std::vector<std::string>& grad_suite_terms();

GradSuiteResult run_grad_suite(const GradSuiteConfig& cfg);

}  // namespace firp::objective
