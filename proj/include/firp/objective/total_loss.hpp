#pragma once

#include <map>
#include <random>
#include <vector>

#include "json.hpp"

#include "firp/model/firp_model.hpp"
#include "firp/objective/losses.hpp"
#include "firp/objective/regularizers.hpp"

namespace firp::objective {

/// Episodes of equal horizon in time-major layout (row t * B + b).
struct Batch {
  int T = 0;
  int B = 0;
  Matrix obs;
  /// T x B x A stacked as (T * B) x A.
  Matrix actions;
  std::vector<int> labels;
  /// categories[b][t] for the T actions of episode b.
  std::vector<std::vector<int>> categories;
};

/// Throws DimensionError if the horizons or observation widths differ.
Batch make_batch(const std::vector<world::Episode>& episodes, const std::vector<std::size_t>& index);
Batch make_batch(const std::vector<world::Episode>& episodes);

struct ObjectiveConfig {
  Real lambda = 1e-2;
  Real alpha = 1e-2;
  Real beta = 1e-2;
  /// Requested overshooting distances; see overshoot_set().
  std::vector<int> overshoot{2, 4, 8, 16};
  /// When false the prediction losses are neither computed nor added.
  bool prediction = true;
  bool encoder_trainable = true;
};

/// Each requested distance is capped at T-1; values below 2 are dropped;
/// the result is sorted and unique.
std::vector<int> overshoot_set(const std::vector<int>& requested, int T);

struct LossReport {
  Real ce = 0;
  std::map<int, Real> kl;
  std::map<int, Real> re;
  Real r_sm = 0, r_sp = 0, r_ttc = 0;
  Real s_w = 0, s_b = 0, r_atc = 0;
  Real r_tcr = 0;
  Real total = 0;
  /// 1 when the prediction losses are part of the total, else 0.
  Real f_weight = 0;

  /// Flat object: L_ce, L_KL_<tau>, L_re_<tau>, R_sm, ..., total, f_weight.
  nlohmann::json to_json() const;
};

struct LossVars {
  Var ce;
  std::map<int, Var> kl;
  std::map<int, Var> re;
  TtcVars ttc;
  AtcVars atc;
  Var r_tcr;
  Var total;
  Real f_weight = 0;
};

/// Records the full objective on `tape`. Reparametrization noise comes
/// from `rng`.
LossVars build_loss(diff::Tape& tape, model::FirpModel& model, const Batch& batch, const ObjectiveConfig& cfg,
                    std::mt19937_64& rng);

/// Throws NumericError naming the first non-finite term.
LossReport make_report(const LossVars& vars);

/// Evaluates the objective and, if requested, accumulates parameter gradients.
LossReport total_loss(model::FirpModel& model, const Batch& batch, const ObjectiveConfig& cfg,
                      std::mt19937_64& rng, bool backward = true);

/// TCR terms averaged over the episodes of a time-major feature matrix.
std::pair<TtcVars, AtcVars> batch_tcr(Var features, const Batch& batch);

}  // namespace firp::objective
