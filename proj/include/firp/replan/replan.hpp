#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "firp/plan/planner.hpp"

namespace firp::replan {

/// Success probability of executing `plan` from `initial`.
using PlanScorer = std::function<double(const world::WorldState& initial, const std::vector<world::Action>& plan)>;

struct IterationRecord {
  std::vector<int> order;
  double p = 0;
  bool accepted = false;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  int iterations = 0;
  std::vector<IterationRecord> history;
  bool accepted = false;
  /// Outcome of the screened plan.
  bool success = false;
  /// Outcome of the unscreened first plan.
  bool baseline_success = false;
};

/// Scores plans, reordering blocks after each rejection, until one scores
/// at least `threshold` or `max_iter` plans were scored; the last plan is
/// returned either way. Iteration i > 0 also redraws the waypoint-noise seed.
std::pair<std::vector<world::Action>, TrialRecord> screen_and_replan(const world::WorldState& initial,
                                                                     const world::TaskSpec& spec,
                                                                     const PlanScorer& scorer,
                                                                     const plan::PlanParams& first,
                                                                     double threshold = 0.5, int max_iter = 6);

struct ReplanConfig {
  int trials = 50;
  double threshold = 0.5;
  int max_iter = 6;
  double noise = 0.005;
  std::uint64_t seed = 0;
};

struct VariantRow {
  std::string variant;
  double overall_success_rate = 0;
  /// Success rate over trials the classifier accepted (overall rate for the baseline).
  double accepted_only_success_rate = 0;
  int n = 0;
  double mean_iterations = 0;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  VariantRow baseline;
  VariantRow screened;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Paired trials: each seed yields one initial state that both the baseline
/// (first plan, executed as is) and the screened branch start from.
ExperimentResult run_experiment(const world::TaskSpec& spec, const PlanScorer& scorer, const ReplanConfig& cfg);

}  // namespace firp::replan
