#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "firp/errors.hpp"
#include "firp/replan/replan.hpp"

using namespace firp;
using namespace firp::replan;
using world::Action;
using world::TaskSpec;

namespace {

PlanScorer constant(double p) {
  return [p](const world::WorldState&, const std::vector<Action>&) { return p; };
}

// Scores 1 for plans that succeed when executed, 0 otherwise.
PlanScorer perfect(const TaskSpec& spec) {
  return [spec](const world::WorldState& s, const std::vector<Action>& plan) {
    return world::evaluate_success(world::execute(s, plan, spec), spec) ? 1.0 : 0.0;
  };
}

bool same_plan(const std::vector<Action>& a, const std::vector<Action>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].to_vector() != b[i].to_vector()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("an accepting model keeps the first plan") {
  const TaskSpec spec = TaskSpec::stacking();
  const world::WorldState s0 = world::reset(spec, 1);
  const plan::PlanParams first = plan::PlanParams::defaults(spec, 0.005, 4);
  const auto [plan, rec] = screen_and_replan(s0, spec, constant(0.9), first);
  CHECK(rec.iterations == 1);
  CHECK(rec.accepted);
  REQUIRE(rec.history.size() == 1);
  CHECK(rec.history[0].order == first.order);
  CHECK(same_plan(plan, plan::make_plan(s0, spec, first)));
}

TEST_CASE("a rejecting model stops after max_iter and returns the last plan") {
  const TaskSpec spec = TaskSpec::stacking();
  const world::WorldState s0 = world::reset(spec, 2);
  const plan::PlanParams first = plan::PlanParams::defaults(spec, 0.005, 5);
  const auto [plan, rec] = screen_and_replan(s0, spec, constant(0.1), first);
  CHECK(rec.iterations == 6);
  CHECK_FALSE(rec.accepted);
  REQUIRE(rec.history.size() == 6);
  for (const IterationRecord& it : rec.history) CHECK_FALSE(it.accepted);

  plan::PlanParams p = first;
  for (int i = 1; i < 6; ++i) p = plan::reorder(p);
  p.seed = plan::derive_seed(first.seed, 5);
  CHECK(rec.history.back().order == p.order);
  CHECK(same_plan(plan, plan::make_plan(s0, spec, p)));

  CHECK(screen_and_replan(s0, spec, constant(0.1), first, 0.5, 2).second.iterations == 2);
  CHECK_THROWS_AS(screen_and_replan(s0, spec, constant(0.1), first, 0.5, 0), ConfigError);
}

TEST_CASE("reject-twice model visits orders lexicographically") {
  const TaskSpec spec = TaskSpec::stacking();
  const world::WorldState s0 = world::reset(spec, 3);
  int calls = 0;
  const PlanScorer twice = [&](const world::WorldState&, const std::vector<Action>&) { return ++calls > 2 ? 1.0 : 0.0; };
  const auto [plan, rec] = screen_and_replan(s0, spec, twice, plan::PlanParams::defaults(spec, 0.005, 6));
  CHECK(rec.iterations == 3);
  CHECK(rec.accepted);
  REQUIRE(rec.history.size() == 3);
  CHECK(rec.history[0].order == std::vector<int>{0, 1, 2});
  CHECK(rec.history[1].order == std::vector<int>{0, 2, 1});
  CHECK(rec.history[2].order == std::vector<int>{1, 0, 2});
  CHECK(rec.history[2].p == 1.0);
}

TEST_CASE("threshold is inclusive") {
  const TaskSpec spec = TaskSpec::replacement();
  const world::WorldState s0 = world::reset(spec, 4);
  CHECK(screen_and_replan(s0, spec, constant(0.5), plan::PlanParams::defaults(spec), 0.5).second.accepted);
  CHECK_FALSE(screen_and_replan(s0, spec, constant(0.4999), plan::PlanParams::defaults(spec), 0.5).second.accepted);
}

TEST_CASE("always-accept screening matches the baseline") {
  for (TaskSpec spec : {TaskSpec::stacking(), TaskSpec::replacement()}) {
    ReplanConfig cfg;
    cfg.trials = 30;
    cfg.noise = spec.kind == world::TaskKind::Stacking ? 0.005 : 0.02;
    const ExperimentResult r = run_experiment(spec, constant(1.0), cfg);
    CHECK(r.screened.overall_success_rate == r.baseline.overall_success_rate);
    CHECK(r.screened.accepted_only_success_rate == r.baseline.overall_success_rate);
    CHECK(r.screened.mean_iterations == 1.0);
    for (const TrialRecord& t : r.trials) CHECK(t.success == t.baseline_success);
  }
}

TEST_CASE("perfect classifier succeeds whenever some visited plan is feasible") {
  const TaskSpec spec = TaskSpec::stacking();
  ReplanConfig cfg;
  cfg.trials = 30;
  cfg.noise = 0.0;
  const ExperimentResult r = run_experiment(spec, perfect(spec), cfg);
  int feasible = 0;
  for (const TrialRecord& t : r.trials) {
    const world::WorldState s0 = world::reset(spec, t.seed);
    plan::PlanParams p = plan::PlanParams::defaults(spec, 0.0, t.seed);
    bool any = false;
    for (int k = 0; k < 6; ++k, p = plan::reorder(p)) any = any || perfect(spec)(s0, plan::make_plan(s0, spec, p)) == 1.0;
    feasible += any;
    CHECK(t.success == any);
    CHECK(t.accepted == any);
  }
  CHECK(feasible == cfg.trials);
  CHECK(r.screened.overall_success_rate == 1.0);
  CHECK(r.screened.accepted_only_success_rate == 1.0);
  CHECK(r.screened.overall_success_rate >= r.baseline.overall_success_rate);
}

TEST_CASE("accepted-only rate is at least the overall rate for an informative scorer") {
  const TaskSpec spec = TaskSpec::stacking();
  const PlanScorer truth = perfect(spec);
  // Right about four times in five, deterministically per plan.
  const PlanScorer noisy = [&](const world::WorldState& s, const std::vector<Action>& plan) {
    const std::uint64_t h = plan::derive_seed(static_cast<std::uint64_t>(plan[3].dx * 1e9 + plan[3].dy * 1e6), 7);
    const double t = truth(s, plan);
    return h % 5 == 0 ? 1.0 - t : t;
  };
  ReplanConfig cfg;
  cfg.trials = 50;
  const ExperimentResult r = run_experiment(spec, noisy, cfg);
  CHECK(r.screened.accepted_only_success_rate >= r.screened.overall_success_rate);
  CHECK(r.screened.overall_success_rate >= r.baseline.overall_success_rate);
}

TEST_CASE("trials are paired and deterministic") {
  const TaskSpec spec = TaskSpec::replacement();
  ReplanConfig cfg;
  cfg.trials = 12;
  cfg.noise = 0.02;
  cfg.seed = 9;
  const PlanScorer s = [](const world::WorldState& st, const std::vector<Action>& plan) {
    return 0.5 + 0.5 * std::sin(st.blocks[0].x * 17 + plan[2].dx * 31);
  };
  const ExperimentResult a = run_experiment(spec, s, cfg);
  const ExperimentResult b = run_experiment(spec, s, cfg);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.trials.size() == 12);
  for (const TrialRecord& t : a.trials) {
    CHECK(t.history.size() == static_cast<std::size_t>(t.iterations));
    CHECK(t.history.front().order == plan::PlanParams::defaults(spec).order);
    // The first screened plan is the baseline plan, so a first-try accept repeats its outcome.
    if (t.iterations == 1) CHECK(t.success == t.baseline_success);
  }
  cfg.seed = 10;
  CHECK(run_experiment(spec, s, cfg).to_json().dump() != a.to_json().dump());
  cfg.trials = 0;
  CHECK_THROWS_AS(run_experiment(spec, s, cfg), ConfigError);
}

TEST_CASE("csv table") {
  ReplanConfig cfg;
  cfg.trials = 4;
  const std::string csv = run_experiment(TaskSpec::stacking(), constant(1.0), cfg).to_csv();
  CHECK(csv.rfind("variant,overall_success_rate,accepted_only_success_rate,n,mean_iterations\nbaseline,", 0) == 0);
  CHECK(csv.find("\nscreened,") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
