#include "firp/replan/replan.hpp"

#include <cstdio>
#include <sstream>

#include "firp/errors.hpp"

namespace firp::replan {

std::pair<std::vector<world::Action>, TrialRecord> screen_and_replan(const world::WorldState& initial,
                                                                     const world::TaskSpec& spec,
                                                                     const PlanScorer& scorer,
                                                                     const plan::PlanParams& first, double threshold,
                                                                     int max_iter) {
  if (max_iter < 1) throw ConfigError("replan.max_iter must be >= 1");
  TrialRecord rec;
  rec.seed = first.seed;
  plan::PlanParams params = first;
  std::vector<world::Action> actions;
  for (int i = 0; i < max_iter; ++i) {
    if (i > 0) {
      params = plan::reorder(params);
      params.seed = plan::derive_seed(first.seed, static_cast<std::uint64_t>(i));
    }
    actions = plan::make_plan(initial, spec, params);
    const double p = scorer(initial, actions);
    const bool ok = p >= threshold;
    rec.history.push_back({params.order, p, ok});
    rec.iterations = i + 1;
    if (ok) {
      rec.accepted = true;
      break;
    }
  }
  return {std::move(actions), std::move(rec)};
}

namespace {

// Keeps trial states apart from dataset episodes drawn with the same seed.
constexpr std::uint64_t kTrialSalt = 0x7265706c616e0001ULL;

double rate(int hits, int n) { return n == 0 ? 0.0 : static_cast<double>(hits) / n; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

nlohmann::json row_json(const VariantRow& r) {
  return {{"variant", r.variant},
          {"overall_success_rate", r.overall_success_rate},
          {"accepted_only_success_rate", r.accepted_only_success_rate},
          {"n", r.n},
          {"mean_iterations", r.mean_iterations}};
}

}  // namespace

ExperimentResult run_experiment(const world::TaskSpec& spec, const PlanScorer& scorer, const ReplanConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("replan.trials must be >= 1");
  ExperimentResult out;
  int base_ok = 0, screened_ok = 0, accepted = 0, accepted_ok = 0, iterations = 0;
  for (int i = 0; i < cfg.trials; ++i) {
    const std::uint64_t seed = plan::derive_seed(cfg.seed ^ kTrialSalt, static_cast<std::uint64_t>(i));
    const world::WorldState initial = world::reset(spec, seed);
    const plan::PlanParams first = plan::PlanParams::defaults(spec, cfg.noise, seed);
    const bool base = world::evaluate_success(world::execute(initial, plan::make_plan(initial, spec, first), spec), spec);
    auto [actions, rec] = screen_and_replan(initial, spec, scorer, first, cfg.threshold, cfg.max_iter);
    rec.baseline_success = base;
    rec.success = world::evaluate_success(world::execute(initial, actions, spec), spec);
    base_ok += base;
    screened_ok += rec.success;
    iterations += rec.iterations;
    if (rec.accepted) {
      ++accepted;
      accepted_ok += rec.success;
    }
    out.trials.push_back(std::move(rec));
  }
  out.baseline = {"baseline", rate(base_ok, cfg.trials), rate(base_ok, cfg.trials), cfg.trials, 1.0};
  out.screened = {"screened", rate(screened_ok, cfg.trials), rate(accepted_ok, accepted), cfg.trials,
                  static_cast<double>(iterations) / cfg.trials};
  return out;
}

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json t = nlohmann::json::array();
  for (const TrialRecord& r : trials) {
    nlohmann::json hist = nlohmann::json::array();
    for (const IterationRecord& it : r.history) hist.push_back({{"order", it.order}, {"p", it.p}, {"accepted", it.accepted}});
    t.push_back({{"seed", r.seed},
                 {"iterations", r.iterations},
                 {"history", std::move(hist)},
                 {"accepted", r.accepted},
                 {"success", r.success},
                 {"baseline_success", r.baseline_success}});
  }
  return {{"table", {row_json(baseline), row_json(screened)}}, {"trials", std::move(t)}};
}

std::string ExperimentResult::to_csv() const {
  std::ostringstream out;
  out << "variant,overall_success_rate,accepted_only_success_rate,n,mean_iterations\n";
  for (const VariantRow* r : {&baseline, &screened}) {
    out << r->variant << ',' << fmt(r->overall_success_rate) << ',' << fmt(r->accepted_only_success_rate) << ','
        << r->n << ',' << fmt(r->mean_iterations) << '\n';
  }
  return out.str();
}

}  // namespace firp::replan
