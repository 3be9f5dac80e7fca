#include "firp/objective/grad_suite.hpp"

#include <algorithm>

#include "firp/diff/grad_check.hpp"
#include "firp/errors.hpp"
#include "firp/objective/total_loss.hpp"

namespace firp::objective {

model::ModelDims GradSuiteConfig::micro_dims() {
  model::ModelDims d;
  d.D = 5;
  d.d_e = 6;
  d.d_h = 8;
  d.d_s = 4;
  d.d_q = 5;
  d.M = 3;
  d.L = 0.5;
  d.hidden = 8;
  return d;
}

const std::vector<std::string>& grad_suite_terms() {
  static const std::vector<std::string> terms{"L_KL_1", "L_KL_2", "L_re", "L_ce", "R_TTC", "R_ATC", "total"};
  return terms;
}

nlohmann::json GradSuiteResult::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const GradTermResult& r : rows) {
    rows_json.push_back({{"term", r.term},
                         {"instance", r.instance},
                         {"max_rel_error", r.max_rel_error},
                         {"worst_param", r.worst_param},
                         {"analytic", r.analytic},
                         {"numeric", r.numeric},
                         {"pass", r.pass}});
  }
  return {{"pass", pass}, {"worst", worst}, {"rows", rows_json}};
}

namespace {

Batch random_batch(const model::ModelDims& d, int T, int B, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> cat(0, 2);
  std::bernoulli_distribution coin(0.5);
  Batch b;
  b.T = T;
  b.B = B;
  b.obs.resize(static_cast<Eigen::Index>(T) * B, d.D);
  b.actions = Matrix::Zero(static_cast<Eigen::Index>(T) * B, d.A);
  b.categories.assign(static_cast<std::size_t>(B), std::vector<int>(static_cast<std::size_t>(T)));
  for (int k = 0; k < B; ++k) {
    b.labels.push_back(coin(rng) ? 1 : 0);
    for (int t = 0; t < T; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(t) * B + k;
      for (Eigen::Index j = 0; j < d.D; ++j) b.obs(row, j) = normal(rng);
      const int c = cat(rng);
      b.categories[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = c;
      b.actions(row, c) = 1.0;
      for (Eigen::Index j = world::kCategoryCount; j < d.A; ++j) b.actions(row, j) = normal(rng);
    }
  }
  return b;
}

Var pick(const LossVars& v, const std::string& term) {
  if (term == "L_KL_1") return v.kl.at(1);
  if (term == "L_KL_2") return v.kl.at(2);
  if (term == "L_re") return v.re.at(1);
  if (term == "L_ce") return v.ce;
  if (term == "R_TTC") return v.ttc.r_ttc;
  if (term == "R_ATC") return v.atc.r_atc;
  return v.total;
}

}  // namespace

GradSuiteResult run_grad_suite(const GradSuiteConfig& cfg) {
  if (cfg.T < 3) throw ConfigError("gradient suite needs T >= 3");
  GradSuiteResult result;
  std::mt19937_64 rng(cfg.seed);
  ObjectiveConfig oc;
  oc.lambda = 0.5;
  oc.alpha = 0.5;
  oc.beta = 0.5;
  oc.overshoot = {2, 4};
  const std::vector<std::string>& terms = grad_suite_terms();
  for (int inst = 0; inst < cfg.instances; ++inst) {
    const std::uint64_t model_seed = rng();
    const std::uint64_t noise_seed = rng();
    const Batch batch = random_batch(cfg.dims, cfg.T, cfg.B, rng);
    model::FirpModel model(cfg.dims, model_seed);
    // Zero biases can leave a feature row exactly zero, where the cosine
    // pooling is not differentiable; jitter every entry.
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (auto& [name, p] : model.params()) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += jitter(rng);
    }
    // The same reparametrization noise at every evaluation.
    diff::MultiFn fn = [&](diff::Tape& tape, diff::ParamSet&) {
      std::mt19937_64 noise(noise_seed);
      const LossVars v = build_loss(tape, model, batch, oc, noise);
      std::vector<Var> out;
      for (const std::string& term : terms) out.push_back(pick(v, term));
      return out;
    };
    const std::vector<diff::GradCheckReport> reps =
        diff::grad_check_reports(fn, model.params(), 1e-5, cfg.per_param, rng());
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const diff::GradCheckReport& rep = reps[k];
      GradTermResult row{terms[k],        inst,         rep.max_rel_error,
                         rep.worst_param, rep.analytic, rep.numeric,      rep.max_rel_error < cfg.tolerance};
      result.pass = result.pass && row.pass;
      result.worst = std::max(result.worst, row.max_rel_error);
      result.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace firp::objective
