#include "firp/objective/total_loss.hpp"

#include <algorithm>
#include <cmath>

#include "firp/errors.hpp"

namespace firp::objective {

using model::GaussianVars;

Batch make_batch(const std::vector<world::Episode>& episodes, const std::vector<std::size_t>& index) {
  if (index.empty()) throw DimensionError("empty batch");
  Batch b;
  b.T = episodes.at(index.front()).horizon();
  b.B = static_cast<int>(index.size());
  const auto D = episodes.at(index.front()).initial_observation().size();
  if (b.T < 2) throw DimensionError("batch episodes need T >= 2");
  b.obs.resize(static_cast<Eigen::Index>(b.T) * b.B, D);
  b.actions.resize(static_cast<Eigen::Index>(b.T) * b.B, world::kActionDim);
  for (int k = 0; k < b.B; ++k) {
    const world::Episode& ep = episodes.at(index[k]);
    if (ep.horizon() != b.T || static_cast<int>(ep.observations.size()) != b.T) {
      throw DimensionError("batch episodes differ in horizon");
    }
    std::vector<int> cats;
    for (int t = 0; t < b.T; ++t) {
      if (ep.observations[t].size() != D) throw DimensionError("batch episodes differ in observation width");
      const Eigen::Index row = static_cast<Eigen::Index>(t) * b.B + k;
      b.obs.row(row) = ep.observations[t].transpose();
      b.actions.row(row) = ep.actions[t].to_vector().transpose();
      cats.push_back(static_cast<int>(ep.actions[t].category));
    }
    b.categories.push_back(std::move(cats));
    b.labels.push_back(ep.label ? 1 : 0);
  }
  return b;
}

Batch make_batch(const std::vector<world::Episode>& episodes) {
  std::vector<std::size_t> idx(episodes.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(episodes, idx);
}

std::vector<int> overshoot_set(const std::vector<int>& requested, int T) {
  std::vector<int> out;
  for (int tau : requested) {
    tau = std::min(tau, T - 1);
    if (tau >= 2) out.push_back(tau);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

nlohmann::json LossReport::to_json() const {
  nlohmann::json j;
  j["L_ce"] = ce;
  for (const auto& [tau, v] : kl) j["L_KL_" + std::to_string(tau)] = v;
  for (const auto& [tau, v] : re) j["L_re_" + std::to_string(tau)] = v;
  j["R_sm"] = r_sm;
  j["R_sp"] = r_sp;
  j["R_TTC"] = r_ttc;
  j["S_w"] = s_w;
  j["S_b"] = s_b;
  j["R_ATC"] = r_atc;
  j["R_TCR"] = r_tcr;
  j["total"] = total;
  j["f_weight"] = f_weight;
  return j;
}

std::pair<TtcVars, AtcVars> batch_tcr(Var features, const Batch& batch) {
  diff::Tape& tape = *features.tape();
  Var sm = tape.scalar_constant(0), sp = sm, sw = sm, sb = sm;
  for (int b = 0; b < batch.B; ++b) {
    std::vector<int> rows;
    for (int t = 0; t < batch.T; ++t) rows.push_back(t * batch.B + b);
    Var d = directions(diff::gather_rows(features, rows));
    TtcVars ttc = r_ttc(d);
    const std::vector<int>& cats = batch.categories[b];
    AtcVars atc = r_atc(d, std::vector<int>(cats.begin(), cats.end() - 1));
    sm = diff::add(sm, ttc.r_sm);
    sp = diff::add(sp, ttc.r_sp);
    sw = diff::add(sw, atc.s_w);
    sb = diff::add(sb, atc.s_b);
  }
  const Real inv = 1.0 / batch.B;
  sm = diff::scale(sm, inv);
  sp = diff::scale(sp, inv);
  sw = diff::scale(sw, inv);
  sb = diff::scale(sb, inv);
  return {TtcVars{sm, sp, diff::add(sm, sp)}, AtcVars{sw, sb, diff::sub(sb, sw)}};
}

namespace {

GaussianVars slice(const GaussianVars& g, Eigen::Index first, Eigen::Index count) {
  return {diff::slice_rows(g.mean, first, count), diff::slice_rows(g.stddev, first, count)};
}

}  // namespace

LossVars build_loss(diff::Tape& tape, model::FirpModel& model, const Batch& batch, const ObjectiveConfig& cfg,
                    std::mt19937_64& rng) {
  const int T = batch.T;
  const int B = batch.B;
  const Eigen::Index Bi = B;
  model::ModelVars m = model::bind_model(tape, model, true, cfg.encoder_trainable);
  LossVars out;

  Var E = model::encode(m, tape.constant(batch.obs));
  out.ce = loss_ce(model::score_head(m.head, E, T, B), batch.labels);
  Var total = out.ce;

  if (cfg.prediction) {
    out.f_weight = 1;
    Var A = tape.constant(batch.actions);
    // Posterior chain.
    Var h = tape.constant(Matrix::Zero(Bi, model.dims().d_h));
    Var s = tape.constant(Matrix::Zero(Bi, model.dims().d_s));
    std::vector<Var> hs, ss, post_mean, post_std;
    for (int t = 0; t < T; ++t) {
      h = model::transition(m, h, s, diff::slice_rows(A, t * Bi, Bi));
      GaussianVars g = model::posterior(m, h, diff::slice_rows(E, t * Bi, Bi));
      s = model::draw(g, model::RolloutMode::Sample, &rng);
      hs.push_back(h);
      ss.push_back(s);
      post_mean.push_back(g.mean);
      post_std.push_back(g.stddev);
    }
    // Posteriors and targets for t = 2..T.
    GaussianVars post_late{model::time_major({post_mean.begin() + 1, post_mean.end()}),
                           model::time_major({post_std.begin() + 1, post_std.end()})};
    Var E_late = diff::slice_rows(E, Bi, (T - 1) * Bi);

    // Depth 1: the prior at t = j + 1 shares h_{j+1} with the posterior chain.
    Var hk = model::time_major({hs.begin() + 1, hs.end()});
    GaussianVars pk = model::prior(m, hk);
    Var sk = model::draw(pk, model::RolloutMode::Sample, &rng);
    out.kl[1] = loss_kl(post_late, pk, B, T);
    out.re[1] = loss_re(E_late, model::decode(m, sk, hk), B, T);
    Var f = diff::add(out.kl[1], out.re[1]);

    const std::vector<int> taus = overshoot_set(cfg.overshoot, T);
    if (!taus.empty()) {
      // Rows of depth-k states are starts j = 1..T-k, time-major by j.
      Var over = tape.scalar_constant(0);
      const int max_tau = taus.back();
      for (int k = 2; k <= max_tau; ++k) {
        const Eigen::Index rows = static_cast<Eigen::Index>(T - k) * Bi;
        hk = model::transition(m, diff::slice_rows(hk, 0, rows), diff::slice_rows(sk, 0, rows),
                               diff::slice_rows(A, k * Bi, rows));
        pk = model::prior(m, hk);
        sk = model::draw(pk, model::RolloutMode::Sample, &rng);
        if (std::find(taus.begin(), taus.end(), k) == taus.end()) continue;
        // Target time t = j + k occupies rows (t - 2) * B in the late arrays.
        const Eigen::Index first = static_cast<Eigen::Index>(k - 1) * Bi;
        out.kl[k] = loss_kl(slice(post_late, first, rows), pk, B, T);
        out.re[k] = loss_re(diff::slice_rows(E_late, first, rows), model::decode(m, sk, hk), B, T);
        over = diff::add(over, diff::add(out.kl[k], out.re[k]));
      }
      f = diff::add(f, diff::scale(over, cfg.lambda / (T - 1)));
    }
    total = diff::add(total, f);
  }

  auto [ttc, atc] = batch_tcr(E, batch);
  out.ttc = ttc;
  out.atc = atc;
  out.r_tcr = diff::add(diff::scale(ttc.r_ttc, cfg.alpha), diff::scale(atc.r_atc, cfg.beta));
  out.total = diff::add(total, out.r_tcr);
  return out;
}

LossReport make_report(const LossVars& v) {
  auto check = [](Var x, const std::string& name) {
    const Real r = x.scalar();
    if (!std::isfinite(r)) throw NumericError("non-finite loss term " + name);
    return r;
  };
  LossReport r;
  r.ce = check(v.ce, "L_ce");
  for (const auto& [tau, x] : v.kl) r.kl[tau] = check(x, "L_KL_" + std::to_string(tau));
  for (const auto& [tau, x] : v.re) r.re[tau] = check(x, "L_re_" + std::to_string(tau));
  r.r_sm = check(v.ttc.r_sm, "R_sm");
  r.r_sp = check(v.ttc.r_sp, "R_sp");
  r.r_ttc = check(v.ttc.r_ttc, "R_TTC");
  r.s_w = check(v.atc.s_w, "S_w");
  r.s_b = check(v.atc.s_b, "S_b");
  r.r_atc = check(v.atc.r_atc, "R_ATC");
  r.r_tcr = check(v.r_tcr, "R_TCR");
  r.total = check(v.total, "total");
  r.f_weight = v.f_weight;
  return r;
}

LossReport total_loss(model::FirpModel& model, const Batch& batch, const ObjectiveConfig& cfg, std::mt19937_64& rng,
                      bool backward) {
  diff::Tape tape;
  LossVars v = build_loss(tape, model, batch, cfg, rng);
  LossReport r = make_report(v);
  if (backward) tape.backward(v.total);
  return r;
}

}  // namespace firp::objective
