#include "firp/model/firp_model.hpp"

#include <map>

#include "firp/errors.hpp"

namespace firp::model {

namespace {

Var row_constant(Tape& tape, const Vector& v) { return tape.constant(v.transpose()); }

Vector row_value(Var v) { return v.value().row(0).transpose(); }

}  // namespace

void ModelDims::validate() const {
  if (D <= 0 || d_e <= 0 || d_h <= 0 || d_s <= 0 || d_q <= 0 || M <= 0 || A <= 0 || hidden <= 0 || !(L > 0)) {
    throw ConfigError("model dims must all be positive");
  }
}

LatentState LatentState::initial(const ModelDims& dims) {
  return LatentState{Vector::Zero(dims.d_h), DiagGaussian(Vector::Zero(dims.d_s), Vector::Ones(dims.d_s)),
                     Vector::Zero(dims.d_s)};
}

void add_score_head_params(ParamSet& params, int d_e, int hidden, int d_q, int M, std::mt19937_64& rng) {
  add_mlp2_params(params, "q", d_e, hidden, d_q, rng);
  params.add("proto", diff::standard_normal(rng, M, d_q));
  params.add("head.W", glorot_uniform(rng, d_q, 1));
  params.add("head.b", Matrix::Zero(1, 1));
}

ScoreHeadVars bind_score_head(Tape& tape, ParamSet& params, Real temperature, bool trainable) {
  return ScoreHeadVars{bind_mlp2(tape, params, "q", trainable), tape.param(params.at("proto"), trainable),
                       tape.param(params.at("head.W"), trainable), tape.param(params.at("head.b"), trainable),
                       temperature};
}

Var score_head(const ScoreHeadVars& head, Var features, int steps, int episodes) {
  Var q = mlp2(features, head.q);
  Var w = diff::pool_weights(q, head.prototypes, head.temperature, steps, episodes);
  Var pooled = diff::weighted_time_sum(q, w, steps, episodes);
  return diff::sigmoid(diff::add_row(diff::matmul(pooled, head.w), head.b));
}

void add_encoder_params(ParamSet& params, int D, int hidden, int d_e, std::mt19937_64& rng) {
  add_mlp2_params(params, "enc", D, hidden, d_e, rng);
}

FirpModel::FirpModel(const ModelDims& dims, std::uint64_t seed) : dims_(dims) {
  dims_.validate();
  std::mt19937_64 rng(seed);
  add_encoder_params(params_, dims_.D, dims_.hidden, dims_.d_e, rng);
  add_mlp2_params(params_, "f", dims_.d_s + dims_.A, dims_.hidden, dims_.d_h, rng);
  diff::add_gru_params(params_, "gru", dims_.d_h, dims_.d_h, rng);
  add_mlp2_params(params_, "post", dims_.d_h + dims_.d_e, dims_.hidden, 2 * dims_.d_s, rng);
  add_mlp2_params(params_, "prior", dims_.d_h, dims_.hidden, 2 * dims_.d_s, rng);
  for (const char* name : {"post.1.b", "prior.1.b"})
    params_.at(name).value.rightCols(dims_.d_s).setConstant(kStddevInitBias);
  add_mlp2_params(params_, "dec", dims_.d_s + dims_.d_h, dims_.hidden, dims_.d_e, rng);
  add_score_head_params(params_, dims_.d_e, dims_.hidden, dims_.d_q, dims_.M, rng);
}

InputNorm fit_input_norm(const std::vector<world::Episode>& episodes) {
  if (episodes.empty()) throw ConfigError("input norm needs at least one episode");
  auto fit = [](const Matrix& x, Vector& shift, Vector& scale) {
    shift = x.colwise().mean().transpose();
    Matrix c = x.rowwise() - shift.transpose();
    Vector sd = (c.array().square().colwise().sum() / static_cast<Real>(x.rows())).sqrt().transpose();
    scale = Vector::Ones(sd.size());
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (sd(j) > 1e-9) scale(j) = 1.0 / sd(j);
    }
  };
  Eigen::Index rows = 0;
  for (const auto& ep : episodes) rows += ep.horizon();
  const Eigen::Index D = episodes.front().initial_observation().size();
  Matrix obs(rows, D), act(rows, world::kActionDim);
  Eigen::Index r = 0;
  for (const auto& ep : episodes) {
    if (ep.initial_observation().size() != D) throw DimensionError("input norm: observation widths differ");
    const Matrix a = ep.action_matrix();
    for (int t = 0; t < ep.horizon(); ++t, ++r) {
      obs.row(r) = ep.observations[t].transpose();
      act.row(r) = a.row(t);
    }
  }
  InputNorm n;
  fit(obs, n.obs_shift, n.obs_scale);
  fit(act, n.act_shift, n.act_scale);
  return n;
}

void FirpModel::set_input_norm(InputNorm norm) {
  if (!norm.empty() && (norm.obs_scale.size() != dims_.D || norm.obs_shift.size() != dims_.D ||
                        norm.act_scale.size() != dims_.A || norm.act_shift.size() != dims_.A)) {
    throw DimensionError("input norm does not match the model dims");
  }
  norm_ = std::move(norm);
}

ModelVars bind_model(Tape& tape, FirpModel& model, bool trainable, bool encoder_trainable) {
  ParamSet& p = model.params();
  ModelVars m;
  m.dims = model.dims();
  m.norm = model.input_norm();
  m.enc = bind_mlp2(tape, p, "enc", trainable && encoder_trainable);
  m.f = bind_mlp2(tape, p, "f", trainable);
  m.gru = diff::bind_gru(tape, p, "gru", trainable);
  m.post = bind_mlp2(tape, p, "post", trainable);
  m.prior = bind_mlp2(tape, p, "prior", trainable);
  m.dec = bind_mlp2(tape, p, "dec", trainable);
  m.head = bind_score_head(tape, p, model.dims().L, trainable);
  return m;
}

ModelVars bind_model(Tape& tape, const FirpModel& model) {
  // Non-trainable leaves never write to the parameter.
  return bind_model(tape, const_cast<FirpModel&>(model), false, false);
}

Var encode(const ModelVars& m, Var obs) {
  if (obs.cols() != m.dims.D) throw DimensionError("encode: observation width mismatch");
  return mlp2(normalize_cols(obs, m.norm.obs_shift, m.norm.obs_scale), m.enc);
}

Var transition(const ModelVars& m, Var h_prev, Var s_prev, Var action) {
  if (action.cols() != m.dims.A || s_prev.cols() != m.dims.d_s || h_prev.cols() != m.dims.d_h) {
    throw DimensionError("transition: shape mismatch");
  }
  Var a = normalize_cols(action, m.norm.act_shift, m.norm.act_scale);
  return diff::gru_cell(h_prev, mlp2(diff::concat_cols(s_prev, a), m.f), m.gru);
}

GaussianVars posterior(const ModelVars& m, Var h, Var e) {
  if (e.cols() != m.dims.d_e) throw DimensionError("posterior: feature width mismatch");
  return gaussian_head(mlp2(diff::concat_cols(h, e), m.post));
}

GaussianVars prior(const ModelVars& m, Var h) { return gaussian_head(mlp2(h, m.prior)); }

Var decode(const ModelVars& m, Var s, Var h) { return mlp2(diff::concat_cols(s, h), m.dec); }

Var draw(const GaussianVars& g, RolloutMode mode, std::mt19937_64* rng) {
  if (mode == RolloutMode::Mean) return g.mean;
  if (rng == nullptr) throw ConfigError("sample mode needs a random generator");
  return diff::sample_reparam(g.mean, g.stddev, diff::standard_normal(*rng, g.mean.rows(), g.mean.cols()));
}

RolloutVars rollout_open_loop(const ModelVars& m, Var e1, const std::vector<Var>& actions, RolloutMode mode,
                              std::mt19937_64* rng) {
  if (actions.size() < 2) throw DimensionError("rollout needs T >= 2");
  Tape& tape = *e1.tape();
  const Eigen::Index n = e1.rows();
  RolloutVars out;
  Var h = tape.constant(Matrix::Zero(n, m.dims.d_h));
  Var s = tape.constant(Matrix::Zero(n, m.dims.d_s));
  h = transition(m, h, s, actions[0]);
  GaussianVars g = posterior(m, h, e1);
  s = draw(g, mode, rng);
  out.latents.push_back({h, g, s});
  for (std::size_t t = 1; t < actions.size(); ++t) {
    h = transition(m, h, s, actions[t]);
    g = prior(m, h);
    s = draw(g, mode, rng);
    out.latents.push_back({h, g, s});
    out.predicted.push_back(decode(m, s, h));
  }
  return out;
}

Var time_major(const std::vector<Var>& steps) { return diff::concat_rows(steps); }

// ---- value-level wrappers ----

Vector FirpModel::encode(const Vector& obs) const {
  if (obs.size() != dims_.D) throw DimensionError("encode: observation length mismatch");
  Tape tape;
  ModelVars m = bind_model(tape, *this);
  return row_value(model::encode(m, row_constant(tape, obs)));
}

namespace {

LatentState finish_step(Var h, const GaussianVars& g, const Vector& noise) {
  DiagGaussian dist(row_value(g.mean), row_value(g.stddev));
  Vector s = noise.size() == 0 ? dist.mean : diff::sample_reparam(dist, noise);
  return LatentState{row_value(h), std::move(dist), std::move(s)};
}

void check_step_inputs(const ModelDims& d, const LatentState& prev, const Vector& action, const Vector& noise) {
  if (prev.h.size() != d.d_h || prev.s_sample.size() != d.d_s || action.size() != d.A) {
    throw DimensionError("latent step: shape mismatch");
  }
  if (noise.size() != 0 && noise.size() != d.d_s) throw DimensionError("latent step: noise length mismatch");
}

}  // namespace

LatentState FirpModel::posterior_step(const LatentState& prev, const Vector& action, const Vector& e,
                                      const Vector& noise) const {
  check_step_inputs(dims_, prev, action, noise);
  Tape tape;
  ModelVars m = bind_model(tape, *this);
  Var h = transition(m, row_constant(tape, prev.h), row_constant(tape, prev.s_sample), row_constant(tape, action));
  return finish_step(h, posterior(m, h, row_constant(tape, e)), noise);
}

LatentState FirpModel::prior_step(const LatentState& prev, const Vector& action, const Vector& noise) const {
  check_step_inputs(dims_, prev, action, noise);
  Tape tape;
  ModelVars m = bind_model(tape, *this);
  Var h = transition(m, row_constant(tape, prev.h), row_constant(tape, prev.s_sample), row_constant(tape, action));
  return finish_step(h, prior(m, h), noise);
}

Vector FirpModel::decode_feature(const LatentState& z) const {
  Tape tape;
  ModelVars m = bind_model(tape, *this);
  return row_value(decode(m, row_constant(tape, z.s_sample), row_constant(tape, z.h)));
}

Rollout FirpModel::rollout_open_loop(const Vector& e1, const Matrix& actions, RolloutMode mode,
                                     std::mt19937_64* rng) const {
  if (actions.rows() < 2) throw DimensionError("rollout needs T >= 2");
  if (actions.cols() != dims_.A || e1.size() != dims_.d_e) throw DimensionError("rollout: shape mismatch");
  Tape tape;
  ModelVars m = bind_model(tape, *this);
  std::vector<Var> acts;
  for (Eigen::Index t = 0; t < actions.rows(); ++t) acts.push_back(tape.constant(actions.row(t)));
  RolloutVars r = model::rollout_open_loop(m, row_constant(tape, e1), acts, mode, rng);
  Rollout out;
  for (const LatentVars& l : r.latents) {
    out.latents.push_back(LatentState{row_value(l.h), DiagGaussian(row_value(l.dist.mean), row_value(l.dist.stddev)),
                                      row_value(l.s)});
  }
  out.predicted = time_major(r.predicted).value();
  return out;
}

Vector FirpModel::pool_weights(const Matrix& q) const {
  if (q.cols() != dims_.d_q || q.rows() < 1) throw DimensionError("pool_weights: shape mismatch");
  Tape tape;
  Var proto = tape.constant(params_.at("proto").value);
  Var w = diff::pool_weights(tape.constant(q), proto, dims_.L, static_cast<int>(q.rows()), 1);
  return w.value().col(0);
}

Real FirpModel::score(const Matrix& features) const {
  if (features.cols() != dims_.d_e || features.rows() < 1) throw DimensionError("score: shape mismatch");
  Tape tape;
  ModelVars m = bind_model(tape, *this);
  return score_head(m.head, tape.constant(features), static_cast<int>(features.rows()), 1).scalar();
}

Real FirpModel::predict(const Vector& first_obs, const Matrix& actions) const {
  Rollout r = rollout_open_loop(encode(first_obs), actions, RolloutMode::Mean);
  Matrix features(actions.rows(), dims_.d_e);
  features.row(0) = encode(first_obs).transpose();
  features.bottomRows(actions.rows() - 1) = r.predicted;
  return score(features);
}

std::vector<Real> FirpModel::predict(const std::vector<world::Episode>& episodes) const {
  std::map<int, std::vector<std::size_t>> by_horizon;
  for (std::size_t i = 0; i < episodes.size(); ++i) by_horizon[episodes[i].horizon()].push_back(i);
  std::vector<Real> out(episodes.size(), 0.0);
  for (const auto& [T, idx] : by_horizon) {
    if (T < 2) throw DimensionError("predict needs T >= 2");
    const auto B = static_cast<Eigen::Index>(idx.size());
    Matrix obs(B, dims_.D);
    std::vector<Matrix> acts(T, Matrix(B, dims_.A));
    for (Eigen::Index b = 0; b < B; ++b) {
      const world::Episode& ep = episodes[idx[b]];
      if (ep.initial_observation().size() != dims_.D) throw DimensionError("predict: observation length mismatch");
      obs.row(b) = ep.initial_observation().transpose();
      Matrix a = ep.action_matrix();
      for (int t = 0; t < T; ++t) acts[t].row(b) = a.row(t);
    }
    Tape tape;
    ModelVars m = bind_model(tape, *this);
    std::vector<Var> av;
    for (Matrix& a : acts) av.push_back(tape.constant(std::move(a)));
    Var e1 = model::encode(m, tape.constant(std::move(obs)));
    RolloutVars r = model::rollout_open_loop(m, e1, av, RolloutMode::Mean, nullptr);
    std::vector<Var> feats{e1};
    feats.insert(feats.end(), r.predicted.begin(), r.predicted.end());
    Var p = score_head(m.head, time_major(feats), T, static_cast<int>(B));
    for (Eigen::Index b = 0; b < B; ++b) out[idx[b]] = p.value()(b, 0);
  }
  return out;
}

}  // namespace firp::model
