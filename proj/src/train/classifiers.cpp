#include "firp/train/classifiers.hpp"

#include <fstream>
#include <map>

#include "firp/errors.hpp"
#include "firp/model/checkpoint.hpp"

namespace firp::train {

using diff::Matrix;
using diff::Tape;
using diff::Var;
using model::ModelDims;

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Firp: return "firp";
    case ClassifierKind::Gru: return "gru";
    case ClassifierKind::Oracle: return "oracle";
    case ClassifierKind::AMlp: return "a_mlp";
    case ClassifierKind::AMlpEnc: return "a_mlp_enc";
  }
  return "?";
}

ClassifierKind classifier_kind_from_string(const std::string& name) {
  for (ClassifierKind k : {ClassifierKind::Firp, ClassifierKind::Gru, ClassifierKind::Oracle, ClassifierKind::AMlp,
                           ClassifierKind::AMlpEnc}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown classifier '" + name + "'");
}

void for_each_horizon(const std::vector<world::Episode>& episodes,
                      const std::function<void(const std::vector<std::size_t>&, const Batch&)>& fn) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < episodes.size(); ++i) groups[episodes[i].horizon()].push_back(i);
  for (const auto& [T, idx] : groups) fn(idx, objective::make_batch(episodes, idx));
}

world::Episode plan_episode(const diff::Vector& first_obs, const std::vector<world::Action>& actions) {
  world::Episode ep;
  ep.actions = actions;
  ep.observations.assign(actions.size(), first_obs);
  return ep;
}

namespace {

Batch normalized(const Batch& b, const model::InputNorm& n) {
  Batch out = b;
  out.obs = model::normalize_cols(b.obs, n.obs_shift, n.obs_scale);
  out.actions = model::normalize_cols(b.actions, n.act_shift, n.act_scale);
  return out;
}

void scatter(std::vector<Real>& out, const std::vector<std::size_t>& idx, const Matrix& p) {
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = p(static_cast<Eigen::Index>(k), 0);
}

void check_width(const Batch& b, const ModelDims& d) {
  if (b.obs.cols() != d.D) throw DimensionError("observation width differs from model dims");
}

/// Shared by every classifier that encodes observations: (T*B) x d_e.
Var encode_all(Tape& tape, ParamSet& params, const Batch& b, bool trainable) {
  return model::mlp2(tape.constant(b.obs), model::bind_mlp2(tape, params, "enc", trainable));
}

nlohmann::json ce_report(Var ce, Var total) {
  return nlohmann::json{{"L_ce", ce.scalar()}, {"total", total.scalar()}};
}

void finish(Tape& tape, Var total) {
  if (!std::isfinite(total.scalar())) throw NumericError("non-finite loss term total");
  tape.backward(total);
}

// ---- GRU baseline ----

class GruClassifier : public Classifier {
 public:
  GruClassifier(const ClassifierConfig& cfg, std::uint64_t seed) : Classifier(cfg) {
    const ModelDims& d = cfg.dims;
    std::mt19937_64 rng(seed);
    model::add_encoder_params(params_, d.D, d.hidden, d.d_e, rng);
    params_.add("init.W", model::glorot_uniform(rng, d.d_e, d.d_h));
    params_.add("init.b", Matrix::Zero(1, d.d_h));
    diff::add_gru_params(params_, "gru", d.A + 1, d.d_h, rng);
    params_.add("read.W", model::glorot_uniform(rng, d.d_h, d.d_e));
    params_.add("read.b", Matrix::Zero(1, d.d_e));
    model::add_score_head_params(params_, d.d_e, d.hidden, d.d_q, d.M, rng);
  }

  ClassifierKind kind() const override { return ClassifierKind::Gru; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<GruClassifier>(*this); }

  nlohmann::json train_step(const Batch& raw, const StepFlags& flags, std::mt19937_64&) override {
    const Batch b = normalized(raw, norm_);
    check_width(b, cfg_.dims);
    Tape tape;
    Var E = encode_all(tape, params_, b, flags.encoder_trainable);
    model::ScoreHeadVars head = model::bind_score_head(tape, params_, cfg_.dims.L, true);
    Var ce = objective::loss_ce(model::score_head(head, E, b.T, b.B), b.labels);
    Var total = ce;
    Real re = 0;
    if (flags.prediction) {
      Var pred = model::time_major(rollout(tape, E, b, true));
      Var l = objective::loss_re(diff::slice_rows(E, b.B, static_cast<Eigen::Index>(b.T - 1) * b.B), pred, b.B, b.T);
      re = l.scalar();
      total = diff::add(total, l);
    }
    nlohmann::json r = ce_report(ce, total);
    r["L_re_1"] = re;
    r["f_weight"] = flags.prediction ? 1.0 : 0.0;
    finish(tape, total);
    return r;
  }

  std::vector<Real> predict(const std::vector<world::Episode>& episodes) const override {
    std::vector<Real> out(episodes.size());
    auto& self = const_cast<GruClassifier&>(*this);  // read-only binding below
    for_each_horizon(episodes, [&](const std::vector<std::size_t>& idx, const Batch& raw) {
      const Batch b = normalized(raw, norm_);
      check_width(b, cfg_.dims);
      Tape tape;
      Var e1 = model::mlp2(tape.constant(b.obs.topRows(b.B)), model::bind_mlp2(tape, self.params_, "enc", false));
      std::vector<Var> feats{e1};
      for (Var v : self.rollout(tape, e1, b, false)) feats.push_back(v);
      model::ScoreHeadVars head = model::bind_score_head(tape, self.params_, cfg_.dims.L, false);
      scatter(out, idx, model::score_head(head, model::time_major(feats), b.T, b.B).value());
    });
    return out;
  }

 private:
  /// Predicted features for t = 2..T from e_1 (the first B rows of E).
  std::vector<Var> rollout(Tape& tape, Var E, const Batch& b, bool trainable) {
    const Eigen::Index B = b.B;
    Var e1 = diff::slice_rows(E, 0, B);
    Var h = diff::add_row(diff::matmul(e1, tape.param(params_.at("init.W"), trainable)),
                          tape.param(params_.at("init.b"), trainable));
    diff::GruVars g = diff::bind_gru(tape, params_, "gru", trainable);
    Var rw = tape.param(params_.at("read.W"), trainable);
    Var rb = tape.param(params_.at("read.b"), trainable);
    std::vector<Var> out;
    for (int t = 0; t < b.T; ++t) {
      Matrix x(B, cfg_.dims.A + 1);
      x.leftCols(cfg_.dims.A) = b.actions.middleRows(static_cast<Eigen::Index>(t) * B, B);
      x.col(cfg_.dims.A).setConstant(t == 0 ? 1.0 : 0.0);  // first-observation flag
      h = diff::gru_cell(h, tape.constant(std::move(x)), g);
      if (t > 0) out.push_back(diff::add_row(diff::matmul(h, rw), rb));
    }
    return out;
  }

  ParamSet params_;
};

// ---- Oracle: actual features through the pooling head ----

class OracleClassifier : public Classifier {
 public:
  OracleClassifier(const ClassifierConfig& cfg, std::uint64_t seed) : Classifier(cfg) {
    std::mt19937_64 rng(seed);
    model::add_encoder_params(params_, cfg.dims.D, cfg.dims.hidden, cfg.dims.d_e, rng);
    model::add_score_head_params(params_, cfg.dims.d_e, cfg.dims.hidden, cfg.dims.d_q, cfg.dims.M, rng);
  }

  ClassifierKind kind() const override { return ClassifierKind::Oracle; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<OracleClassifier>(*this); }

  nlohmann::json train_step(const Batch& raw, const StepFlags& flags, std::mt19937_64&) override {
    const Batch b = normalized(raw, norm_);
    check_width(b, cfg_.dims);
    Tape tape;
    Var p = forward(tape, b, flags.encoder_trainable, true);
    Var ce = objective::loss_ce(p, b.labels);
    nlohmann::json r = ce_report(ce, ce);
    finish(tape, ce);
    return r;
  }

  std::vector<Real> predict(const std::vector<world::Episode>& episodes) const override {
    std::vector<Real> out(episodes.size());
    auto& self = const_cast<OracleClassifier&>(*this);
    for_each_horizon(episodes, [&](const std::vector<std::size_t>& idx, const Batch& raw) {
      const Batch b = normalized(raw, norm_);
      check_width(b, cfg_.dims);
      Tape tape;
      scatter(out, idx, self.forward(tape, b, false, false).value());
    });
    return out;
  }

 private:
  Var forward(Tape& tape, const Batch& b, bool enc_trainable, bool trainable) {
    Var E = encode_all(tape, params_, b, enc_trainable && trainable);
    return model::score_head(model::bind_score_head(tape, params_, cfg_.dims.L, trainable), E, b.T, b.B);
  }

  ParamSet params_;
};

// ---- Action MLPs ----

class ActionMlpClassifier : public Classifier {
 public:
  ActionMlpClassifier(const ClassifierConfig& cfg, std::uint64_t seed, bool with_encoder)
      : Classifier(cfg), with_encoder_(with_encoder) {
    const ModelDims& d = cfg.dims;
    std::mt19937_64 rng(seed);
    int in = cfg.T * d.A;
    if (with_encoder_) {
      model::add_encoder_params(params_, d.D, d.hidden, d.d_e, rng);
      in += d.d_e;
    }
    params_.add("a.0.W", model::glorot_uniform(rng, in, d.hidden));
    params_.add("a.0.b", Matrix::Zero(1, d.hidden));
    params_.add("a.1.W", model::glorot_uniform(rng, d.hidden, d.hidden));
    params_.add("a.1.b", Matrix::Zero(1, d.hidden));
    params_.add("a.2.W", model::glorot_uniform(rng, d.hidden, 1));
    params_.add("a.2.b", Matrix::Zero(1, 1));
  }

  ClassifierKind kind() const override { return with_encoder_ ? ClassifierKind::AMlpEnc : ClassifierKind::AMlp; }
  ParamSet& params() override { return params_; }
  const ParamSet& params() const override { return params_; }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<ActionMlpClassifier>(*this); }

  nlohmann::json train_step(const Batch& raw, const StepFlags& flags, std::mt19937_64&) override {
    const Batch b = normalized(raw, norm_);
    Tape tape;
    Var ce = objective::loss_ce(forward(tape, b, flags.encoder_trainable, true), b.labels);
    nlohmann::json r = ce_report(ce, ce);
    finish(tape, ce);
    return r;
  }

  std::vector<Real> predict(const std::vector<world::Episode>& episodes) const override {
    std::vector<Real> out(episodes.size());
    auto& self = const_cast<ActionMlpClassifier&>(*this);
    for_each_horizon(episodes, [&](const std::vector<std::size_t>& idx, const Batch& raw) {
      const Batch b = normalized(raw, norm_);
      Tape tape;
      scatter(out, idx, self.forward(tape, b, false, false).value());
    });
    return out;
  }

 private:
  Var forward(Tape& tape, const Batch& b, bool enc_trainable, bool trainable) {
    if (b.T != cfg_.T) throw DimensionError("action MLP was built for a different horizon");
    const ModelDims& d = cfg_.dims;
    Matrix flat(b.B, static_cast<Eigen::Index>(b.T) * d.A);
    for (int k = 0; k < b.B; ++k) {
      for (int t = 0; t < b.T; ++t) {
        flat.block(k, static_cast<Eigen::Index>(t) * d.A, 1, d.A) =
            b.actions.row(static_cast<Eigen::Index>(t) * b.B + k);
      }
    }
    Var x = tape.constant(std::move(flat));
    if (with_encoder_) {
      check_width(b, d);
      Var e1 = model::mlp2(tape.constant(b.obs.topRows(b.B)),
                           model::bind_mlp2(tape, params_, "enc", enc_trainable && trainable));
      x = diff::concat_cols(x, e1);
    }
    auto layer = [&](Var in, int i) {
      const std::string p = "a." + std::to_string(i);
      return diff::add_row(diff::matmul(in, tape.param(params_.at(p + ".W"), trainable)),
                           tape.param(params_.at(p + ".b"), trainable));
    };
    Var h = diff::relu(layer(x, 0));
    h = diff::relu(layer(h, 1));
    return diff::sigmoid(layer(h, 2));
  }

  bool with_encoder_;
  ParamSet params_;
};

}  // namespace

// ---- FIRP ----

FirpClassifier::FirpClassifier(const ClassifierConfig& cfg, std::uint64_t seed) : Classifier(cfg), model_(cfg.dims, seed) {}

nlohmann::json FirpClassifier::train_step(const Batch& batch, const StepFlags& flags, std::mt19937_64& rng) {
  objective::ObjectiveConfig oc;
  oc.lambda = cfg_.lambda;
  oc.alpha = cfg_.alpha;
  oc.beta = cfg_.beta;
  oc.overshoot = cfg_.overshoot;
  oc.prediction = flags.prediction;
  oc.encoder_trainable = flags.encoder_trainable;
  return objective::total_loss(model_, batch, oc, rng, true).to_json();
}

std::vector<Real> FirpClassifier::predict(const std::vector<world::Episode>& episodes) const {
  return model_.predict(episodes);
}

std::unique_ptr<Classifier> FirpClassifier::clone() const { return std::make_unique<FirpClassifier>(*this); }

std::unique_ptr<Classifier> make_classifier(ClassifierKind kind, const ClassifierConfig& cfg, std::uint64_t seed) {
  cfg.dims.validate();
  switch (kind) {
    case ClassifierKind::Firp: return std::make_unique<FirpClassifier>(cfg, seed);
    case ClassifierKind::Gru: return std::make_unique<GruClassifier>(cfg, seed);
    case ClassifierKind::Oracle: return std::make_unique<OracleClassifier>(cfg, seed);
    case ClassifierKind::AMlp: return std::make_unique<ActionMlpClassifier>(cfg, seed, false);
    case ClassifierKind::AMlpEnc: return std::make_unique<ActionMlpClassifier>(cfg, seed, true);
  }
  throw ConfigError("unknown classifier kind");
}

nlohmann::json classifier_config_to_json(const ClassifierConfig& cfg) {
  return {{"dims", model::dims_to_json(cfg.dims)},
          {"T", cfg.T},
          {"lambda", cfg.lambda},
          {"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"overshoot", cfg.overshoot}};
}

ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  try {
    c.dims = model::dims_from_json(j.at("dims"));
    c.T = j.at("T").get<int>();
    c.lambda = j.at("lambda").get<Real>();
    c.alpha = j.at("alpha").get<Real>();
    c.beta = j.at("beta").get<Real>();
    c.overshoot = j.at("overshoot").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("classifier config: ") + e.what());
  }
  return c;
}

void save_classifier(const Classifier& clf, ClassifierMeta meta, const std::string& stem) {
  model::save_params(clf.params(), stem + ".bin");
  nlohmann::json j{{"classifier", to_string(clf.kind())},
                   {"config", classifier_config_to_json(clf.config())},
                   {"seed", meta.seed},
                   {"epoch", meta.epoch},
                   {"val_balanced_accuracy", meta.val_balanced_accuracy},
                   {"config_hash", meta.config_hash},
                   {"input_norm", model::norm_to_json(clf.input_norm())}};
  std::ofstream out(stem + ".json");
  if (!out) throw IoError("cannot open " + stem + ".json for writing");
  out << j.dump(2) << '\n';
}

std::unique_ptr<Classifier> load_classifier(const std::string& stem, ClassifierMeta* meta) {
  std::ifstream in(stem + ".json");
  if (!in) throw IoError("cannot open " + stem + ".json");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError(stem + ".json is not valid JSON");
  ClassifierMeta m;
  model::InputNorm norm;
  try {
    m.kind = classifier_kind_from_string(j.at("classifier").get<std::string>());
    m.config = classifier_config_from_json(j.at("config"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epoch = j.at("epoch").get<int>();
    m.val_balanced_accuracy = j.at("val_balanced_accuracy").get<double>();
    m.config_hash = j.at("config_hash").get<std::string>();
    norm = model::norm_from_json(j.at("input_norm"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(stem + ".json: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(stem + ".json: " + e.what());
  }
  std::unique_ptr<Classifier> clf = make_classifier(m.kind, m.config, m.seed);
  model::load_params(clf->params(), stem + ".bin");
  clf->set_input_norm(std::move(norm));
  if (meta) *meta = m;
  return clf;
}

}  // namespace firp::train
