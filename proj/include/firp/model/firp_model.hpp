#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "firp/diff/gaussian.hpp"
#include "firp/diff/gru.hpp"
#include "firp/model/layers.hpp"
#include "firp/world/blockworld.hpp"

namespace firp::model {

using diff::DiagGaussian;

struct ModelDims {
  int D = 9;
  int d_e = 32;
  int d_h = 64;
  int d_s = 16;
  int d_q = 32;
  int M = 4;
  Real L = 20.0;
  int A = world::kActionDim;
  /// Width of the hidden layer of every two-layer MLP.
  int hidden = 64;

  /// Throws ConfigError unless every field is positive.
  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

enum class RolloutMode { Sample, Mean };

/// Value-level latent state of one episode at one step.
struct LatentState {
  Vector h;
  DiagGaussian s_dist;
  Vector s_sample;

  /// h_0 = 0, s_0 = 0. The distribution slot holds N(0, 1) and is unused.
  static LatentState initial(const ModelDims& dims);
};

struct Rollout {
  /// Latents for t = 1..T; the first is a posterior, the rest priors.
  std::vector<LatentState> latents;
  /// (T-1) x d_e; row k is the predicted feature for t = k + 2.
  Matrix predicted;
};

// ---- score head, shared by FIRP and the sequence baselines ----

/// Registers `q.*` (two-layer MLP d_e -> d_q), `proto` (M x d_q) and
/// `head.W`, `head.b` (affine d_q -> 1).
void add_score_head_params(ParamSet& params, int d_e, int hidden, int d_q, int M, std::mt19937_64& rng);

struct ScoreHeadVars {
  Mlp2Vars q;
  Var prototypes;
  Var w;
  Var b;
  Real temperature = 20.0;
};
ScoreHeadVars bind_score_head(Tape& tape, ParamSet& params, Real temperature, bool trainable);

/// Success probabilities (episodes x 1) for time-major features
/// (row t * episodes + b).
Var score_head(const ScoreHeadVars& head, Var features, int steps, int episodes);

/// Registers the `enc.*` MLP D -> d_e.
void add_encoder_params(ParamSet& params, int D, int hidden, int d_e, std::mt19937_64& rng);

/// Column means and inverse standard deviations over every observation and
/// action of `episodes`. Columns without spread keep scale 1.
InputNorm fit_input_norm(const std::vector<world::Episode>& episodes);

// ---- FIRP ----

class FirpModel {
 public:
  FirpModel(const ModelDims& dims, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const InputNorm& input_norm() const { return norm_; }
  /// Throws DimensionError unless the norm is empty or matches D and A.
  void set_input_norm(InputNorm norm);

  Vector encode(const Vector& obs) const;
  /// An empty `noise` selects the mean.
  LatentState posterior_step(const LatentState& prev, const Vector& action, const Vector& e,
                             const Vector& noise = Vector()) const;
  LatentState prior_step(const LatentState& prev, const Vector& action, const Vector& noise = Vector()) const;
  /// Dec(s, h) of the given latent.
  Vector decode_feature(const LatentState& z) const;
  /// Sample mode draws its noise from `rng`, which must then be non-null.
  Rollout rollout_open_loop(const Vector& e1, const Matrix& actions, RolloutMode mode,
                            std::mt19937_64* rng = nullptr) const;
  /// Pooling weights for T x d_q transformed features.
  Vector pool_weights(const Matrix& q) const;
  /// T x d_e features -> success probability.
  Real score(const Matrix& features) const;
  /// Mean-mode rollout from the encoded first observation, then score.
  Real predict(const Vector& first_obs, const Matrix& actions) const;
  /// predict() over many episodes, batched per horizon.
  std::vector<Real> predict(const std::vector<world::Episode>& episodes) const;

 private:
  ModelDims dims_;
  ParamSet params_;
  InputNorm norm_;
};

// ---- batched tape form ----

struct ModelVars {
  ModelDims dims;
  InputNorm norm;
  Mlp2Vars enc, f, post, prior, dec;
  diff::GruVars gru;
  ScoreHeadVars head;
};

/// Binds every parameter of `model`. The encoder is bound with
/// `trainable && encoder_trainable`.
ModelVars bind_model(Tape& tape, FirpModel& model, bool trainable, bool encoder_trainable = true);
/// Read-only binding; nothing records gradients.
ModelVars bind_model(Tape& tape, const FirpModel& model);

struct LatentVars {
  Var h;
  GaussianVars dist;
  Var s;
};

Var encode(const ModelVars& m, Var obs);
/// h_t = GRU(h_{t-1}, f(s_{t-1}, a_t)).
Var transition(const ModelVars& m, Var h_prev, Var s_prev, Var action);
GaussianVars posterior(const ModelVars& m, Var h, Var e);
GaussianVars prior(const ModelVars& m, Var h);
Var decode(const ModelVars& m, Var s, Var h);

/// Picks the latent sample: the mean, or mean + std * N(0, 1) from `rng`.
Var draw(const GaussianVars& g, RolloutMode mode, std::mt19937_64* rng);

struct RolloutVars {
  std::vector<LatentVars> latents;
  /// predicted[k] is the decoded feature for t = k + 2.
  std::vector<Var> predicted;
};

/// Open-loop rollout for a batch: `actions[t]` is (B x A) for t = 0..T-1.
RolloutVars rollout_open_loop(const ModelVars& m, Var e1, const std::vector<Var>& actions, RolloutMode mode,
                              std::mt19937_64* rng);

/// Stacks per-step (B x d) blocks into one time-major matrix.
Var time_major(const std::vector<Var>& steps);

}  // namespace firp::model
