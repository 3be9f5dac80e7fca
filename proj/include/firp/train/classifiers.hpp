#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "firp/model/firp_model.hpp"
#include "firp/objective/total_loss.hpp"

namespace firp::train {

using diff::ParamSet;
using diff::Real;
using objective::Batch;

enum class ClassifierKind { Firp, Gru, Oracle, AMlp, AMlpEnc };

std::string to_string(ClassifierKind kind);
/// Accepts "firp", "gru", "oracle", "a_mlp", "a_mlp_enc"; throws ConfigError otherwise.
ClassifierKind classifier_kind_from_string(const std::string& name);

/// Per-step switches set by the training schedule.
struct StepFlags {
  bool prediction = true;
  bool encoder_trainable = true;
};

/// Hyper-parameters shared by every classifier.
struct ClassifierConfig {
  model::ModelDims dims;
  /// Plan length; fixes the input width of the action MLPs.
  int T = 28;
  Real lambda = 1e-2;
  Real alpha = 1e-2;
  Real beta = 1e-2;
  std::vector<int> overshoot{2, 4, 8, 16};
};

/// A success-or-failure classifier over episodes.
class Classifier {
 public:
  explicit Classifier(const ClassifierConfig& cfg) : cfg_(cfg) {}
  virtual ~Classifier() = default;

  const ClassifierConfig& config() const { return cfg_; }

  virtual ClassifierKind kind() const = 0;
  virtual ParamSet& params() = 0;
  virtual const ParamSet& params() const = 0;

  /// Forward and backward on one batch; gradients are added to params().
  /// Returns the flat loss report.
  virtual nlohmann::json train_step(const Batch& batch, const StepFlags& flags, std::mt19937_64& rng) = 0;

  /// Success probabilities. Only the oracle reads observations past the first.
  virtual std::vector<Real> predict(const std::vector<world::Episode>& episodes) const = 0;

  virtual std::unique_ptr<Classifier> clone() const = 0;

  /// Normalization applied to raw observations and actions.
  virtual const model::InputNorm& input_norm() const { return norm_; }
  virtual void set_input_norm(model::InputNorm norm) { norm_ = std::move(norm); }

 protected:
  ClassifierConfig cfg_;
  model::InputNorm norm_;
};

std::unique_ptr<Classifier> make_classifier(ClassifierKind kind, const ClassifierConfig& cfg, std::uint64_t seed);

/// FIRP wrapper exposing the underlying model.
class FirpClassifier : public Classifier {
 public:
  FirpClassifier(const ClassifierConfig& cfg, std::uint64_t seed);

  ClassifierKind kind() const override { return ClassifierKind::Firp; }
  ParamSet& params() override { return model_.params(); }
  const ParamSet& params() const override { return model_.params(); }
  nlohmann::json train_step(const Batch& batch, const StepFlags& flags, std::mt19937_64& rng) override;
  std::vector<Real> predict(const std::vector<world::Episode>& episodes) const override;
  std::unique_ptr<Classifier> clone() const override;
  const model::InputNorm& input_norm() const override { return model_.input_norm(); }
  void set_input_norm(model::InputNorm norm) override { model_.set_input_norm(std::move(norm)); }

  model::FirpModel& model() { return model_; }
  const model::FirpModel& model() const { return model_; }

 private:
  model::FirpModel model_;
};

/// Groups episodes by horizon and calls fn(indices, batch) per group.
void for_each_horizon(const std::vector<world::Episode>& episodes,
                      const std::function<void(const std::vector<std::size_t>&, const Batch&)>& fn);

/// Episode carrying only a plan: every observation slot holds `first_obs`
/// and the label is false. Suitable for every classifier except the oracle.
world::Episode plan_episode(const diff::Vector& first_obs, const std::vector<world::Action>& actions);

nlohmann::json classifier_config_to_json(const ClassifierConfig& cfg);
/// Throws IoError on missing or mistyped fields.
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

/// Sidecar of a saved classifier.
struct ClassifierMeta {
  ClassifierKind kind = ClassifierKind::Firp;
  ClassifierConfig config;
  std::uint64_t seed = 0;
  int epoch = 0;
  double val_balanced_accuracy = 0;
  std::string config_hash;
};

/// Writes `<stem>.bin` (see model::save_params) and `<stem>.json`, which
/// also records the input norm. `meta.kind` and `meta.config` are taken
/// from the classifier.
void save_classifier(const Classifier& clf, ClassifierMeta meta, const std::string& stem);
std::unique_ptr<Classifier> load_classifier(const std::string& stem, ClassifierMeta* meta = nullptr);

}  // namespace firp::train
