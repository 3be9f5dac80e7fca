#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "firp/train/adam.hpp"
#include "firp/train/classifiers.hpp"

namespace firp::train {

struct TrainConfig {
  Real lr = 3e-3;
  Real clip = 10.0;
  /// First epoch (1-based) whose objective includes the prediction losses.
  int e_start_f = 1;
  /// Last epoch that updates the encoder; 0 means `epochs`.
  int e_stop_e = 0;
  int epochs = 150;
  int batch_size = 8;
  int top_k = 5;
  /// Fit the classifier's input norm on the training set when it has none.
  bool normalize_inputs = true;
  std::uint64_t seed = 0;

  int encoder_stop() const { return e_stop_e == 0 ? epochs : e_stop_e; }
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double val_balanced_accuracy = 0;
  /// {epoch, averaged loss fields, val_balanced_accuracy}.
  nlohmann::json metrics;
};

struct Member {
  int epoch = 0;
  double val_balanced_accuracy = 0;
  std::unique_ptr<Classifier> model;
};

/// Average of member predictions.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(std::vector<Member> members);

  const std::vector<Member>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  std::vector<Real> predict(const std::vector<world::Episode>& episodes) const;

 private:
  std::vector<Member> members_;
};

/// Mean member score of one plan from its first observation. Throws
/// ConfigError for an empty ensemble and DimensionError when FIRP members
/// disagree on ModelDims.
Real ensemble_score(const Ensemble& ensemble, const diff::Vector& first_obs,
                    const std::vector<world::Action>& actions);

struct TrainResult {
  std::vector<EpochRecord> epochs;
  Ensemble ensemble;
  bool aborted = false;
  std::string abort_reason;
  /// Per-epoch wall-clock seconds, kept apart from the metrics so that the
  /// metrics stay reproducible.
  std::vector<double> wall_seconds;
};

/// Called after every epoch.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam with global-norm clipping and the prediction / encoder
/// schedules. The best `top_k` epochs by validation balanced accuracy form
/// the ensemble. A non-finite loss stops training; the epochs recorded so far
/// are kept.
TrainResult train(Classifier& model, const std::vector<world::Episode>& train_set,
                  const std::vector<world::Episode>& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Epochs of the k best records, best first; ties go to the earlier epoch.
/// Throws ConfigError on an empty list or k < 1.
std::vector<int> select_top_k(const std::vector<EpochRecord>& records, int k = 5);

/// True when `a` ranks before `b` in top-k selection.
bool ranks_before(double ba_a, int epoch_a, double ba_b, int epoch_b);

}  // namespace firp::train
