#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "firp/train/trainer.hpp"

namespace firp::eval {

struct Split {
  std::vector<world::Episode> train;
  std::vector<world::Episode> val;
  std::vector<world::Episode> test;
};

/// Shuffles with `seed`; the first `train_fraction` form the training pool
/// and its last `val_fraction` share becomes validation.
Split split_dataset(const std::vector<world::Episode>& dataset, double train_fraction, double val_fraction,
                    std::uint64_t seed);

struct EvalConfig {
  int runs = 3;
  double train_fraction = 0.8;
  double val_fraction = 0.2;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  /// Upper bound on concurrently trained runs.
  int jobs = 1;
};

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  double balanced_accuracy = 0;
  std::vector<double> scores;
  std::vector<bool> labels;
  /// ||e_T - ê_T|| per test episode; FIRP only.
  std::vector<double> prediction_errors;
  std::vector<train::EpochRecord> epochs;
  std::vector<int> ensemble_epochs;
  bool aborted = false;
};

struct EvalReport {
  std::string classifier;
  std::vector<RunResult> runs;
  double mean = 0;
  double std = 0;
  /// Mean prediction error over runs (FIRP only, else 0).
  double mean_prediction_error = 0;

  nlohmann::json to_json() const;
};

/// Receives each finished run (called from the thread that trained it,
/// serialized by a mutex).
using RunCallback = std::function<void(const RunResult&, const train::TrainResult&)>;

/// Per run: fresh seeded split, training, top-k ensemble, thresholded
/// balanced accuracy on the held-out test share.
EvalReport run_protocol(train::ClassifierKind kind, const std::vector<world::Episode>& dataset,
                        const train::ClassifierConfig& model_cfg, const train::TrainConfig& train_cfg,
                        const EvalConfig& eval_cfg, const RunCallback& on_run = {});

/// run_protocol for a baseline; `kind` must not be Firp.
EvalReport run_baseline(train::ClassifierKind kind, const std::vector<world::Episode>& dataset,
                        const train::ClassifierConfig& model_cfg, const train::TrainConfig& train_cfg,
                        const EvalConfig& eval_cfg, const RunCallback& on_run = {});

/// ||e_T - ê_T||_2 with e from the encoder and ê from the mean-mode rollout.
double prediction_error(const model::FirpModel& model, const world::Episode& episode);
/// prediction_error averaged over the FIRP members of an ensemble.
double prediction_error(const train::Ensemble& ensemble, const world::Episode& episode);

/// CSV rows "episode,t,category,e0,...": one per time step, 9 significant digits.
void export_features(const model::FirpModel& model, const std::vector<world::Episode>& episodes,
                     const std::string& path);

/// Runs fn(0..n-1) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace firp::eval
