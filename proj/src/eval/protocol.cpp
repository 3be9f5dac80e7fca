#include "firp/eval/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "firp/errors.hpp"
#include "firp/eval/metrics.hpp"
#include "firp/plan/planner.hpp"

namespace firp::eval {

Split split_dataset(const std::vector<world::Episode>& dataset, double train_fraction, double val_fraction,
                    std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1) || !(val_fraction > 0 && val_fraction < 1)) {
    throw ConfigError("split fractions must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_pool = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n_pool)));
  if (n_pool - n_val < 1 || n_val < 1 || n_pool >= idx.size()) throw ConfigError("dataset too small to split");
  Split s;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const world::Episode& ep = dataset[idx[k]];
    if (k < n_pool - n_val) {
      s.train.push_back(ep);
    } else if (k < n_pool) {
      s.val.push_back(ep);
    } else {
      s.test.push_back(ep);
    }
  }
  return s;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json runs_j = nlohmann::json::array();
  for (const RunResult& r : runs) {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
      nlohmann::json e{{"p", r.scores[i]}, {"label", static_cast<bool>(r.labels[i])}};
      if (i < r.prediction_errors.size()) e["prediction_error"] = r.prediction_errors[i];
      per.push_back(std::move(e));
    }
    runs_j.push_back({{"run", r.run},
                      {"seed", r.seed},
                      {"balanced_accuracy", r.balanced_accuracy},
                      {"ensemble_epochs", r.ensemble_epochs},
                      {"aborted", r.aborted},
                      {"episodes", std::move(per)}});
  }
  nlohmann::json j{{"classifier", classifier},
                   {"balanced_accuracy_mean", mean},
                   {"balanced_accuracy_std", std},
                   {"runs", std::move(runs_j)}};
  if (classifier == "firp") j["prediction_error_mean"] = mean_prediction_error;
  return j;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double prediction_error(const model::FirpModel& model, const world::Episode& episode) {
  const int T = episode.horizon();
  if (T < 2) throw DimensionError("prediction error needs T >= 2");
  const diff::Vector e1 = model.encode(episode.observations.front());
  const diff::Vector eT = model.encode(episode.observations.back());
  model::Rollout r = model.rollout_open_loop(e1, episode.action_matrix(), model::RolloutMode::Mean);
  return (eT.transpose() - r.predicted.row(T - 2)).norm();
}

double prediction_error(const train::Ensemble& ensemble, const world::Episode& episode) {
  double sum = 0;
  int n = 0;
  for (const train::Member& m : ensemble.members()) {
    if (auto* f = dynamic_cast<const train::FirpClassifier*>(m.model.get())) {
      sum += prediction_error(f->model(), episode);
      ++n;
    }
  }
  if (n == 0) throw ConfigError("ensemble has no FIRP member");
  return sum / n;
}

EvalReport run_protocol(train::ClassifierKind kind, const std::vector<world::Episode>& dataset,
                        const train::ClassifierConfig& model_cfg, const train::TrainConfig& train_cfg,
                        const EvalConfig& eval_cfg, const RunCallback& on_run) {
  if (eval_cfg.runs < 1) throw ConfigError("eval.runs must be >= 1");
  EvalReport report;
  report.classifier = train::to_string(kind);
  report.runs.resize(static_cast<std::size_t>(eval_cfg.runs));
  std::mutex mu;
  parallel_for(eval_cfg.runs, eval_cfg.jobs, [&](int run) {
    const std::uint64_t seed = plan::derive_seed(eval_cfg.seed, static_cast<std::uint64_t>(run));
    Split split = split_dataset(dataset, eval_cfg.train_fraction, eval_cfg.val_fraction, seed);
    auto model = train::make_classifier(kind, model_cfg, plan::derive_seed(seed, 100));
    train::TrainConfig tc = train_cfg;
    tc.seed = plan::derive_seed(seed, 200);
    train::TrainResult tr = train::train(*model, split.train, split.val, tc);
    RunResult r;
    r.run = run;
    r.seed = seed;
    r.scores = tr.ensemble.predict(split.test);
    for (const world::Episode& ep : split.test) r.labels.push_back(ep.label);
    r.balanced_accuracy = balanced_accuracy(r.scores, r.labels, eval_cfg.threshold);
    if (kind == train::ClassifierKind::Firp) {
      for (const world::Episode& ep : split.test) r.prediction_errors.push_back(prediction_error(tr.ensemble, ep));
    }
    for (const train::Member& m : tr.ensemble.members()) r.ensemble_epochs.push_back(m.epoch);
    r.epochs = tr.epochs;
    r.aborted = tr.aborted;
    std::lock_guard<std::mutex> lock(mu);
    if (on_run) on_run(r, tr);
    report.runs[static_cast<std::size_t>(run)] = std::move(r);
  });
  std::vector<double> accs, errs;
  for (const RunResult& r : report.runs) {
    accs.push_back(r.balanced_accuracy);
    if (!r.prediction_errors.empty()) {
      errs.push_back(std::accumulate(r.prediction_errors.begin(), r.prediction_errors.end(), 0.0) /
                     static_cast<double>(r.prediction_errors.size()));
    }
  }
  std::tie(report.mean, report.std) = mean_std(accs);
  if (!errs.empty()) report.mean_prediction_error = mean_std(errs).first;
  return report;
}

EvalReport run_baseline(train::ClassifierKind kind, const std::vector<world::Episode>& dataset,
                        const train::ClassifierConfig& model_cfg, const train::TrainConfig& train_cfg,
                        const EvalConfig& eval_cfg, const RunCallback& on_run) {
  if (kind == train::ClassifierKind::Firp) throw ConfigError("FIRP is not a baseline");
  return run_protocol(kind, dataset, model_cfg, train_cfg, eval_cfg, on_run);
}

void export_features(const model::FirpModel& model, const std::vector<world::Episode>& episodes,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "episode,t,category";
  for (int k = 0; k < model.dims().d_e; ++k) out << ",e" << k;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const world::Episode& ep = episodes[i];
    for (int t = 0; t < ep.horizon(); ++t) {
      const diff::Vector e = model.encode(ep.observations[t]);
      out << i << ',' << (t + 1) << ',' << static_cast<int>(ep.actions[t].category);
      for (Eigen::Index k = 0; k < e.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.9g", e(k));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace firp::eval
