#include "firp/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "firp/errors.hpp"
#include "firp/eval/metrics.hpp"
#include "firp/plan/planner.hpp"

namespace firp::train {

void TrainConfig::validate() const {
  if (!(lr >= 0)) throw ConfigError("train.lr must be non-negative");
  if (!(clip > 0)) throw ConfigError("train.clip must be positive");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (e_start_f < 1) throw ConfigError("train.e_start_f must be >= 1");
  if (e_stop_e < 0 || e_stop_e > epochs) throw ConfigError("train.e_stop_e must lie in [1, epochs] (0 = epochs)");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (top_k < 1) throw ConfigError("train.top_k must be >= 1");
}

Ensemble::Ensemble(std::vector<Member> members) : members_(std::move(members)) {}

std::vector<Real> Ensemble::predict(const std::vector<world::Episode>& episodes) const {
  if (members_.empty()) throw ConfigError("empty ensemble");
  std::vector<Real> acc(episodes.size(), 0.0);
  for (const Member& m : members_) {
    std::vector<Real> p = m.model->predict(episodes);
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i];
  }
  for (Real& v : acc) v /= static_cast<Real>(members_.size());
  return acc;
}

Real ensemble_score(const Ensemble& ensemble, const diff::Vector& first_obs,
                    const std::vector<world::Action>& actions) {
  if (ensemble.size() == 0) throw ConfigError("empty ensemble");
  const model::ModelDims* dims = nullptr;
  for (const Member& m : ensemble.members()) {
    if (auto* f = dynamic_cast<const FirpClassifier*>(m.model.get())) {
      if (dims && !(*dims == f->model().dims())) throw DimensionError("ensemble members differ in model dims");
      dims = &f->model().dims();
    }
  }
  return ensemble.predict({plan_episode(first_obs, actions)}).front();
}

bool ranks_before(double ba_a, int epoch_a, double ba_b, int epoch_b) {
  if (ba_a != ba_b) return ba_a > ba_b;
  return epoch_a < epoch_b;
}

std::vector<int> select_top_k(const std::vector<EpochRecord>& records, int k) {
  if (records.empty()) throw ConfigError("no checkpoints to select from");
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<const EpochRecord*> sorted;
  for (const EpochRecord& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const EpochRecord* a, const EpochRecord* b) {
    return ranks_before(a->val_balanced_accuracy, a->epoch, b->val_balanced_accuracy, b->epoch);
  });
  std::vector<int> out;
  for (std::size_t i = 0; i < sorted.size() && static_cast<int>(i) < k; ++i) out.push_back(sorted[i]->epoch);
  return out;
}

namespace {

bool is_encoder(const std::string& name) { return name.rfind("enc.", 0) == 0; }

/// FNV-1a over the raw bytes of every encoder parameter, as 16 hex digits;
/// empty when the model has no encoder.
std::string encoder_digest(const ParamSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  bool any = false;
  for (const std::string& name : params.names()) {
    if (!is_encoder(name)) continue;
    any = true;
    const diff::Matrix& v = params.at(name).value;
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  if (!any) return "";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Adds weight * report into the running sums.
void accumulate(nlohmann::json& sums, const nlohmann::json& report, double weight) {
  for (const auto& [key, value] : report.items()) {
    if (!value.is_number()) continue;
    sums[key] = (sums.contains(key) ? sums[key].get<double>() : 0.0) + weight * value.get<double>();
  }
}

}  // namespace

TrainResult train(Classifier& model, const std::vector<world::Episode>& train_set,
                  const std::vector<world::Episode>& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("empty training set");
  if (val_set.empty()) throw ConfigError("empty validation set");
  std::vector<bool> val_labels;
  for (const world::Episode& ep : val_set) val_labels.push_back(ep.label);
  if (cfg.normalize_inputs && model.input_norm().empty()) model.set_input_norm(model::fit_input_norm(train_set));

  Adam adam(AdamConfig{cfg.lr});
  std::mt19937_64 shuffle_rng(plan::derive_seed(cfg.seed, 1));
  std::mt19937_64 noise_rng(plan::derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Member> top;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const StepFlags flags{epoch >= cfg.e_start_f, epoch <= cfg.encoder_stop()};
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    nlohmann::json sums = nlohmann::json::object();
    try {
      for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(first),
                                     order.begin() + static_cast<std::ptrdiff_t>(last));
        model.params().zero_grad();
        nlohmann::json report = model.train_step(objective::make_batch(train_set, idx), flags, noise_rng);
        const double norm = clip_global_norm(model.params(), cfg.clip);
        report["grad_norm"] = norm;
        accumulate(sums, report, static_cast<double>(idx.size()));
        if (flags.encoder_trainable) {
          adam.step(model.params());
        } else {
          adam.step(model.params(), [](const std::string& name) { return !is_encoder(name); });
        }
      }
    } catch (const NumericError& e) {
      result.aborted = true;
      result.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.val_balanced_accuracy = eval::balanced_accuracy(model.predict(val_set), val_labels);
    rec.metrics = nlohmann::json::object();
    rec.metrics["epoch"] = epoch;
    for (const auto& [key, value] : sums.items()) {
      rec.metrics[key] = value.get<double>() / static_cast<double>(order.size());
    }
    rec.metrics["val_balanced_accuracy"] = rec.val_balanced_accuracy;
    rec.metrics["encoder_trainable"] = flags.encoder_trainable;
    if (const std::string d = encoder_digest(model.params()); !d.empty()) rec.metrics["encoder_digest"] = d;
    result.epochs.push_back(rec);
    result.wall_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

    // Streaming top-k: the new epoch enters only if it outranks the current last.
    if (static_cast<int>(top.size()) < cfg.top_k ||
        ranks_before(rec.val_balanced_accuracy, epoch, top.back().val_balanced_accuracy, top.back().epoch)) {
      Member m{epoch, rec.val_balanced_accuracy, model.clone()};
      auto pos = std::find_if(top.begin(), top.end(), [&](const Member& x) {
        return ranks_before(m.val_balanced_accuracy, m.epoch, x.val_balanced_accuracy, x.epoch);
      });
      top.insert(pos, std::move(m));
      if (static_cast<int>(top.size()) > cfg.top_k) top.pop_back();
    }
    if (on_epoch) on_epoch(rec);
  }
  if (top.empty()) throw NumericError("training diverged before the first epoch completed: " + result.abort_reason);
  result.ensemble = Ensemble(std::move(top));
  return result;
}

}  // namespace firp::train
