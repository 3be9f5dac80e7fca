#include "firp/cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "CLI11.hpp"

#include "firp/errors.hpp"
#include "firp/eval/metrics.hpp"
#include "firp/objective/grad_suite.hpp"
#include "firp/plan/planner.hpp"
#include "firp/world/episode_io.hpp"

namespace firp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"gen-data", "train", "eval", "baselines", "predict", "replan", "gradcheck"};
  return names;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string metrics_lines(const std::vector<train::EpochRecord>& epochs) {
  std::string s;
  for (const train::EpochRecord& r : epochs) s += r.metrics.dump() + "\n";
  return s;
}

std::string timing_lines(const train::TrainResult& tr) {
  std::string s;
  for (std::size_t i = 0; i < tr.wall_seconds.size(); ++i) {
    s += json{{"epoch", tr.epochs[i].epoch}, {"seconds", tr.wall_seconds[i]}}.dump() + "\n";
  }
  return s;
}

std::vector<world::Episode> load_dataset(const RunConfig& c) {
  if (!c.dataset_path.empty()) return world::read_episodes(c.dataset_path);
  return plan::generate_episodes(c.task, c.episodes, c.noise, c.data_seed);
}

void save_ensemble(const fs::path& out, const train::Ensemble& ens, const std::string& hash) {
  fs::create_directories(out / "ensemble");
  json members = json::array();
  for (std::size_t k = 0; k < ens.size(); ++k) {
    const train::Member& m = ens.members()[k];
    const std::string stem = "ensemble/member" + std::to_string(k);
    train::ClassifierMeta meta;
    meta.epoch = m.epoch;
    meta.val_balanced_accuracy = m.val_balanced_accuracy;
    meta.config_hash = hash;
    train::save_classifier(*m.model, meta, (out / stem).string());
    members.push_back({{"stem", stem}, {"epoch", m.epoch}, {"val_balanced_accuracy", m.val_balanced_accuracy}});
  }
  write_json(out / "ensemble.json", {{"config_hash", hash}, {"members", members}});
}

train::Ensemble load_ensemble(const fs::path& dir) {
  std::ifstream in(dir / "ensemble.json");
  if (!in) throw IoError("no ensemble.json in " + dir.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("members")) throw IoError((dir / "ensemble.json").string() + " is malformed");
  std::vector<train::Member> members;
  for (const json& m : j["members"]) {
    train::ClassifierMeta meta;
    auto clf = train::load_classifier((dir / m.at("stem").get<std::string>()).string(), &meta);
    members.push_back({meta.epoch, meta.val_balanced_accuracy, std::move(clf)});
  }
  if (members.empty()) throw IoError("empty ensemble in " + dir.string());
  return train::Ensemble(std::move(members));
}

/// Trains the configured classifier on one seeded split and writes its
/// metrics, timing and ensemble. Returns the ensemble.
train::Ensemble train_command(const Invocation& inv, const fs::path& out) {
  const RunConfig& c = inv.config;
  const std::vector<world::Episode> data = load_dataset(c);
  const eval::Split split = eval::split_dataset(data, c.eval.train_fraction, c.eval.val_fraction, c.eval.seed);
  auto clf = train::make_classifier(c.classifier, c.model, plan::derive_seed(c.train.seed, 100));
  train::TrainResult tr = train::train(*clf, split.train, split.val, c.train);
  write_text(out / "metrics.jsonl", metrics_lines(tr.epochs));
  write_text(out / "timing.jsonl", timing_lines(tr));
  const std::string hash = config_hash(c.document);
  save_ensemble(out, tr.ensemble, hash);
  std::vector<bool> labels;
  for (const world::Episode& ep : split.test) labels.push_back(ep.label);
  const std::vector<double> scores = tr.ensemble.predict(split.test);
  json summary{{"classifier", train::to_string(c.classifier)},
               {"config_hash", hash},
               {"epochs", tr.epochs.size()},
               {"aborted", tr.aborted},
               {"abort_reason", tr.abort_reason},
               {"test_balanced_accuracy", eval::balanced_accuracy(scores, labels, c.eval.threshold)}};
  write_json(out / "summary.json", summary);
  if (tr.aborted) std::fprintf(stderr, "warning: training stopped early: %s\n", tr.abort_reason.c_str());
  return std::move(tr.ensemble);
}

void eval_command(const Invocation& inv, const fs::path& out) {
  const RunConfig& c = inv.config;
  const std::vector<world::Episode> data = load_dataset(c);
  eval::EvalConfig ec = c.eval;
  ec.jobs = inv.jobs;
  auto on_run = [&](const eval::RunResult& r, const train::TrainResult& tr) {
    const std::string stem = "run" + std::to_string(r.run);
    write_text(out / ("metrics_" + stem + ".jsonl"), metrics_lines(tr.epochs));
    write_text(out / ("timing_" + stem + ".jsonl"), timing_lines(tr));
    if (r.run == 0 && !c.features_path.empty()) {
      const auto* f = dynamic_cast<const train::FirpClassifier*>(tr.ensemble.members().front().model.get());
      if (f) {
        const eval::Split split = eval::split_dataset(data, ec.train_fraction, ec.val_fraction, r.seed);
        eval::export_features(f->model(), split.test, c.features_path);
      }
    }
  };
  eval::EvalReport rep = eval::run_protocol(c.classifier, data, c.model, c.train, ec, on_run);
  write_json(out / "eval_report.json", rep.to_json());
  std::printf("%s balanced accuracy %.4f +- %.4f\n", rep.classifier.c_str(), rep.mean, rep.std);
}

void baselines_command(const Invocation& inv, const fs::path& out) {
  const RunConfig& c = inv.config;
  const std::vector<world::Episode> data = load_dataset(c);
  eval::EvalConfig ec = c.eval;
  ec.jobs = inv.jobs;
  json all = json::object();
  for (train::ClassifierKind kind : c.baselines) {
    const std::string name = train::to_string(kind);
    auto on_run = [&](const eval::RunResult& r, const train::TrainResult& tr) {
      write_text(out / ("metrics_" + name + "_run" + std::to_string(r.run) + ".jsonl"), metrics_lines(tr.epochs));
    };
    eval::EvalReport rep = eval::run_baseline(kind, data, c.model, c.train, ec, on_run);
    all[name] = rep.to_json();
    std::printf("%s balanced accuracy %.4f +- %.4f\n", name.c_str(), rep.mean, rep.std);
  }
  write_json(out / "baselines.json", all);
}

void predict_command(const Invocation& inv, const fs::path& out) {
  const RunConfig& c = inv.config;
  if (c.checkpoint_path.empty()) throw ConfigError("predict needs paths.checkpoint (a directory with ensemble.json)");
  if (c.episode_path.empty()) throw ConfigError("predict needs paths.episode (a JSON-lines episode file)");
  const train::Ensemble ens = load_ensemble(c.checkpoint_path);
  const std::vector<world::Episode> eps = world::read_episodes(c.episode_path);
  if (eps.empty()) throw IoError(c.episode_path + " holds no episode");
  const world::Episode& ep = eps.front();
  const double p = train::ensemble_score(ens, ep.initial_observation(), ep.actions);
  write_json(out / "predictions.json", {{"p", p}, {"accepted", p >= c.eval.threshold}, {"label", ep.label}});
  std::printf("p = %.6f (%s)\n", p, p >= c.eval.threshold ? "accept" : "reject");
}

void replan_command(const Invocation& inv, const fs::path& out) {
  const RunConfig& c = inv.config;
  train::Ensemble ens;
  if (c.checkpoint_path.empty()) {
    if (c.classifier != train::ClassifierKind::Firp) throw ConfigError("replan screens with FIRP; set train.classifier=firp");
    ens = train_command(inv, out);
  } else {
    ens = load_ensemble(c.checkpoint_path);
  }
  replan::PlanScorer scorer = [&ens](const world::WorldState& initial, const std::vector<world::Action>& plan) {
    return train::ensemble_score(ens, world::observe(initial), plan);
  };
  replan::ReplanConfig rc = c.replan;
  const replan::ExperimentResult res = replan::run_experiment(c.task, scorer, rc);
  write_json(out / "replan.json", res.to_json());
  write_text(out / "replan.csv", res.to_csv());
  std::printf("%s", res.to_csv().c_str());
}

void gradcheck_command(const Invocation& inv, const fs::path& out) {
  objective::GradSuiteConfig g;
  g.dims = inv.config.model.dims;
  g.per_param = 8;
  g.seed = inv.config.train.seed;
  const objective::GradSuiteResult res = objective::run_grad_suite(g);
  write_json(out / "gradcheck.json", res.to_json());
  std::printf("gradcheck %s, worst relative error %.3g\n", res.pass ? "passed" : "FAILED", res.worst);
  if (!res.pass) throw NumericError("gradient check failed");
}

}  // namespace

void dispatch(const Invocation& inv) {
  const fs::path out(inv.out_dir);
  fs::create_directories(out);
  write_json(out / "config.json", inv.config.document);
  const std::string& s = inv.subcommand;
  if (s == "gen-data") {
    const RunConfig& c = inv.config;
    world::write_episodes((out / "episodes.jsonl").string(),
                          plan::generate_episodes(c.task, c.episodes, c.noise, c.data_seed));
  } else if (s == "train") {
    train_command(inv, out);
  } else if (s == "eval") {
    eval_command(inv, out);
  } else if (s == "baselines") {
    baselines_command(inv, out);
  } else if (s == "predict") {
    predict_command(inv, out);
  } else if (s == "replan") {
    replan_command(inv, out);
  } else if (s == "gradcheck") {
    gradcheck_command(inv, out);
  } else {
    throw ConfigError("unknown subcommand '" + s + "'");
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Future-predictive success classification for block-world plans"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  std::vector<std::string> sets;
  long long seed = -1;
  int jobs = 1;
  const std::map<std::string, std::string> about{
      {"gen-data", "write a labelled episode dataset (episodes.jsonl)"},
      {"train", "train one classifier and keep its top-k ensemble"},
      {"eval", "repeated train/test protocol with balanced accuracy"},
      {"baselines", "eval protocol for every classifier in eval.baselines"},
      {"predict", "score the first episode of paths.episode with a saved ensemble"},
      {"replan", "paired baseline vs screened replanning trials"},
      {"gradcheck", "finite-difference check of every loss term"}};
  for (const std::string& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", sets, "override section.field=value (repeatable)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "sets every seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  Invocation inv;
  inv.subcommand = app.get_subcommands().front()->get_name();
  inv.out_dir = out_dir;
  inv.jobs = jobs;
  try {
    std::vector<std::string> overrides;
    if (seed >= 0) {
      for (const char* k : {"data", "train", "eval", "replan"}) {
        overrides.push_back(std::string("seeds.") + k + "=" + std::to_string(seed));
      }
    }
    overrides.insert(overrides.end(), sets.begin(), sets.end());
    inv.config = parse_config(config_path, overrides);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  try {
    dispatch(inv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace firp::cli
