#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "firp/cli/commands.hpp"
#include "firp/cli/config.hpp"
#include "firp/errors.hpp"

using namespace firp;
using namespace firp::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("firp_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the firp binary and returns its exit status; output goes to `log`.
int run_firp(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(FIRP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string error_of(const std::string& path, const std::vector<std::string>& overrides) {
  try {
    parse_config(path, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Small enough for a few seconds of training.
const char* kTiny =
    " --set task.episodes=40 --set dims.d_e=6 --set dims.d_h=8 --set dims.d_s=4 --set dims.d_q=6"
    " --set dims.M=2 --set dims.hidden=8 --set train.epochs=2 --set train.batch_size=8";

}  // namespace

TEST_CASE("empty config gives the defaults") {
  const fs::path dir = scratch("empty");
  write(dir / "empty.json", "{}");
  const RunConfig a = parse_config((dir / "empty.json").string());
  const RunConfig b = parse_config("");
  CHECK(a.document == default_document());
  CHECK(b.document == a.document);
  const train::TrainConfig tc;
  CHECK(a.train.lr == tc.lr);
  CHECK(a.train.epochs == tc.epochs);
  CHECK(a.replan.max_iter == 6);
  CHECK(a.eval.runs == eval::EvalConfig{}.runs);
  CHECK(a.baselines.size() == 4);
  CHECK(a.model.dims.D == world::observation_dim(a.task));
  fs::remove_all(dir);
}

TEST_CASE("overrides beat the file and the file beats the defaults") {
  const fs::path dir = scratch("precedence");
  write(dir / "c.json", R"({"train": {"lr": 0.01, "epochs": 7}, "seeds": {"train": 5}})");
  const RunConfig f = parse_config((dir / "c.json").string());
  CHECK(f.train.lr == 0.01);
  CHECK(f.train.epochs == 7);
  CHECK(f.train.seed == 5);
  const RunConfig o = parse_config((dir / "c.json").string(), {"train.lr=0.02", "train.classifier=gru"});
  CHECK(o.train.lr == 0.02);
  CHECK(o.train.epochs == 7);
  CHECK(o.classifier == train::ClassifierKind::Gru);
  CHECK(o.document["train"]["lr"] == 0.02);
  CHECK(config_hash(o.document) != config_hash(f.document));
  CHECK(config_hash(f.document) == config_hash(parse_config((dir / "c.json").string()).document));
  CHECK(config_hash(f.document).size() == 16);
  fs::remove_all(dir);
}

TEST_CASE("task kind selects its defaults") {
  const RunConfig r = parse_config("", {"task.kind=replacement"});
  CHECK(r.task.kind == world::TaskKind::Replacement);
  CHECK(r.noise == 0.02);
  CHECK(r.document == default_document(world::TaskKind::Replacement));
  CHECK(error_of("", {"task.kind=pyramid"}).find("task.kind") != std::string::npos);
}

TEST_CASE("unknown fields and type mismatches are named") {
  const fs::path dir = scratch("unknown");
  write(dir / "typo.json", R"({"train": {"lrr": 0.1}})");
  CHECK(error_of((dir / "typo.json").string(), {}).find("lrr") != std::string::npos);
  write(dir / "section.json", R"({"trian": {}})");
  CHECK(error_of((dir / "section.json").string(), {}).find("trian") != std::string::npos);
  write(dir / "type.json", R"({"train": {"epochs": "many"}})");
  CHECK(error_of((dir / "type.json").string(), {}).find("train.epochs") != std::string::npos);
  write(dir / "broken.json", "{");
  CHECK_THROWS(parse_config((dir / "broken.json").string()));
  CHECK_THROWS(parse_config((dir / "missing.json").string()));
  CHECK(error_of("", {"train.lrr=1"}).find("lrr") != std::string::npos);
  CHECK(error_of("", {"lr"}).find("lr") != std::string::npos);
  CHECK_FALSE(error_of("", {"train.epochs=0"}).empty());
  fs::remove_all(dir);
}

TEST_CASE("override values parse as JSON or fall back to strings") {
  nlohmann::json doc = nlohmann::json::object();
  apply_override(doc, "train.overshoot=[1,2]");
  apply_override(doc, "paths.dataset=/tmp/x.jsonl");
  apply_override(doc, "train.normalize_inputs=false");
  CHECK(doc["train"]["overshoot"] == nlohmann::json::array({1, 2}));
  CHECK(doc["paths"]["dataset"] == "/tmp/x.jsonl");
  CHECK(doc["train"]["normalize_inputs"] == false);
  CHECK_THROWS_AS(apply_override(doc, "=3"), ConfigError);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  const fs::path log = dir / "log.txt";
  CHECK(run_firp("frobnicate", log) == kExitUsage);
  CHECK(run_firp("", log) == kExitUsage);
  CHECK(run_firp("train --set train.lrr=1", log) == kExitUsage);
  CHECK(read(log).find("lrr") != std::string::npos);
  CHECK(run_firp("train --jobs 0", log) == kExitUsage);
  CHECK(run_firp("train --out " + (dir / "o").string() + " --set paths.dataset=" + (dir / "none.jsonl").string(), log) ==
        kExitFailure);
  const std::string diag = read(log);
  CHECK(std::count(diag.begin(), diag.end(), '\n') == 1);
  CHECK(diag.rfind("error: ", 0) == 0);
  CHECK(run_firp("predict --out " + (dir / "p").string(), log) == kExitFailure);
  CHECK(run_firp("--help", log) == kExitOk);
  fs::remove_all(dir);
}

TEST_CASE("gen-data writes one line per episode and echoes its config") {
  const fs::path dir = scratch("gen");
  REQUIRE(run_firp("gen-data --out " + dir.string() + " --set task.episodes=100 --seed 3", dir / "log.txt") == kExitOk);
  const std::string text = read(dir / "episodes.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 100);
  const RunConfig echoed = parse_config((dir / "config.json").string());
  CHECK(echoed.data_seed == 3);
  CHECK(echoed.train.seed == 3);
  CHECK(echoed.replan.seed == 3);
  CHECK(echoed.episodes == 100);

  const fs::path again = dir / "again";
  REQUIRE(run_firp("gen-data --out " + again.string() + " --config " + (dir / "config.json").string(), dir / "log.txt") ==
          kExitOk);
  CHECK(read(again / "episodes.jsonl") == text);
  fs::remove_all(dir);
}

TEST_CASE("train, predict and replan round trip") {
  const fs::path dir = scratch("pipeline");
  const fs::path log = dir / "log.txt";
  REQUIRE(run_firp("gen-data --out " + dir.string() + " --set task.episodes=2", log) == kExitOk);
  const std::string dataset = read(dir / "episodes.jsonl");

  const fs::path tr = dir / "train";
  REQUIRE(run_firp("train --out " + tr.string() + kTiny, log) == kExitOk);
  for (const char* f : {"config.json", "metrics.jsonl", "timing.jsonl", "ensemble.json", "summary.json"}) {
    CHECK(fs::exists(tr / f));
  }
  const std::string metrics = read(tr / "metrics.jsonl");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2);

  const fs::path rerun = dir / "rerun";
  REQUIRE(run_firp("train --out " + rerun.string() + " --config " + (tr / "config.json").string(), log) == kExitOk);
  CHECK(read(rerun / "metrics.jsonl") == metrics);
  CHECK(read(rerun / "summary.json") == read(tr / "summary.json"));

  const fs::path pr = dir / "predict";
  REQUIRE(run_firp("predict --out " + pr.string() + " --config " + (tr / "config.json").string() +
                   " --set paths.checkpoint=" + tr.string() + " --set paths.episode=" + (dir / "episodes.jsonl").string(),
               log) == kExitOk);
  const nlohmann::json p = nlohmann::json::parse(read(pr / "predictions.json"));
  CHECK(p["p"].get<double>() > 0.0);
  CHECK(p["p"].get<double>() < 1.0);
  CHECK(read(dir / "episodes.jsonl") == dataset);

  const fs::path rp = dir / "replan";
  REQUIRE(run_firp("replan --out " + rp.string() + " --config " + (tr / "config.json").string() +
                   " --set replan.trials=3 --set paths.checkpoint=" + tr.string(),
               log) == kExitOk);
  const nlohmann::json r = nlohmann::json::parse(read(rp / "replan.json"));
  CHECK(r["trials"].size() == 3);
  CHECK(r["table"].size() == 2);
  CHECK(fs::exists(rp / "replan.csv"));
  fs::remove_all(dir);
}

TEST_CASE("gradcheck passes on small dims") {
  const fs::path dir = scratch("grad");
  CHECK(run_firp("gradcheck --out " + dir.string() + kTiny, dir / "log.txt") == kExitOk);
  const nlohmann::json g = nlohmann::json::parse(read(dir / "gradcheck.json"));
  CHECK(g["pass"] == true);
  fs::remove_all(dir);
}
