#include "firp/cli/config.hpp"

#include <cstdio>
#include <fstream>

#include "firp/errors.hpp"

namespace firp::cli {

using nlohmann::json;

namespace {

json interval_json(const world::Interval& i) { return json::array({i.lo, i.hi}); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const char* type_name(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

/// True if `v` may replace `def` (integers are accepted where numbers are).
bool compatible(const json& def, const json& v) {
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    if (def.empty()) return true;
    for (const json& x : v) {
      if (!compatible(def.front(), x)) return false;
    }
    return true;
  }
  return std::string(type_name(def)) == type_name(v);
}

/// Recursively writes `user` over `doc`, rejecting unknown keys and type changes.
void merge(json& doc, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string p = join(path, key);
    if (!doc.contains(key)) throw ConfigError("config: unknown field '" + p + "'");
    json& slot = doc[key];
    if (slot.is_object()) {
      merge(slot, value, p);
    } else if (!compatible(slot, value)) {
      throw ConfigError("config: '" + p + "' expects " + type_name(slot) + ", got " + type_name(value));
    } else {
      slot = value;
    }
  }
}

world::Interval interval_from(const json& j, const std::string& path) {
  if (j.size() != 2) throw ConfigError("config: '" + path + "' must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

train::ClassifierKind kind_at(const json& j, const std::string& path) {
  try {
    return train::classifier_kind_from_string(j.get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError("config: '" + path + "': " + e.what());
  }
}

}  // namespace

json default_document(world::TaskKind kind) {
  const world::TaskSpec s = kind == world::TaskKind::Stacking ? world::TaskSpec::stacking() : world::TaskSpec::replacement();
  const model::ModelDims d;
  const train::TrainConfig tc;
  const train::ClassifierConfig cc;
  const eval::EvalConfig ec;
  const replan::ReplanConfig rc;
  const double noise = kind == world::TaskKind::Stacking ? 0.005 : 0.02;
  return json{
      {"task",
       {{"kind", world::to_string(kind)},
        {"blocks", s.blocks},
        {"horizon", s.horizon},
        {"noise", noise},
        {"episodes", 500},
        {"block_width", s.block_width},
        {"r_grasp", s.r_grasp},
        {"r_stable", s.r_stable},
        {"r_col", s.r_col},
        {"push_dist", s.push_dist},
        {"max_step", s.max_step},
        {"gripper_x", s.gripper_x},
        {"gripper_y", s.gripper_y},
        {"source", interval_json(s.source)},
        {"target", interval_json(s.target)},
        {"base_x", s.base_x},
        {"base_tol", s.base_tol},
        {"spawn", interval_json(s.spawn)},
        {"keep_out", s.keep_out}}},
      {"dims",
       {{"d_e", d.d_e}, {"d_h", d.d_h}, {"d_s", d.d_s}, {"d_q", d.d_q}, {"M", d.M}, {"L", d.L}, {"hidden", d.hidden}}},
      {"train",
       {{"classifier", "firp"},
        {"lr", tc.lr},
        {"clip", tc.clip},
        {"lambda", cc.lambda},
        {"alpha", cc.alpha},
        {"beta", cc.beta},
        {"e_start_f", tc.e_start_f},
        {"e_stop_e", tc.e_stop_e},
        {"epochs", tc.epochs},
        {"batch_size", tc.batch_size},
        {"top_k", tc.top_k},
        {"normalize_inputs", tc.normalize_inputs},
        {"overshoot", cc.overshoot}}},
      {"eval",
       {{"runs", ec.runs},
        {"train_fraction", ec.train_fraction},
        {"val_fraction", ec.val_fraction},
        {"threshold", ec.threshold},
        {"baselines", json::array({"a_mlp", "a_mlp_enc", "gru", "oracle"})}}},
      {"replan",
       {{"trials", rc.trials}, {"threshold", rc.threshold}, {"max_iter", rc.max_iter}, {"noise", noise}}},
      {"paths", {{"dataset", ""}, {"checkpoint", ""}, {"episode", ""}, {"features", ""}}},
      {"seeds", {{"data", 0}, {"train", 0}, {"eval", 0}, {"replan", 0}}}};
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  const json schema = default_document();
  const json* node = &schema;
  json* target = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("config: unknown field '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) {
      (*target)[part] = value;
      return;
    }
    target = &(*target)[part];
    if (!target->is_object()) *target = json::object();
    start = dot + 1;
  }
}

RunConfig parse_config_document(const json& user) {
  if (!user.is_object()) throw ConfigError("config: the document must be an object");
  world::TaskKind kind = world::TaskKind::Stacking;
  if (user.contains("task") && user["task"].is_object() && user["task"].contains("kind")) {
    const json& k = user["task"]["kind"];
    if (!k.is_string()) throw ConfigError("config: 'task.kind' expects string");
    try {
      kind = world::task_kind_from_string(k.get<std::string>());
    } catch (const Error& e) {
      throw ConfigError(std::string("config: 'task.kind': ") + e.what());
    }
  }
  json doc = default_document(kind);
  merge(doc, user, "");

  RunConfig c;
  const json& t = doc["task"];
  c.task = kind == world::TaskKind::Stacking ? world::TaskSpec::stacking() : world::TaskSpec::replacement();
  c.task.blocks = t["blocks"];
  c.task.horizon = t["horizon"];
  c.task.block_width = t["block_width"];
  c.task.r_grasp = t["r_grasp"];
  c.task.r_stable = t["r_stable"];
  c.task.r_col = t["r_col"];
  c.task.push_dist = t["push_dist"];
  c.task.max_step = t["max_step"];
  c.task.gripper_x = t["gripper_x"];
  c.task.gripper_y = t["gripper_y"];
  c.task.source = interval_from(t["source"], "task.source");
  c.task.target = interval_from(t["target"], "task.target");
  c.task.base_x = t["base_x"];
  c.task.base_tol = t["base_tol"];
  c.task.spawn = interval_from(t["spawn"], "task.spawn");
  c.task.keep_out = t["keep_out"];
  c.task.validate();
  c.noise = t["noise"];
  c.episodes = t["episodes"];
  if (c.noise < 0) throw ConfigError("config: 'task.noise' must be non-negative");
  if (c.episodes < 0) throw ConfigError("config: 'task.episodes' must be non-negative");

  const json& d = doc["dims"];
  c.model.dims.D = world::observation_dim(c.task);
  c.model.dims.d_e = d["d_e"];
  c.model.dims.d_h = d["d_h"];
  c.model.dims.d_s = d["d_s"];
  c.model.dims.d_q = d["d_q"];
  c.model.dims.M = d["M"];
  c.model.dims.L = d["L"];
  c.model.dims.hidden = d["hidden"];
  c.model.dims.validate();
  c.model.T = c.task.horizon;

  const json& tr = doc["train"];
  c.classifier = kind_at(tr["classifier"], "train.classifier");
  c.train.lr = tr["lr"];
  c.train.clip = tr["clip"];
  c.model.lambda = tr["lambda"];
  c.model.alpha = tr["alpha"];
  c.model.beta = tr["beta"];
  c.train.e_start_f = tr["e_start_f"];
  c.train.e_stop_e = tr["e_stop_e"];
  c.train.epochs = tr["epochs"];
  c.train.batch_size = tr["batch_size"];
  c.train.top_k = tr["top_k"];
  c.train.normalize_inputs = tr["normalize_inputs"];
  c.model.overshoot = tr["overshoot"].get<std::vector<int>>();
  c.train.validate();

  const json& ev = doc["eval"];
  c.eval.runs = ev["runs"];
  c.eval.train_fraction = ev["train_fraction"];
  c.eval.val_fraction = ev["val_fraction"];
  c.eval.threshold = ev["threshold"];
  for (std::size_t i = 0; i < ev["baselines"].size(); ++i) {
    c.baselines.push_back(kind_at(ev["baselines"][i], "eval.baselines[" + std::to_string(i) + "]"));
  }

  const json& rp = doc["replan"];
  c.replan.trials = rp["trials"];
  c.replan.threshold = rp["threshold"];
  c.replan.max_iter = rp["max_iter"];
  c.replan.noise = rp["noise"];

  const json& p = doc["paths"];
  c.dataset_path = p["dataset"];
  c.checkpoint_path = p["checkpoint"];
  c.episode_path = p["episode"];
  c.features_path = p["features"];

  const json& s = doc["seeds"];
  c.data_seed = s["data"];
  c.train.seed = s["train"];
  c.eval.seed = s["eval"];
  c.replan.seed = s["replan"];
  c.document = std::move(doc);
  return c;
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      user = json::parse(text, nullptr, false);
      if (user.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
    }
  }
  for (const std::string& o : overrides) apply_override(user, o);
  return parse_config_document(user);
}

std::string config_hash(const json& document) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : document.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace firp::cli
