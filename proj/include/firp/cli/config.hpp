#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "firp/eval/protocol.hpp"
#include "firp/replan/replan.hpp"
#include "firp/train/trainer.hpp"

namespace firp::cli {

/// Fully resolved run configuration.
struct RunConfig {
  world::TaskSpec task;
  double noise = 0.005;
  int episodes = 500;
  std::uint64_t data_seed = 0;
  train::ClassifierConfig model;
  train::ClassifierKind classifier = train::ClassifierKind::Firp;
  train::TrainConfig train;
  eval::EvalConfig eval;
  std::vector<train::ClassifierKind> baselines;
  replan::ReplanConfig replan;
  std::string dataset_path;
  std::string checkpoint_path;
  std::string episode_path;
  std::string features_path;

  /// The resolved document, as echoed to output directories.
  nlohmann::json document;
};

/// Defaults for every field. The task section depends on task.kind.
nlohmann::json default_document(world::TaskKind kind = world::TaskKind::Stacking);

/// Applies "section.field=value"; the value is parsed as JSON when possible
/// and otherwise taken as a string. Throws ConfigError naming unknown fields.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// defaults < file < overrides. An empty path means no file.
/// Unknown fields and type mismatches throw ConfigError naming the JSON path.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig parse_config_document(const nlohmann::json& user);

/// FNV-1a of the compact resolved document, as 16 hex digits.
std::string config_hash(const nlohmann::json& document);

}  // namespace firp::cli
