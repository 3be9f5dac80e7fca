#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "firp/world/blockworld.hpp"

namespace firp::world {

/// {task, seed, label, actions (T x 10), observations (T x D)}.
nlohmann::json episode_to_json(const Episode& ep);
/// Throws IoError on missing or extra fields and DimensionError on ragged arrays.
Episode episode_from_json(const nlohmann::json& j);

/// One JSON object per line; doubles are written with round-trip precision.
void write_episodes(const std::string& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_episodes(const std::string& path);

}  // namespace firp::world
