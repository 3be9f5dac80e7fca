#include "firp/world/episode_io.hpp"

#include <fstream>
#include <set>

#include "firp/errors.hpp"

namespace firp::world {

using nlohmann::json;

namespace {

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& a, Eigen::Index expected, const std::string& what) {
  if (!a.is_array()) throw IoError(what + ": expected an array");
  if (expected >= 0 && static_cast<Eigen::Index>(a.size()) != expected) {
    throw DimensionError(what + ": expected " + std::to_string(expected) + " entries, got " +
                         std::to_string(a.size()));
  }
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw IoError(what + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

}  // namespace

json episode_to_json(const Episode& ep) {
  json actions = json::array();
  for (const Action& a : ep.actions) actions.push_back(vector_to_json(a.to_vector()));
  json obs = json::array();
  for (const Vector& o : ep.observations) obs.push_back(vector_to_json(o));
  return json{{"task", to_string(ep.task)},
              {"seed", ep.seed},
              {"label", ep.label},
              {"actions", std::move(actions)},
              {"observations", std::move(obs)}};
}

Episode episode_from_json(const json& j) {
  static const std::set<std::string> fields{"task", "seed", "label", "actions", "observations"};
  if (!j.is_object()) throw IoError("episode: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!fields.count(key)) throw IoError("episode: unknown field '" + key + "'");
  }
  for (const std::string& f : fields) {
    if (!j.contains(f)) throw IoError("episode: missing field '" + f + "'");
  }
  Episode ep;
  try {
    ep.task = task_kind_from_string(j.at("task").get<std::string>());
    ep.seed = j.at("seed").get<std::uint64_t>();
    ep.label = j.at("label").get<bool>();
  } catch (const json::exception& e) {
    throw IoError(std::string("episode: ") + e.what());
  }
  const json& actions = j.at("actions");
  const json& obs = j.at("observations");
  if (!actions.is_array() || !obs.is_array()) throw IoError("episode: actions/observations must be arrays");
  if (actions.size() != obs.size()) throw DimensionError("episode: actions and observations differ in length");
  for (const json& a : actions) ep.actions.push_back(Action::from_vector(vector_from_json(a, kActionDim, "action")));
  Eigen::Index d = -1;
  for (const json& o : obs) {
    ep.observations.push_back(vector_from_json(o, d, "observation"));
    d = ep.observations.back().size();
  }
  return ep;
}

void write_episodes(const std::string& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const Episode& ep : episodes) out << episode_to_json(ep).dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Episode> read_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Episode> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(episode_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace firp::world
