#include "firp/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "firp/errors.hpp"

namespace firp::model {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'I', 'R', 'P', 'P', 'A', 'R', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated parameter file " + path);
  return v;
}

}  // namespace

json dims_to_json(const ModelDims& d) {
  return json{{"D", d.D},     {"d_e", d.d_e}, {"d_h", d.d_h}, {"d_s", d.d_s}, {"d_q", d.d_q},
              {"M", d.M},     {"L", d.L},     {"A", d.A},     {"hidden", d.hidden}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  try {
    d.D = j.at("D").get<int>();
    d.d_e = j.at("d_e").get<int>();
    d.d_h = j.at("d_h").get<int>();
    d.d_s = j.at("d_s").get<int>();
    d.d_q = j.at("d_q").get<int>();
    d.M = j.at("M").get<int>();
    d.L = j.at("L").get<double>();
    d.A = j.at("A").get<int>();
    d.hidden = j.at("hidden").get<int>();
  } catch (const json::exception& e) {
    throw IoError(std::string("model dims: ") + e.what());
  }
  d.validate();
  return d;
}

namespace {

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector json_vec(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

json norm_to_json(const InputNorm& n) {
  return json{{"obs_shift", vec_json(n.obs_shift)},
              {"obs_scale", vec_json(n.obs_scale)},
              {"act_shift", vec_json(n.act_shift)},
              {"act_scale", vec_json(n.act_scale)}};
}

InputNorm norm_from_json(const json& j) {
  InputNorm n;
  try {
    n.obs_shift = json_vec(j.at("obs_shift"));
    n.obs_scale = json_vec(j.at("obs_scale"));
    n.act_shift = json_vec(j.at("act_shift"));
    n.act_scale = json_vec(j.at("act_scale"));
  } catch (const json::exception& e) {
    throw IoError(std::string("input norm: ") + e.what());
  }
  return n;
}

json meta_to_json(const CheckpointMeta& m) {
  return json{{"dims", dims_to_json(m.dims)},
              {"seed", m.seed},
              {"epoch", m.epoch},
              {"val_balanced_accuracy", m.val_balanced_accuracy},
              {"config_hash", m.config_hash},
              {"input_norm", norm_to_json(m.norm)}};
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta m;
  try {
    m.dims = dims_from_json(j.at("dims"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epoch = j.at("epoch").get<int>();
    m.val_balanced_accuracy = j.at("val_balanced_accuracy").get<double>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.norm = norm_from_json(j.at("input_norm"));
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint sidecar: ") + e.what());
  }
  return m;
}

void save_params(const ParamSet& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, params.size());
  for (const auto& [name, p] : params) {
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::int64_t>(out, p.value.rows());
    put<std::int64_t>(out, p.value.cols());
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(p.value.size())));
  }
  if (!out) throw IoError("write failed: " + path);
}

void load_params(ParamSet& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError("not a parameter file: " + path);
  }
  const auto count = take<std::uint64_t>(in, path);
  if (count != params.size()) throw IoError("parameter count mismatch in " + path);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = take<std::uint64_t>(in, path);
    if (len > 4096) throw IoError("corrupt parameter name in " + path);
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw IoError("truncated parameter file " + path);
    if (!params.contains(name)) throw IoError("unexpected parameter '" + name + "' in " + path);
    diff::Parameter& p = params.at(name);
    const auto rows = take<std::int64_t>(in, path);
    const auto cols = take<std::int64_t>(in, path);
    if (rows != p.value.rows() || cols != p.value.cols()) throw IoError("shape mismatch for '" + name + "'");
    if (!in.read(reinterpret_cast<char*>(p.value.data()),
                 static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(p.value.size())))) {
      throw IoError("truncated parameter file " + path);
    }
  }
}

void save_checkpoint(const FirpModel& model, const CheckpointMeta& meta, const std::string& stem) {
  save_params(model.params(), stem + ".bin");
  std::ofstream out(stem + ".json");
  if (!out) throw IoError("cannot open " + stem + ".json for writing");
  CheckpointMeta m = meta;
  m.norm = model.input_norm();
  out << meta_to_json(m).dump(2) << '\n';
}

FirpModel load_checkpoint(const std::string& stem, CheckpointMeta* meta) {
  std::ifstream in(stem + ".json");
  if (!in) throw IoError("cannot open " + stem + ".json");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(stem + ".json: " + e.what());
  }
  CheckpointMeta m = meta_from_json(j);
  FirpModel model(m.dims, m.seed);
  load_params(model.params(), stem + ".bin");
  model.set_input_norm(m.norm);
  if (meta) *meta = m;
  return model;
}

}  // namespace firp::model
