#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "firp/model/firp_model.hpp"

namespace firp::model {

nlohmann::json dims_to_json(const ModelDims& dims);
ModelDims dims_from_json(const nlohmann::json& j);

nlohmann::json norm_to_json(const InputNorm& norm);
InputNorm norm_from_json(const nlohmann::json& j);

struct CheckpointMeta {
  ModelDims dims;
  std::uint64_t seed = 0;
  int epoch = 0;
  double val_balanced_accuracy = 0;
  std::string config_hash;
  InputNorm norm;
};

nlohmann::json meta_to_json(const CheckpointMeta& meta);
CheckpointMeta meta_from_json(const nlohmann::json& j);

/// Binary layout: magic "FIRPPAR1", u64 count, then per parameter
/// u64 name length, name bytes, i64 rows, i64 cols, rows*cols f64 (little endian).
void save_params(const ParamSet& params, const std::string& path);
/// Loads into an existing set; names and shapes must match exactly.
void load_params(ParamSet& params, const std::string& path);

/// Writes `<stem>.bin` and `<stem>.json`; the sidecar takes the model's input norm.
void save_checkpoint(const FirpModel& model, const CheckpointMeta& meta, const std::string& stem);
FirpModel load_checkpoint(const std::string& stem, CheckpointMeta* meta = nullptr);

}  // namespace firp::model
