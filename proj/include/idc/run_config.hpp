#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>

#include "idc/data_io.hpp"
#include "idc/select.hpp"
#include "idc/trainer.hpp"

namespace idc {

nlohmann::ordered_json to_json(const TrainConfig& c);
/// Overlays the keys present in `j` onto `c`. Unknown keys are ConfigInvalid.
void merge_json(const nlohmann::json& j, TrainConfig& c);

nlohmann::ordered_json to_json(const SyntheticShiftSpec& s);
void merge_json(const nlohmann::json& j, SyntheticShiftSpec& s);

struct SelectConfig {
  ImportanceMethod method = ImportanceMethod::idc;
  Strategy strategy = Strategy::M;
  double ratio = 0.1;
  double mixture_split = 0.9;

  void validate() const;
};

nlohmann::ordered_json to_json(const SelectConfig& s);
void merge_json(const nlohmann::json& j, SelectConfig& s);

/// Everything a command needs besides file paths. A single master seed feeds
/// the data, init, sampling and selection streams.
struct RunConfig {
  std::uint64_t seed = 0;
  SyntheticShiftSpec data;
  TrainConfig train;
  SelectConfig select;

  /// Copies the master seed into the nested configs and validates them.
  void resolve();
  nlohmann::ordered_json to_json() const;
  /// 16 hex digits of FNV-1a over the canonical JSON dump.
  std::string hash() const;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
};

}  // namespace idc
