#include "idc/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "idc/random.hpp"

namespace idc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* section) {
  if (!j.is_object()) throw Error(Errc::ConfigInvalid, std::string(section) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) {
      throw Error(Errc::ConfigInvalid, "unknown key '" + key + "' in " + section);
    }
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::ConfigInvalid, std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

ordered_json to_json(const TrainConfig& c) {
  return {{"num_classes", c.num_classes},
          {"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"feature_dim", c.feature_dim},
          {"discriminator_hidden", c.discriminator_hidden},
          {"memory_slots", c.memory_slots},
          {"read_k", c.read_k},
          {"batch_size", c.batch_size},
          {"max_iterations", c.max_iterations},
          {"encoder_lr", c.encoder_lr},
          {"discriminator_lr", c.discriminator_lr},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"memory_lr", c.memory_lr},
          {"grl_gamma", c.grl_gamma},
          {"grl_max", c.grl_max},
          {"seed", c.seed}};
}

void merge_json(const json& j, TrainConfig& c) {
  check_keys(j,
             {"num_classes", "input_dim", "hidden_dim", "feature_dim", "discriminator_hidden",
              "memory_slots", "read_k", "batch_size", "max_iterations", "encoder_lr",
              "discriminator_lr", "momentum", "weight_decay", "memory_lr", "grl_gamma", "grl_max",
              "seed"},
             "train");
  get_if(j, "num_classes", c.num_classes);
  get_if(j, "input_dim", c.input_dim);
  get_if(j, "hidden_dim", c.hidden_dim);
  get_if(j, "feature_dim", c.feature_dim);
  get_if(j, "discriminator_hidden", c.discriminator_hidden);
  get_if(j, "memory_slots", c.memory_slots);
  get_if(j, "read_k", c.read_k);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "max_iterations", c.max_iterations);
  get_if(j, "encoder_lr", c.encoder_lr);
  get_if(j, "discriminator_lr", c.discriminator_lr);
  get_if(j, "momentum", c.momentum);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "memory_lr", c.memory_lr);
  get_if(j, "grl_gamma", c.grl_gamma);
  get_if(j, "grl_max", c.grl_max);
  get_if(j, "seed", c.seed);
}

ordered_json to_json(const SyntheticShiftSpec& s) {
  return {{"num_classes", s.num_classes},
          {"input_dim", s.input_dim},
          {"source_per_class", s.source_per_class},
          {"target_per_class", s.target_per_class},
          {"radius", s.radius},
          {"sigma", s.sigma},
          {"rotation", s.rotation},
          {"translation", s.translation},
          {"scale", s.scale},
          {"overlap", s.overlap},
          {"seed", s.seed}};
}

void merge_json(const json& j, SyntheticShiftSpec& s) {
  check_keys(j,
             {"num_classes", "input_dim", "source_per_class", "target_per_class", "radius",
              "sigma", "rotation", "translation", "scale", "overlap", "seed"},
             "data");
  get_if(j, "num_classes", s.num_classes);
  get_if(j, "input_dim", s.input_dim);
  get_if(j, "source_per_class", s.source_per_class);
  get_if(j, "target_per_class", s.target_per_class);
  get_if(j, "radius", s.radius);
  get_if(j, "sigma", s.sigma);
  get_if(j, "rotation", s.rotation);
  get_if(j, "translation", s.translation);
  get_if(j, "scale", s.scale);
  get_if(j, "overlap", s.overlap);
  get_if(j, "seed", s.seed);
}

void SelectConfig::validate() const {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(Errc::ConfigInvalid, "select.ratio must be in (0,1]");
  if (!(mixture_split >= 0.0 && mixture_split <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "select.mixture_split must be in [0,1]");
  }
}

ordered_json to_json(const SelectConfig& s) {
  return {{"method", to_string(s.method)},
          {"strategy", to_string(s.strategy)},
          {"ratio", s.ratio},
          {"mixture_split", s.mixture_split}};
}

void merge_json(const json& j, SelectConfig& s) {
  check_keys(j, {"method", "strategy", "ratio", "mixture_split"}, "select");
  std::string method = to_string(s.method);
  std::string strategy = to_string(s.strategy);
  get_if(j, "method", method);
  get_if(j, "strategy", strategy);
  try {
    s.method = importance_method_from_string(method);
    s.strategy = strategy_from_string(strategy);
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }
  get_if(j, "ratio", s.ratio);
  get_if(j, "mixture_split", s.mixture_split);
}

void RunConfig::resolve() {
  data.seed = seed;
  train.seed = seed;
  data.validate();
  train.validate();
  select.validate();
}

ordered_json RunConfig::to_json() const {
  return {{"seed", seed},
          {"data", idc::to_json(data)},
          {"train", idc::to_json(train)},
          {"select", idc::to_json(select)}};
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, {"seed", "data", "train", "select"}, "config");
  RunConfig rc;
  get_if(j, "seed", rc.seed);
  if (j.contains("data")) merge_json(j.at("data"), rc.data);
  if (j.contains("train")) merge_json(j.at("train"), rc.train);
  if (j.contains("select")) merge_json(j.at("select"), rc.select);
  return rc;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigInvalid, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace idc
