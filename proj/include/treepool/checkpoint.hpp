#pragma once

#include <map>
#include <string>
#include <vector>

#include "treepool/config.hpp"
#include "treepool/dataset.hpp"
#include "treepool/model.hpp"

namespace treepool {

// Multiplier state for the dual-ascent trainer: one value per (pooling layer,
// constraint kind), the ascent step, the update period, and the update log.
struct LagrangianState {
  LambdaMap lambdas;
  double eta = 0.1;
  int update_period = 0;  // batches; 0 = once per epoch

  struct HistoryEntry {
    int step = 0;  // global batch index at update time
    std::map<std::string, double> mean_violation;
    std::map<std::string, double> lambda_after;
  };
  std::vector<HistoryEntry> history;
};

// Projected dual ascent: lambda' = max(0, lambda + eta * violation).
// Violations must be non-negative and finite (callers clamp raw values).
inline LagrangianState dual_update(LagrangianState state,
                                   const std::map<LambdaKey, double>& violations, int step) {
  LagrangianState::HistoryEntry h;
  h.step = step;
  for (auto& [key, lam] : state.lambdas) {
    auto it = violations.find(key);
    double v = it == violations.end() ? 0.0 : it->second;
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("dual_update: violation for " + lambda_key_name(key) +
                                  " must be finite and >= 0");
    lam = std::max(0.0, lam + state.eta * v);
    h.mean_violation[lambda_key_name(key)] = v;
    h.lambda_after[lambda_key_name(key)] = lam;
  }
  state.history.push_back(std::move(h));
  return state;
}

inline json lagrangian_to_json(const LagrangianState& s) {
  json lambdas = json::object();
  for (const auto& [key, lam] : s.lambdas) lambdas[lambda_key_name(key)] = lam;
  json hist = json::array();
  for (const auto& h : s.history)
    hist.push_back(json{{"step", h.step},
                        {"mean_violation", h.mean_violation},
                        {"lambda_after", h.lambda_after}});
  return json{{"lambdas", lambdas}, {"eta", s.eta}, {"update_period", s.update_period},
              {"history", hist}};
}

inline LambdaKey lambda_key_from_name(const std::string& name) {
  auto dot = name.find('.');
  if (name.rfind("pool", 0) != 0 || dot == std::string::npos)
    throw std::runtime_error("bad multiplier key: " + name);
  int layer = std::stoi(name.substr(4, dot - 4));
  return {layer, constraint_from_name(name.substr(dot + 1))};
}

inline LagrangianState lagrangian_from_json(const json& j) {
  LagrangianState s;
  for (auto& [name, v] : j.at("lambdas").items())
    s.lambdas[lambda_key_from_name(name)] = v.get<double>();
  s.eta = j.value("eta", s.eta);
  s.update_period = j.value("update_period", s.update_period);
  for (const auto& h : j.value("history", json::array())) {
    LagrangianState::HistoryEntry e;
    e.step = h.value("step", 0);
    e.mean_violation = h.value("mean_violation", std::map<std::string, double>{});
    e.lambda_after = h.value("lambda_after", std::map<std::string, double>{});
    s.history.push_back(std::move(e));
  }
  return s;
}

// Everything needed to resume or evaluate a run exactly: config, vocabulary
// (content plus hash), parameters, multipliers and RNG state.
struct Checkpoint {
  ModelConfig model;
  Vocabulary vocab;
  std::uint64_t vocab_hash = 0;
  std::vector<std::string> classes;
  ModelParams params;
  LagrangianState lagrangian;
  std::uint64_t rng_state = 0;
  int best_epoch = -1;
  double best_val_macro_f1 = 0.0;
  std::uint64_t dataset_hash = 0;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  json j;
  j["format"] = "treepool-checkpoint-v1";
  j["model"] = model_config_to_json(c.model);
  j["vocab"] = vocab_to_json(c.vocab);
  j["vocab_hash"] = c.vocab_hash;
  j["classes"] = c.classes;
  json params = json::object();
  auto tensors = c.params.all();
  auto names = c.params.names();
  for (std::size_t i = 0; i < tensors.size(); ++i) params[names[i]] = tensor_to_json(*tensors[i]);
  j["params"] = params;
  j["lagrangian"] = lagrangian_to_json(c.lagrangian);
  j["rng_state"] = c.rng_state;
  j["best_epoch"] = c.best_epoch;
  j["best_val_macro_f1"] = c.best_val_macro_f1;
  j["dataset_hash"] = c.dataset_hash;
  save_json_file(path, j);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  json j = load_json_file(path);
  if (j.value("format", std::string()) != "treepool-checkpoint-v1")
    throw std::runtime_error(path + ": not a treepool checkpoint");
  Checkpoint c;
  c.model = model_config_from_json(j.at("model"));
  c.vocab = vocab_from_json(j.at("vocab"));
  c.vocab_hash = j.at("vocab_hash").get<std::uint64_t>();
  if (c.vocab.hash() != c.vocab_hash)
    throw std::runtime_error(path + ": vocabulary hash mismatch (corrupt checkpoint?)");
  c.classes = j.at("classes").get<std::vector<std::string>>();
  c.params = ModelParams::init(c.model, c.vocab.n_features(), c.model.seed);
  auto tensors = c.params.all();
  auto names = c.params.names();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor loaded = tensor_from_json(j.at("params").at(names[i]));
    if (!loaded.same_shape(*tensors[i]))
      throw std::runtime_error(path + ": parameter " + names[i] + " has shape " +
                               loaded.shape_str() + ", expected " + tensors[i]->shape_str());
    *tensors[i] = std::move(loaded);
  }
  c.lagrangian = lagrangian_from_json(j.at("lagrangian"));
  c.rng_state = j.at("rng_state").get<std::uint64_t>();
  c.best_epoch = j.value("best_epoch", -1);
  c.best_val_macro_f1 = j.value("best_val_macro_f1", 0.0);
  c.dataset_hash = j.value("dataset_hash", 0ULL);
  return c;
}

}  // namespace treepool
