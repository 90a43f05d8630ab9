#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treepool/corpus.hpp"
#include "treepool/kernels.hpp"
#include "treepool/model.hpp"

namespace treepool {

using nlohmann::json;

// ---- tensors ---------------------------------------------------------------

inline json tensor_to_json(const Tensor& t) {
  json j;
  j["rows"] = t.rows();
  j["cols"] = t.cols();
  j["data"] = t.data();
  return j;
}

inline Tensor tensor_from_json(const json& j) {
  Tensor t(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != t.size()) throw std::runtime_error("tensor payload size mismatch");
  t.data() = std::move(data);
  return t;
}

// ---- kernel / constraint configs --------------------------------------------

inline json kernel_config_to_json(const KernelConfig& c) {
  return json{{"kind", kernel_name(c.kind)},
              {"decay_lambda", c.decay_lambda},
              {"decay_mu", c.decay_mu},
              {"normalized", c.normalized}};
}

inline KernelConfig kernel_config_from_json(const json& j) {
  KernelConfig c;
  if (j.contains("kind")) c.kind = kernel_from_name(j["kind"].get<std::string>());
  c.decay_lambda = j.value("decay_lambda", c.decay_lambda);
  c.decay_mu = j.value("decay_mu", c.decay_mu);
  c.normalized = j.value("normalized", c.normalized);
  c.validate();
  return c;
}

inline json constraint_set_to_json(const ConstraintSet& s) {
  return json{{"kernel", kernel_name(s.kernel)},
              {"epsilon", s.epsilon},
              {"delta", s.delta},
              {"alpha", s.alpha}};
}

inline ConstraintSet constraint_set_from_json(const json& j) {
  ConstraintSet s;
  if (j.contains("kernel")) s.kernel = kernel_from_name(j["kernel"].get<std::string>());
  s.epsilon = j.value("epsilon", s.epsilon);
  s.delta = j.value("delta", s.delta);
  s.alpha = j.value("alpha", s.alpha);
  s.validate();
  return s;
}

// ---- model config ------------------------------------------------------------

inline json model_config_to_json(const ModelConfig& c) {
  json j;
  j["embed_dim"] = c.embed_dim;
  j["gcn_layers_per_block"] = c.gcn_layers_per_block;
  j["pool_ks"] = c.pool_ks;
  j["pooling_activation"] =
      c.pooling_activation == ModelConfig::Activation::Softmax ? "softmax" : "sigmoid";
  j["mlp_hidden"] = c.mlp_hidden;
  j["n_classes"] = c.n_classes;
  j["constraints"] = c.constraints ? constraint_set_to_json(*c.constraints) : json(nullptr);
  j["seed"] = c.seed;
  return j;
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  if (j.contains("gcn_layers_per_block")) {
    if (j["gcn_layers_per_block"].is_number_integer()) {
      // a single integer replicates across blocks (resolved after pool_ks)
      c.gcn_layers_per_block.clear();
    } else {
      c.gcn_layers_per_block = j["gcn_layers_per_block"].get<std::vector<int>>();
    }
  }
  if (j.contains("pool_ks")) c.pool_ks = j["pool_ks"].get<std::vector<int>>();
  if (!c.pool_ks.empty()) c.pool_ks.back() = 1;  // final block is always the k=1 readout
  if (j.contains("gcn_layers_per_block") && j["gcn_layers_per_block"].is_number_integer())
    c.gcn_layers_per_block.assign(c.pool_ks.size(), j["gcn_layers_per_block"].get<int>());
  if (j.contains("pooling_activation")) {
    std::string a = j["pooling_activation"].get<std::string>();
    if (a == "softmax")
      c.pooling_activation = ModelConfig::Activation::Softmax;
    else if (a == "sigmoid")
      c.pooling_activation = ModelConfig::Activation::Sigmoid;
    else
      throw std::invalid_argument("pooling_activation must be softmax or sigmoid");
  }
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.n_classes = j.value("n_classes", c.n_classes);
  if (j.contains("constraints") && !j["constraints"].is_null())
    c.constraints = constraint_set_from_json(j["constraints"]);
  else if (j.contains("constraints"))
    c.constraints.reset();
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---- train config ------------------------------------------------------------

struct TrainConfig {
  enum class Optimizer { Sgd, Adam };
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  int epochs = 40;
  int batch_size = 16;
  int patience = 8;        // early stopping on validation macro F1
  int multi_start = 1;
  enum class LambdaMode { Dual, Fixed };
  LambdaMode lambda_mode = LambdaMode::Dual;
  // Fixed-mode coefficients: one value applies to every multiplier; several
  // map onto the enabled constraint kinds in ConstraintSet::enabled() order.
  std::vector<double> fixed_lambdas = {0.1};
  double lambda_lr = 0.1;        // dual ascent step
  int lambda_update_period = 0;  // in batches; 0 means once per epoch
  double lambda_init = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch_size >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (multi_start < 1) throw std::invalid_argument("multi_start must be >= 1");
    if (lambda_lr < 0.0) throw std::invalid_argument("lambda_lr must be >= 0");
    if (lambda_init < 0.0) throw std::invalid_argument("lambda_init must be >= 0");
    if (fixed_lambdas.empty()) throw std::invalid_argument("fixed_lambdas must be nonempty");
    for (double v : fixed_lambdas)
      if (v < 0.0) throw std::invalid_argument("fixed lambda values must be >= 0");
  }
};

inline json train_config_to_json(const TrainConfig& c) {
  json j;
  j["optimizer"] = c.optimizer == TrainConfig::Optimizer::Adam ? "adam" : "sgd";
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["patience"] = c.patience;
  j["multi_start"] = c.multi_start;
  j["lambda_mode"] = c.lambda_mode == TrainConfig::LambdaMode::Dual ? "dual" : "fixed";
  j["fixed_lambdas"] = c.fixed_lambdas;
  j["lambda_lr"] = c.lambda_lr;
  j["lambda_update_period"] = c.lambda_update_period;
  j["lambda_init"] = c.lambda_init;
  j["seed"] = c.seed;
  return j;
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  if (j.contains("optimizer")) {
    std::string o = j["optimizer"].get<std::string>();
    if (o == "adam")
      c.optimizer = TrainConfig::Optimizer::Adam;
    else if (o == "sgd")
      c.optimizer = TrainConfig::Optimizer::Sgd;
    else
      throw std::invalid_argument("optimizer must be adam or sgd");
  }
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.multi_start = j.value("multi_start", c.multi_start);
  if (j.contains("lambda_mode")) {
    std::string m = j["lambda_mode"].get<std::string>();
    if (m == "dual")
      c.lambda_mode = TrainConfig::LambdaMode::Dual;
    else if (m == "fixed")
      c.lambda_mode = TrainConfig::LambdaMode::Fixed;
    else
      throw std::invalid_argument("lambda_mode must be dual or fixed");
  }
  if (j.contains("fixed_lambdas")) c.fixed_lambdas = j["fixed_lambdas"].get<std::vector<double>>();
  c.lambda_lr = j.value("lambda_lr", c.lambda_lr);
  c.lambda_update_period = j.value("lambda_update_period", c.lambda_update_period);
  c.lambda_init = j.value("lambda_init", c.lambda_init);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---- corpus spec ---------------------------------------------------------------

inline json corpus_spec_to_json(const SynthCorpusSpec& s) {
  json classes = json::array();
  for (const auto& c : s.classes) classes.push_back(json{{"name", c.name}, {"pattern", c.pattern}});
  return json{{"n_per_class", s.n_per_class}, {"classes", classes},   {"max_depth", s.max_depth},
              {"noise_rate", s.noise_rate},   {"max_nodes", s.max_nodes}, {"seed", s.seed}};
}

inline SynthCorpusSpec corpus_spec_from_json(const json& j) {
  SynthCorpusSpec s;
  s.n_per_class = j.value("n_per_class", s.n_per_class);
  if (j.contains("classes")) {
    s.classes.clear();
    for (const auto& c : j["classes"])
      s.classes.push_back({c.at("name").get<std::string>(), c.value("pattern", std::string())});
  }
  s.max_depth = j.value("max_depth", s.max_depth);
  s.noise_rate = j.value("noise_rate", s.noise_rate);
  s.max_nodes = j.value("max_nodes", s.max_nodes);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

// ---- experiment config ----------------------------------------------------------

struct ExperimentConfig {
  // either explicit files ...
  std::string train_path, val_path, test_path;
  // ... or one file plus a split scheme
  std::string data_path;
  double train_frac = 0.7, val_frac = 0.15;
  ModelConfig model;
  TrainConfig train;
  std::string out_dir = "run";
  std::uint64_t seed = 1;
  bool lowercase_tokens = false;
  int max_nodes = 256;

  void validate() const {
    bool explicit_files = !train_path.empty();
    bool split_mode = !data_path.empty();
    if (explicit_files == split_mode)
      throw std::invalid_argument(
          "dataset must give either train/val[/test] paths or a single path with a split");
    model.validate();
    train.validate();
  }
};

inline json experiment_config_to_json(const ExperimentConfig& c) {
  json d;
  if (!c.train_path.empty()) {
    d["train"] = c.train_path;
    d["val"] = c.val_path;
    if (!c.test_path.empty()) d["test"] = c.test_path;
  } else {
    d["path"] = c.data_path;
    d["train_frac"] = c.train_frac;
    d["val_frac"] = c.val_frac;
  }
  return json{{"dataset", d},
              {"model", model_config_to_json(c.model)},
              {"train", train_config_to_json(c.train)},
              {"out_dir", c.out_dir},
              {"seed", c.seed},
              {"lowercase_tokens", c.lowercase_tokens},
              {"max_nodes", c.max_nodes}};
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    if (d.contains("train")) {
      c.train_path = d["train"].get<std::string>();
      c.val_path = d.value("val", std::string());
      c.test_path = d.value("test", std::string());
    } else if (d.contains("path")) {
      c.data_path = d["path"].get<std::string>();
      c.train_frac = d.value("train_frac", c.train_frac);
      c.val_frac = d.value("val_frac", c.val_frac);
    }
  }
  if (j.contains("model")) c.model = model_config_from_json(j["model"]);
  if (j.contains("train")) c.train = train_config_from_json(j["train"]);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.lowercase_tokens = j.value("lowercase_tokens", c.lowercase_tokens);
  c.max_nodes = j.value("max_nodes", c.max_nodes);
  // one seed drives every module unless a section pins its own
  if (!j.contains("model") || !j["model"].contains("seed")) c.model.seed = c.seed;
  if (!j.contains("train") || !j["train"].contains("seed")) c.train.seed = c.seed;
  c.validate();
  return c;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace treepool
