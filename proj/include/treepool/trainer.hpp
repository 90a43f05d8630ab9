#pragma once

#include <future>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "treepool/checkpoint.hpp"
#include "treepool/config.hpp"
#include "treepool/dataset.hpp"
#include "treepool/metrics.hpp"
#include "treepool/model.hpp"

namespace treepool {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_ce = 0.0;
  double val_macro_f1 = 0.0;
  std::map<std::string, double> violation_mean;  // mean over batches of batch means
  std::map<std::string, double> violation_last;  // value in the last batch of the epoch
  std::map<std::string, double> lambdas;         // multipliers at epoch end
};

struct RunReport {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_macro_f1 = 0.0;
  bool diverged = false;
  std::string note;
  // evaluated with the best parameters on the validation split
  std::map<std::string, double> final_val_constraints;
  double final_val_constraint_mean = 0.0;
  double final_val_macro_f1 = 0.0;

  json to_json() const {
    json eps = json::array();
    for (const auto& e : epochs)
      eps.push_back(json{{"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"train_ce", e.train_ce},
                         {"val_macro_f1", e.val_macro_f1},
                         {"violation_mean", e.violation_mean},
                         {"violation_last", e.violation_last},
                         {"lambdas", e.lambdas}});
    return json{{"epochs", eps},
                {"best_epoch", best_epoch},
                {"best_val_macro_f1", best_val_macro_f1},
                {"diverged", diverged},
                {"note", note},
                {"final_val_constraints", final_val_constraints},
                {"final_val_constraint_mean", final_val_constraint_mean},
                {"final_val_macro_f1", final_val_macro_f1}};
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss,train_ce,val_macro_f1";
    std::vector<std::string> keys;
    if (!epochs.empty()) {
      for (const auto& [k, v] : epochs.front().lambdas) keys.push_back(k);
      for (const auto& k : keys) out << ",lambda:" << k;
      for (const auto& k : keys) out << ",violation:" << k;
    }
    out << "\n";
    for (const auto& e : epochs) {
      out << e.epoch << "," << e.train_loss << "," << e.train_ce << "," << e.val_macro_f1;
      for (const auto& k : keys) out << "," << e.lambdas.at(k);
      for (const auto& k : keys) out << "," << e.violation_mean.at(k);
      out << "\n";
    }
    return out.str();
  }
};

struct TrainResult {
  Checkpoint checkpoint;
  RunReport report;
};

struct TrainContext {
  Vocabulary vocab;
  std::vector<std::string> classes;
  std::uint64_t dataset_hash = 0;
};

namespace detail {

// Hand-rolled Adam/SGD over the flattened parameter list.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const std::vector<Tensor*>& params) : cfg_(cfg) {
    if (cfg.optimizer == TrainConfig::Optimizer::Adam)
      for (Tensor* p : params) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
      }
  }

  void step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    ++t_;
    if (cfg_.optimizer == TrainConfig::Optimizer::Sgd) {
      for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t j = 0; j < params[i]->size(); ++j)
          (*params[i])[j] -= cfg_.learning_rate * grads[i][j];
      return;
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double bc1 = 1.0 - std::pow(b1, t_);
    double bc2 = 1.0 - std::pow(b2, t_);
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i]->size(); ++j) {
        double g = grads[i][j];
        m_[i][j] = b1 * m_[i][j] + (1.0 - b1) * g;
        v_[i][j] = b2 * v_[i][j] + (1.0 - b2) * g * g;
        (*params[i])[j] -=
            cfg_.learning_rate * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps);
      }
  }

 private:
  TrainConfig cfg_;
  std::vector<Tensor> m_, v_;
  double t_ = 0.0;
};

inline std::map<LambdaKey, double> zero_key_map(const LambdaMap& lambdas) {
  std::map<LambdaKey, double> m;
  for (const auto& [k, v] : lambdas) m[k] = 0.0;
  return m;
}

}  // namespace detail

// Trains one model. Dual mode updates the multipliers every update period
// (default: each epoch) by projected ascent on the running-mean violations;
// fixed mode keeps them at the configured values. Early stopping keeps the
// checkpoint with the best validation macro F1 (ties: earliest epoch).
// A non-finite loss aborts the run and returns the last good parameters.
inline TrainResult train_model(const std::vector<Sample>& train_set,
                               const std::vector<Sample>& val_set, const ModelConfig& model_cfg,
                               const TrainConfig& train_cfg, const TrainContext& ctx) {
  model_cfg.validate();
  train_cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train/val splits must be nonempty");

  ModelParams params = ModelParams::init(model_cfg, ctx.vocab.n_features(), model_cfg.seed);
  ModelParams best_params = params;

  LagrangianState lag;
  lag.eta = train_cfg.lambda_lr;
  lag.update_period = train_cfg.lambda_update_period;
  if (train_cfg.lambda_mode == TrainConfig::LambdaMode::Dual) {
    lag.lambdas = init_lambdas(model_cfg, train_cfg.lambda_init);
  } else {
    lag.lambdas = init_lambdas(model_cfg, 0.0);
    // map fixed values onto the enabled kinds, every layer alike
    std::vector<ConstraintKind> kinds =
        model_cfg.constraints ? model_cfg.constraints->enabled() : std::vector<ConstraintKind>{};
    for (auto& [key, lam] : lag.lambdas) {
      if (train_cfg.fixed_lambdas.size() == 1) {
        lam = train_cfg.fixed_lambdas[0];
      } else {
        std::size_t pos = 0;
        for (; pos < kinds.size(); ++pos)
          if (kinds[pos] == key.second) break;
        if (pos >= train_cfg.fixed_lambdas.size())
          throw std::invalid_argument("fixed_lambdas: expected 1 or " +
                                      std::to_string(kinds.size()) + " values");
        lam = train_cfg.fixed_lambdas[pos];
      }
    }
  }

  Rng order_rng(train_cfg.seed ^ 0x5deece66dULL);
  RunReport report;
  int best_epoch = -1;
  double best_f1 = -1.0;
  int since_best = 0;
  int global_batch = 0;

  auto evaluate_f1 = [&](const ModelParams& p) {
    std::vector<int> preds, golds;
    preds.reserve(val_set.size());
    for (const Sample& s : val_set) {
      preds.push_back(predict_class(forward(model_cfg, p, s.graph).logits));
      golds.push_back(s.label);
    }
    return f1_scores(preds, golds, model_cfg.n_classes).macro_f1;
  };

  // period accumulators for the dual signal
  std::map<LambdaKey, double> period_sum = detail::zero_key_map(lag.lambdas);
  int period_batches = 0;

  std::vector<Tensor*> param_ptrs = params.all();
  detail::Optimizer opt(train_cfg, param_ptrs);

  for (int epoch = 0; epoch < train_cfg.epochs && !report.diverged; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    EpochLog log;
    log.epoch = epoch;
    std::map<LambdaKey, double> epoch_sum = detail::zero_key_map(lag.lambdas);
    std::map<LambdaKey, double> last_batch = detail::zero_key_map(lag.lambdas);
    int epoch_batches = 0;
    double loss_sum = 0.0, ce_sum = 0.0;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(train_cfg.batch_size)) {
      std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(train_cfg.batch_size));
      ad::Tape tape;
      ParamVars pv = ParamVars::onto(tape, params);
      ad::Var batch_loss;
      double batch_ce = 0.0;
      std::map<LambdaKey, double> batch_violation = detail::zero_key_map(lag.lambdas);
      for (std::size_t bi = start; bi < end; ++bi) {
        const Sample& s = train_set[order[bi]];
        ForwardVars fv = forward_on_tape(tape, model_cfg, pv, s.graph);
        ConstraintReport creport;
        ad::Var ce = ad::cross_entropy(fv.logits, s.label);
        batch_ce += ce.item();
        ad::Var loss = ce;
        for (int b = 0; b < model_cfg.n_blocks(); ++b) {
          for (ConstraintKind kind : model_cfg.layer_constraints(b)) {
            double lam = lag.lambdas.at({b, kind});
            const ad::Var& p = fv.pools[static_cast<std::size_t>(b)].p;
            ConstraintValue cv;
            switch (kind) {
              case ConstraintKind::Contiguity:
                cv = b == 0 ? contiguity(tape, p, s.graph, model_cfg.constraints->epsilon)
                            : contiguity(tape, p,
                                         fv.pools[static_cast<std::size_t>(b - 1)].a_fwd_pooled,
                                         model_cfg.constraints->epsilon);
                break;
              case ConstraintKind::Subtree: cv = st_constraint(tape, p, s.graph); break;
              case ConstraintKind::SubsetTree: cv = sst_constraint(tape, p, s.graph); break;
              case ConstraintKind::Overlap:
                cv = overlap(tape, p, model_cfg.constraints->delta);
                break;
              case ConstraintKind::MinIntensity:
                cv = min_intensity(tape, p, model_cfg.constraints->alpha);
                break;
            }
            batch_violation[{b, kind}] += std::max(0.0, cv.value);
            if (lam > 0.0) loss = ad::add(loss, ad::scale(cv.var, lam));
          }
        }
        batch_loss = batch_loss.valid() ? ad::add(batch_loss, loss) : loss;
      }
      double n_in_batch = static_cast<double>(end - start);
      batch_loss = ad::scale(batch_loss, 1.0 / n_in_batch);
      double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value)) {
        report.diverged = true;
        report.note = "non-finite loss in epoch " + std::to_string(epoch) +
                      "; aborted, keeping last good parameters";
        break;
      }
      tape.backward(batch_loss);
      std::vector<Tensor> grads;
      grads.reserve(param_ptrs.size());
      for (const ad::Var& v : pv.all()) grads.push_back(v.grad());
      opt.step(param_ptrs, grads);

      loss_sum += loss_value * n_in_batch;
      ce_sum += batch_ce;
      seen += end - start;
      ++epoch_batches;
      ++global_batch;
      for (auto& [key, v] : batch_violation) {
        double mean = v / n_in_batch;
        period_sum[key] += mean;
        epoch_sum[key] += mean;
        last_batch[key] = mean;
      }
      ++period_batches;

      bool period_done = lag.update_period > 0 && global_batch % lag.update_period == 0;
      if (train_cfg.lambda_mode == TrainConfig::LambdaMode::Dual && period_done) {
        std::map<LambdaKey, double> means;
        for (auto& [key, v] : period_sum) means[key] = v / static_cast<double>(period_batches);
        lag = dual_update(std::move(lag), means, global_batch);
        period_sum = detail::zero_key_map(lag.lambdas);
        period_batches = 0;
      }
    }
    if (report.diverged) {
      if (best_epoch < 0) best_params = params;  // no validated epoch yet: keep last good step
      break;
    }

    // default period: once per epoch
    if (train_cfg.lambda_mode == TrainConfig::LambdaMode::Dual && lag.update_period == 0 &&
        period_batches > 0) {
      std::map<LambdaKey, double> means;
      for (auto& [key, v] : period_sum) means[key] = v / static_cast<double>(period_batches);
      lag = dual_update(std::move(lag), means, global_batch);
      period_sum = detail::zero_key_map(lag.lambdas);
      period_batches = 0;
    }

    log.train_loss = loss_sum / static_cast<double>(seen);
    log.train_ce = ce_sum / static_cast<double>(seen);
    log.val_macro_f1 = evaluate_f1(params);
    for (const auto& [key, v] : epoch_sum)
      log.violation_mean[lambda_key_name(key)] = v / static_cast<double>(epoch_batches);
    for (const auto& [key, v] : last_batch) log.violation_last[lambda_key_name(key)] = v;
    for (const auto& [key, lam] : lag.lambdas) log.lambdas[lambda_key_name(key)] = lam;
    report.epochs.push_back(log);

    if (log.val_macro_f1 > best_f1) {
      best_f1 = log.val_macro_f1;
      best_epoch = epoch;
      best_params = params;
      since_best = 0;
    } else if (++since_best >= train_cfg.patience) {
      break;
    }
  }

  report.best_epoch = best_epoch;
  report.best_val_macro_f1 = best_f1 < 0.0 ? 0.0 : best_f1;

  // final constraint values with the best parameters, raw, on validation
  std::map<std::string, double> totals;
  {
    params = best_params;
    double grand = 0.0;
    std::size_t grand_n = 0;
    for (const Sample& s : val_set) {
      ad::Tape tape;
      ParamVars pv = ParamVars::onto(tape, params);
      ForwardVars fv = forward_on_tape(tape, model_cfg, pv, s.graph);
      ConstraintReport creport;
      (void)total_loss_on_tape(tape, fv, s.label, model_cfg, s.graph, lag.lambdas, &creport);
      for (const auto& e : creport.entries) {
        totals[lambda_key_name({e.layer, e.kind})] += e.value;
        grand += e.value;
        ++grand_n;
      }
    }
    for (auto& [k, v] : totals) v /= static_cast<double>(val_set.size());
    report.final_val_constraints = totals;
    report.final_val_constraint_mean =
        grand_n == 0 ? 0.0 : grand / static_cast<double>(grand_n);
    report.final_val_macro_f1 = evaluate_f1(best_params);
  }

  TrainResult result;
  result.report = std::move(report);
  result.checkpoint.model = model_cfg;
  result.checkpoint.vocab = ctx.vocab;
  result.checkpoint.vocab_hash = ctx.vocab.hash();
  result.checkpoint.classes = ctx.classes;
  result.checkpoint.params = best_params;
  result.checkpoint.lagrangian = lag;
  result.checkpoint.rng_state = order_rng.state();
  result.checkpoint.best_epoch = best_epoch;
  result.checkpoint.best_val_macro_f1 = result.report.best_val_macro_f1;
  result.checkpoint.dataset_hash = ctx.dataset_hash;
  return result;
}

// Multi-start wrapper: independent restarts with derived seeds, best
// validation macro F1 wins (ties: lowest restart index). Restarts run as
// parallel jobs; aggregation is order-independent.
inline TrainResult train_multi_start(const std::vector<Sample>& train_set,
                                     const std::vector<Sample>& val_set,
                                     const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                     const TrainContext& ctx) {
  int restarts = train_cfg.multi_start;
  if (restarts <= 1) return train_model(train_set, val_set, model_cfg, train_cfg, ctx);
  std::vector<TrainResult> results(static_cast<std::size_t>(restarts));
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  for (int base = 0; base < restarts; base += static_cast<int>(hw)) {
    std::vector<std::future<TrainResult>> wave;
    for (int r = base; r < std::min(restarts, base + static_cast<int>(hw)); ++r)
      wave.push_back(std::async(std::launch::async, [&, r] {
        ModelConfig mc = model_cfg;
        TrainConfig tc = train_cfg;
        mc.seed = model_cfg.seed + static_cast<std::uint64_t>(r);
        tc.seed = train_cfg.seed + static_cast<std::uint64_t>(r);
        tc.multi_start = 1;
        return train_model(train_set, val_set, mc, tc, ctx);
      }));
    for (std::size_t i = 0; i < wave.size(); ++i)
      results[static_cast<std::size_t>(base) + i] = wave[i].get();
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (results[r].report.best_val_macro_f1 > results[best].report.best_val_macro_f1) best = r;
  return results[best];
}

}  // namespace treepool
