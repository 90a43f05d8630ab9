#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treepool/autodiff.hpp"
#include "treepool/constraints.hpp"
#include "treepool/graph.hpp"

namespace treepool {

struct ModelConfig {
  int embed_dim = 16;
  std::vector<int> gcn_layers_per_block = {2, 1};  // one entry per pooling block
  std::vector<int> pool_ks = {8, 1};               // last entry is forced to 1
  enum class Activation { Softmax, Sigmoid };
  Activation pooling_activation = Activation::Sigmoid;
  int mlp_hidden = 32;
  int n_classes = 2;
  std::optional<ConstraintSet> constraints;  // nullopt: plain GCN + pooling
  std::uint64_t seed = 1;

  void validate() const {
    if (pool_ks.empty()) throw std::invalid_argument("pool_ks must be nonempty");
    if (pool_ks.back() != 1) throw std::invalid_argument("final pooling block must have k = 1");
    if (gcn_layers_per_block.size() != pool_ks.size())
      throw std::invalid_argument("gcn_layers_per_block and pool_ks must have equal length");
    for (int k : pool_ks)
      if (k < 1) throw std::invalid_argument("pool_ks entries must be >= 1");
    for (int l : gcn_layers_per_block)
      if (l < 0) throw std::invalid_argument("gcn layer counts must be >= 0");
    if (embed_dim < 1 || mlp_hidden < 1 || n_classes < 2)
      throw std::invalid_argument("embed_dim, mlp_hidden >= 1 and n_classes >= 2 required");
    if (constraints) constraints->validate();
  }

  int n_blocks() const { return static_cast<int>(pool_ks.size()); }

  // Constraints apply to every pooling layer except the final k=1 readout.
  // The subtree/subset-tree rules additionally need the discrete tree (leaf
  // mask, integer degrees), so they attach only to tree-level pooling.
  bool layer_constrained(int block) const {
    return constraints.has_value() && block + 1 < n_blocks();
  }

  std::vector<ConstraintKind> layer_constraints(int block) const {
    std::vector<ConstraintKind> out;
    if (!layer_constrained(block)) return out;
    for (ConstraintKind k : constraints->enabled()) {
      bool tree_only = k == ConstraintKind::Subtree || k == ConstraintKind::SubsetTree;
      if (tree_only && block != 0) continue;
      out.push_back(k);
    }
    return out;
  }
};

struct ModelParams {
  Tensor embedding;                       // n_features x embed_dim
  std::vector<std::vector<Tensor>> gcn_w; // [block][layer]: d x d
  std::vector<Tensor> pool_w;             // [block]: d x k
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;

  static ModelParams init(const ModelConfig& cfg, int n_features, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    auto glorot = [&rng](std::size_t r, std::size_t c) {
      Tensor t(r, c);
      double s = std::sqrt(6.0 / static_cast<double>(r + c));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-s, s);
      return t;
    };
    ModelParams p;
    p.embedding = Tensor(static_cast<std::size_t>(n_features), static_cast<std::size_t>(cfg.embed_dim));
    for (std::size_t i = 0; i < p.embedding.size(); ++i) p.embedding[i] = rng.uniform(-0.1, 0.1);
    std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
    for (int b = 0; b < cfg.n_blocks(); ++b) {
      std::vector<Tensor> ws;
      for (int l = 0; l < cfg.gcn_layers_per_block[static_cast<std::size_t>(b)]; ++l)
        ws.push_back(glorot(d, d));
      p.gcn_w.push_back(std::move(ws));
      p.pool_w.push_back(glorot(d, static_cast<std::size_t>(cfg.pool_ks[static_cast<std::size_t>(b)])));
    }
    p.mlp_w1 = glorot(d, static_cast<std::size_t>(cfg.mlp_hidden));
    p.mlp_b1 = Tensor(1, static_cast<std::size_t>(cfg.mlp_hidden));
    p.mlp_w2 = glorot(static_cast<std::size_t>(cfg.mlp_hidden), static_cast<std::size_t>(cfg.n_classes));
    p.mlp_b2 = Tensor(1, static_cast<std::size_t>(cfg.n_classes));
    return p;
  }

  // Stable flattening used by the optimizer and the checkpoint format.
  std::vector<Tensor*> all() {
    std::vector<Tensor*> out{&embedding};
    for (auto& blk : gcn_w)
      for (auto& w : blk) out.push_back(&w);
    for (auto& w : pool_w) out.push_back(&w);
    out.push_back(&mlp_w1);
    out.push_back(&mlp_b1);
    out.push_back(&mlp_w2);
    out.push_back(&mlp_b2);
    return out;
  }
  std::vector<const Tensor*> all() const {
    auto v = const_cast<ModelParams*>(this)->all();
    return {v.begin(), v.end()};
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out{"embedding"};
    for (std::size_t b = 0; b < gcn_w.size(); ++b)
      for (std::size_t l = 0; l < gcn_w[b].size(); ++l)
        out.push_back("gcn_w." + std::to_string(b) + "." + std::to_string(l));
    for (std::size_t b = 0; b < pool_w.size(); ++b) out.push_back("pool_w." + std::to_string(b));
    out.push_back("mlp_w1");
    out.push_back("mlp_b1");
    out.push_back("mlp_w2");
    out.push_back("mlp_b2");
    return out;
  }
};

// Tape-registered mirror of ModelParams; register once per tape and share
// across the samples of a batch so gradients accumulate.
struct ParamVars {
  ad::Var embedding;
  std::vector<std::vector<ad::Var>> gcn_w;
  std::vector<ad::Var> pool_w;
  ad::Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;

  static ParamVars onto(ad::Tape& tape, const ModelParams& p) {
    ParamVars v;
    v.embedding = tape.param(p.embedding);
    for (const auto& blk : p.gcn_w) {
      std::vector<ad::Var> ws;
      for (const auto& w : blk) ws.push_back(tape.param(w));
      v.gcn_w.push_back(std::move(ws));
    }
    for (const auto& w : p.pool_w) v.pool_w.push_back(tape.param(w));
    v.mlp_w1 = tape.param(p.mlp_w1);
    v.mlp_b1 = tape.param(p.mlp_b1);
    v.mlp_w2 = tape.param(p.mlp_w2);
    v.mlp_b2 = tape.param(p.mlp_b2);
    return v;
  }

  std::vector<ad::Var> all() const {
    std::vector<ad::Var> out{embedding};
    for (const auto& blk : gcn_w)
      for (const auto& w : blk) out.push_back(w);
    for (const auto& w : pool_w) out.push_back(w);
    out.push_back(mlp_w1);
    out.push_back(mlp_b1);
    out.push_back(mlp_w2);
    out.push_back(mlp_b2);
    return out;
  }
};

namespace detail {

// D^{-1/2} (A + I) D^{-1/2} over a symmetrized adjacency, eagerly (tree level,
// constants only).
inline Tensor normalized_adjacency(const Tensor& a_sym) {
  std::size_t n = a_sym.rows();
  Tensor m = a_sym;
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) += 1.0;
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += m.at(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.at(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return m;
}

// Same normalization as a differentiable graph op (pooled adjacencies depend
// on P). Row sums of A + I are >= 1, so the rsqrt is smooth.
inline ad::Var normalized_adjacency(ad::Tape& tape, const ad::Var& a_sym) {
  std::size_t k = a_sym.val().rows();
  ad::Var m = ad::add(a_sym, tape.constant(Tensor::identity(k)));
  ad::Var d = ad::rowsum(m);
  ad::Var inv_sqrt = ad::div(tape.constant(Tensor(k, 1, 1.0)), ad::sqrt_guarded(d));
  ad::Var cols_scaled = ad::transpose(ad::scale_rows(ad::transpose(m), inv_sqrt));
  return ad::scale_rows(cols_scaled, inv_sqrt);
}

}  // namespace detail

// One GCN aggregation: ReLU(A_hat H W).
inline ad::Var gcn_layer(const ad::Var& a_hat, const ad::Var& h, const ad::Var& w) {
  return ad::relu(ad::matmul(a_hat, ad::matmul(h, w)));
}

struct PoolLayerVars {
  ad::Var p;             // assignment, n_l x k_l
  ad::Var h_pooled;      // k_l x d
  ad::Var a_sym_pooled;  // k_l x k_l
  ad::Var a_fwd_pooled;  // k_l x k_l (directed view, for contiguity)
  int k = 0;
};

struct ForwardVars {
  std::vector<PoolLayerVars> pools;
  ad::Var final_embedding;  // 1 x d
  ad::Var logits;           // 1 x n_classes
};

// Full forward pass for one tree. The trace keeps every assignment matrix so
// constraints and fragment extraction can see them. The final k=1 block
// always pools with softmax (an all-ones column, i.e. sum readout); the
// configured activation governs the fragment-bearing layers.
inline ForwardVars forward_on_tape(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& pv,
                                   const TreeGraph& g) {
  cfg.validate();
  ForwardVars out;
  Tensor a_sym0(static_cast<std::size_t>(g.n), static_cast<std::size_t>(g.n));
  for (std::size_t i = 0; i < a_sym0.size(); ++i) a_sym0[i] = g.a_fwd[i] + g.a_bwd[i];

  ad::Var h = ad::gather_rows(pv.embedding, g.feature_ids);
  ad::Var a_hat = tape.constant(detail::normalized_adjacency(a_sym0));
  ad::Var a_sym = tape.constant(a_sym0);
  ad::Var a_fwd = tape.constant(g.a_fwd);

  for (int b = 0; b < cfg.n_blocks(); ++b) {
    std::size_t ub = static_cast<std::size_t>(b);
    for (const ad::Var& w : pv.gcn_w[ub]) h = gcn_layer(a_hat, h, w);

    ad::Var logits = ad::matmul(h, pv.pool_w[ub]);
    bool final_block = b + 1 == cfg.n_blocks();
    ad::Var p = (final_block || cfg.pooling_activation == ModelConfig::Activation::Softmax)
                    ? ad::softmax_rows(logits)
                    : ad::sigmoid(logits);
    ad::Var pt = ad::transpose(p);
    ad::Var h_pooled = ad::matmul(pt, h);
    ad::Var a_sym_pooled = ad::matmul(pt, ad::matmul(a_sym, p));
    ad::Var a_fwd_pooled = ad::matmul(pt, ad::matmul(a_fwd, p));
    out.pools.push_back(PoolLayerVars{p, h_pooled, a_sym_pooled, a_fwd_pooled,
                                      cfg.pool_ks[ub]});
    h = h_pooled;
    a_sym = a_sym_pooled;
    a_fwd = a_fwd_pooled;
    if (!final_block) a_hat = detail::normalized_adjacency(tape, a_sym);
  }

  out.final_embedding = h;  // 1 x d after the k=1 block
  ad::Var hidden = ad::relu(ad::add(ad::matmul(h, pv.mlp_w1), pv.mlp_b1));
  out.logits = ad::add(ad::matmul(hidden, pv.mlp_w2), pv.mlp_b2);
  return out;
}

// Multipliers are keyed by (pooling layer, constraint kind).
using LambdaKey = std::pair<int, ConstraintKind>;
using LambdaMap = std::map<LambdaKey, double>;

inline std::string lambda_key_name(const LambdaKey& k) {
  return "pool" + std::to_string(k.first) + "." + constraint_name(k.second);
}

inline LambdaMap init_lambdas(const ModelConfig& cfg, double value = 0.0) {
  LambdaMap m;
  for (int b = 0; b < cfg.n_blocks(); ++b)
    for (ConstraintKind k : cfg.layer_constraints(b)) m[{b, k}] = value;
  return m;
}

struct ConstraintReport {
  struct Entry {
    int layer = 0;
    ConstraintKind kind = ConstraintKind::Contiguity;
    double value = 0.0;
    double lambda = 0.0;
    bool degenerate = false;
  };
  std::vector<Entry> entries;

  double mean_value() const {
    if (entries.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : entries) s += e.value;
    return s / static_cast<double>(entries.size());
  }
};

// L = CE + sum_i lambda_i C_i. Raw constraint values go to the report; terms
// whose multiplier is exactly zero are not added to the graph (identical
// arithmetic to a run without them). The tree-level graph `g` backs the
// first pooling layer's structural constraints; deeper layers reuse the
// pooled directed adjacency.
inline ad::Var total_loss_on_tape(ad::Tape& tape, const ForwardVars& fv, int label,
                                  const ModelConfig& cfg, const TreeGraph& g,
                                  const LambdaMap& lambdas, ConstraintReport* report) {
  ad::Var loss = ad::cross_entropy(fv.logits, label);
  for (int b = 0; b < cfg.n_blocks(); ++b) {
    for (ConstraintKind kind : cfg.layer_constraints(b)) {
      auto it = lambdas.find({b, kind});
      if (it == lambdas.end())
        throw std::invalid_argument("missing multiplier for " + lambda_key_name({b, kind}));
      double lam = it->second;
      if (lam < 0.0)
        throw std::invalid_argument("negative multiplier for " + lambda_key_name({b, kind}));
      const ad::Var& p = fv.pools[static_cast<std::size_t>(b)].p;
      ConstraintValue cv;
      switch (kind) {
        case ConstraintKind::Contiguity:
          cv = b == 0 ? contiguity(tape, p, g, cfg.constraints->epsilon)
                      : contiguity(tape, p, fv.pools[static_cast<std::size_t>(b - 1)].a_fwd_pooled,
                                   cfg.constraints->epsilon);
          break;
        case ConstraintKind::Subtree: cv = st_constraint(tape, p, g); break;
        case ConstraintKind::SubsetTree: cv = sst_constraint(tape, p, g); break;
        case ConstraintKind::Overlap: cv = overlap(tape, p, cfg.constraints->delta); break;
        case ConstraintKind::MinIntensity: cv = min_intensity(tape, p, cfg.constraints->alpha); break;
      }
      if (report)
        report->entries.push_back({b, kind, cv.value, lam, cv.degenerate});
      if (lam > 0.0) loss = ad::add(loss, ad::scale(cv.var, lam));
    }
  }
  return loss;
}

// ---- plain-tensor convenience views ----------------------------------------

struct BlockTrace {
  Tensor p;
  Tensor h_pooled;
  Tensor a_pooled;  // symmetrized pooled adjacency
};

struct ForwardTrace {
  std::vector<BlockTrace> blocks;
  Tensor final_embedding;
  Tensor logits;
};

inline ForwardTrace forward(const ModelConfig& cfg, const ModelParams& params, const TreeGraph& g) {
  ad::Tape tape;
  ParamVars pv = ParamVars::onto(tape, params);
  ForwardVars fv = forward_on_tape(tape, cfg, pv, g);
  ForwardTrace t;
  for (const auto& pl : fv.pools)
    t.blocks.push_back(BlockTrace{pl.p.val(), pl.h_pooled.val(), pl.a_sym_pooled.val()});
  t.final_embedding = fv.final_embedding.val();
  t.logits = fv.logits.val();
  return t;
}

inline int predict_class(const Tensor& logits) {
  int best = 0;
  for (std::size_t j = 1; j < logits.cols(); ++j)
    if (logits[j] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  return best;
}

}  // namespace treepool
