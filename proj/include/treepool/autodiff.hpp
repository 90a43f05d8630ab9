#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "treepool/tensor.hpp"

namespace treepool::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& val() const;
  const Tensor& grad() const;
  std::size_t rows() const { return val().rows(); }
  std::size_t cols() const { return val().cols(); }
  double item() const { return val().item(); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Eagerly-evaluated operation record. Nodes are appended in execution order,
// which is a topological order of the graph; the backward pass walks the node
// list once in reverse, so gradients are deterministic for a given build.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first touch
    bool reached = false;
    std::vector<int> inputs;
    std::function<void(Tape&, const Node&)> backprop;  // null for leaves
  };

  // Leaf whose gradient is read after backward().
  Var param(Tensor t) { return leaf(std::move(t)); }
  // Leaf treated as data; gradient still accumulated but normally ignored.
  Var constant(Tensor t) { return leaf(std::move(t)); }
  Var constant(double x) { return leaf(Tensor::scalar(x)); }

  Var make(Tensor value, std::vector<int> inputs,
           std::function<void(Tape&, const Node&)> backprop) {
    check_finite(value, "tape op");
    nodes_.push_back(Node{std::move(value), Tensor(), false, std::move(inputs),
                          std::move(backprop)});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  Tensor& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Tensor(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Reverse pass from a scalar root. Each reached node's rule fires exactly
  // once, in reverse creation order. Nodes that do not feed the root are
  // skipped entirely, so recording extra diagnostics on a tape does not
  // perturb the arithmetic of the loss gradient.
  void backward(const Var& root) {
    if (root.tape() != this) throw std::logic_error("backward: var from another tape");
    if (!val(root.id()).is_scalar())
      throw DimensionError("backward: root must be 1x1, got " + val(root.id()).shape_str());
    grad(root.id())[0] = 1.0;
    nodes_[static_cast<std::size_t>(root.id())].reached = true;
    for (int id = root.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.reached) continue;
      if (n.backprop) n.backprop(*this, n);
      for (int in : n.inputs) nodes_[static_cast<std::size_t>(in)].reached = true;
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // Ops report their distance to the nearest non-smooth point (relu kinks,
  // sqrt and division poles, frozen-indicator thresholds) as margin/required
  // ratios. A ratio >= 1 means central finite differences with the usual
  // step are valid here; the gradient suite uses this to resample inputs
  // that landed on a hairline.
  void note_kink(double margin, double required) {
    double r = margin / required;
    if (r < min_kink_ratio_) min_kink_ratio_ = r;
  }
  double min_kink_ratio() const { return min_kink_ratio_; }

 private:
  Var leaf(Tensor t) {
    check_finite(t, "tape leaf");
    nodes_.push_back(Node{std::move(t), Tensor(), false, {}, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
  double min_kink_ratio_ = std::numeric_limits<double>::infinity();
};

inline const Tensor& Var::val() const { return tape_->val(id_); }
inline const Tensor& Var::grad() const { return const_cast<Tape*>(tape_)->grad(id_); }

namespace detail {

inline Tape* same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape())
    throw std::logic_error(std::string(op) + ": vars from different tapes");
  return a.tape();
}

// Shape rule for elementwise binary ops: identical shapes, or one side 1x1.
inline void check_elementwise(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b) || a.is_scalar() || b.is_scalar()) return;
  throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                       b.shape_str());
}

}  // namespace detail

// ---- arithmetic -----------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  Tape* t = detail::same_tape(a, b, "matmul");
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: incompatible shapes " + av.shape_str() + " * " +
                         bv.shape_str());
  Tensor out(av.rows(), bv.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t k = 0; k < av.cols(); ++k) {
      double aik = av.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < bv.cols(); ++j) out.at(i, j) += aik * bv.at(k, j);
    }
  int ai = a.id(), bi = b.id();
  return t->make(std::move(out), {ai, bi}, [ai, bi](Tape& tp, const Tape::Node& n) {
    const Tensor& g = n.grad;
    const Tensor& av2 = tp.val(ai);
    const Tensor& bv2 = tp.val(bi);
    Tensor& ga = tp.grad(ai);
    Tensor& gb = tp.grad(bi);
    // dA += G B^T
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        double gij = g.at(i, j);
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < ga.cols(); ++k) ga.at(i, k) += gij * bv2.at(k, j);
      }
    // dB += A^T G
    for (std::size_t i = 0; i < av2.rows(); ++i)
      for (std::size_t k = 0; k < av2.cols(); ++k) {
        double aik = av2.at(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < g.cols(); ++j) gb.at(k, j) += aik * g.at(i, j);
      }
  });
}

inline Var transpose(const Var& a) {
  Tape* t = a.tape();
  int ai = a.id();
  return t->make(a.val().transposed(), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    Tensor& ga = tp.grad(ai);
    const Tensor& g = n.grad;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
  });
}

namespace detail {

enum class BinOp { Add, Sub, Mul, Div };

inline Var binary(const Var& a, const Var& b, BinOp op, const char* name) {
  Tape* t = same_tape(a, b, name);
  const Tensor& av = a.val();
  const Tensor& bv = b.val();
  check_elementwise(av, bv, name);
  std::size_t rows = std::max(av.rows(), bv.rows());
  std::size_t cols = std::max(av.cols(), bv.cols());
  const bool as = av.is_scalar() && !bv.is_scalar();
  const bool bs = bv.is_scalar() && !av.is_scalar();
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = as ? av[0] : av[i];
    double y = bs ? bv[0] : bv[i];
    switch (op) {
      case BinOp::Add: out[i] = x + y; break;
      case BinOp::Sub: out[i] = x - y; break;
      case BinOp::Mul: out[i] = x * y; break;
      case BinOp::Div: out[i] = x / y; break;
    }
  }
  if (op == BinOp::Div)
    for (std::size_t i = 0; i < bv.size(); ++i) t->note_kink(std::fabs(bv[i]), 1e-2);
  int ai = a.id(), bi = b.id();
  return t->make(std::move(out), {ai, bi},
                 [ai, bi, op, as, bs](Tape& tp, const Tape::Node& n) {
    const Tensor& g = n.grad;
    const Tensor& av2 = tp.val(ai);
    const Tensor& bv2 = tp.val(bi);
    Tensor& ga = tp.grad(ai);
    Tensor& gb = tp.grad(bi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double gi = g[i];
      if (gi == 0.0) continue;
      double x = as ? av2[0] : av2[i];
      double y = bs ? bv2[0] : bv2[i];
      double da = 0.0, db = 0.0;
      switch (op) {
        case BinOp::Add: da = gi; db = gi; break;
        case BinOp::Sub: da = gi; db = -gi; break;
        case BinOp::Mul: da = gi * y; db = gi * x; break;
        case BinOp::Div: da = gi / y; db = -gi * x / (y * y); break;
      }
      ga[as ? 0 : i] += da;
      gb[bs ? 0 : i] += db;
    }
  });
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::Add, "add"); }
inline Var sub(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::Sub, "sub"); }
inline Var mul(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::Mul, "mul"); }
inline Var div(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::Div, "div"); }

inline Var scale(const Var& a, double s) {
  Tape* t = a.tape();
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  int ai = a.id();
  return t->make(std::move(out), {ai}, [ai, s](Tape& tp, const Tape::Node& n) {
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += s * n.grad[i];
  });
}

inline Var add_const(const Var& a, double c) {
  Tape* t = a.tape();
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  int ai = a.id();
  return t->make(std::move(out), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
  });
}

// ---- reductions -----------------------------------------------------------

inline Var sum(const Var& a) {
  Tape* t = a.tape();
  int ai = a.id();
  return t->make(Tensor::scalar(a.val().sum()), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    double g = n.grad[0];
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

inline Var trace(const Var& a) {
  const Tensor& av = a.val();
  if (av.rows() != av.cols())
    throw DimensionError("trace: requires square input, got " + av.shape_str());
  double tr = 0.0;
  for (std::size_t i = 0; i < av.rows(); ++i) tr += av.at(i, i);
  int ai = a.id();
  return a.tape()->make(Tensor::scalar(tr), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    double g = n.grad[0];
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < ga.rows(); ++i) ga.at(i, i) += g;
  });
}

// Diagonal of a square matrix as an nx1 column.
inline Var diag_part(const Var& a) {
  const Tensor& av = a.val();
  if (av.rows() != av.cols())
    throw DimensionError("diag_part: requires square input, got " + av.shape_str());
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) out.at(i, 0) = av.at(i, i);
  int ai = a.id();
  return a.tape()->make(std::move(out), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < n.grad.rows(); ++i) ga.at(i, i) += n.grad.at(i, 0);
  });
}

inline Var rowsum(const Var& a) {
  const Tensor& av = a.val();
  Tensor out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) s += av.at(i, j);
    out.at(i, 0) = s;
  }
  int ai = a.id();
  return a.tape()->make(std::move(out), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga.at(i, j) += n.grad.at(i, 0);
  });
}

// Row i of the output is row i of m scaled by v[i] (v is mx1).
inline Var scale_rows(const Var& m, const Var& v) {
  Tape* t = detail::same_tape(m, v, "scale_rows");
  const Tensor& mv = m.val();
  const Tensor& vv = v.val();
  if (vv.cols() != 1 || vv.rows() != mv.rows())
    throw DimensionError("scale_rows: expected " + std::to_string(mv.rows()) +
                         "x1 scale vector, got " + vv.shape_str());
  Tensor out(mv.rows(), mv.cols());
  for (std::size_t i = 0; i < mv.rows(); ++i)
    for (std::size_t j = 0; j < mv.cols(); ++j) out.at(i, j) = mv.at(i, j) * vv.at(i, 0);
  int mi = m.id(), vi = v.id();
  return t->make(std::move(out), {mi, vi}, [mi, vi](Tape& tp, const Tape::Node& n) {
    const Tensor& mv2 = tp.val(mi);
    const Tensor& vv2 = tp.val(vi);
    Tensor& gm = tp.grad(mi);
    Tensor& gv = tp.grad(vi);
    for (std::size_t i = 0; i < mv2.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < mv2.cols(); ++j) {
        double g = n.grad.at(i, j);
        gm.at(i, j) += g * vv2.at(i, 0);
        acc += g * mv2.at(i, j);
      }
      gv.at(i, 0) += acc;
    }
  });
}

// ---- nonlinearities -------------------------------------------------------

inline Var relu(const Var& a) {
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.size(); ++i) a.tape()->note_kink(std::fabs(out[i]), 1e-4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  int ai = a.id();
  return a.tape()->make(std::move(out), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    const Tensor& av = tp.val(ai);
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < av.size(); ++i)
      if (av[i] > 0.0) ga[i] += n.grad[i];
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = out[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  int ai = a.id();
  return a.tape()->make(std::move(out), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    const Tensor& s = n.value;
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < s.size(); ++i) ga[i] += n.grad[i] * s[i] * (1.0 - s[i]);
  });
}

// Row-wise softmax with max-subtraction stabilization.
inline Var softmax_rows(const Var& a) {
  const Tensor& av = a.val();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double m = av.at(i, 0);
    for (std::size_t j = 1; j < av.cols(); ++j) m = std::max(m, av.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) z += std::exp(av.at(i, j) - m);
    for (std::size_t j = 0; j < av.cols(); ++j) out.at(i, j) = std::exp(av.at(i, j) - m) / z;
  }
  int ai = a.id();
  return a.tape()->make(std::move(out), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    const Tensor& p = n.value;
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < p.cols(); ++j) dot += n.grad.at(i, j) * p.at(i, j);
      for (std::size_t j = 0; j < p.cols(); ++j)
        ga.at(i, j) += p.at(i, j) * (n.grad.at(i, j) - dot);
    }
  });
}

// Elementwise sqrt; inputs are clamped at zero and the derivative uses a small
// floor so a chain like |max(x,0)|_F stays finite when everything is clipped.
inline constexpr double kSqrtGradFloor = 1e-12;

inline Var sqrt_guarded(const Var& a) {
  Tensor out = a.val();
  // x == 0 is locally flat when upstream hinges are clear of their kinks;
  // small positive x is the curvature hazard
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] != 0.0) a.tape()->note_kink(std::fabs(out[i]), 1e-3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i] > 0.0 ? out[i] : 0.0);
  int ai = a.id();
  return a.tape()->make(std::move(out), {ai}, [ai](Tape& tp, const Tape::Node& n) {
    const Tensor& s = n.value;
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < s.size(); ++i)
      ga[i] += n.grad[i] * 0.5 / (s[i] + kSqrtGradFloor);
  });
}

// Rows of `table` selected by index; gradient scatter-adds into the table.
inline Var gather_rows(const Var& table, std::vector<int> ids) {
  const Tensor& tv = table.val();
  Tensor out(ids.size(), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    int src = ids[r];
    if (src < 0 || static_cast<std::size_t>(src) >= tv.rows())
      throw std::out_of_range("gather_rows: index " + std::to_string(src) + " out of " +
                              std::to_string(tv.rows()));
    for (std::size_t j = 0; j < tv.cols(); ++j) out.at(r, j) = tv.at(static_cast<std::size_t>(src), j);
  }
  int ti = table.id();
  return table.tape()->make(std::move(out), {ti},
                            [ti, ids = std::move(ids)](Tape& tp, const Tape::Node& n) {
    Tensor& gt = tp.grad(ti);
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t j = 0; j < gt.cols(); ++j)
        gt.at(static_cast<std::size_t>(ids[r]), j) += n.grad.at(r, j);
  });
}

// Cross-entropy of a 1xC logit row against a class index, via log-sum-exp.
inline Var cross_entropy(const Var& logits, int label) {
  const Tensor& lv = logits.val();
  if (lv.rows() != 1)
    throw DimensionError("cross_entropy: expected 1xC logits, got " + lv.shape_str());
  if (label < 0 || static_cast<std::size_t>(label) >= lv.cols())
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(lv.cols()) + " classes");
  double m = lv[0];
  for (std::size_t j = 1; j < lv.cols(); ++j) m = std::max(m, lv[j]);
  double z = 0.0;
  for (std::size_t j = 0; j < lv.cols(); ++j) z += std::exp(lv[j] - m);
  double loss = m + std::log(z) - lv[static_cast<std::size_t>(label)];
  int li = logits.id();
  return logits.tape()->make(Tensor::scalar(loss), {li},
                             [li, label, m, z](Tape& tp, const Tape::Node& n) {
    const Tensor& lv2 = tp.val(li);
    Tensor& gl = tp.grad(li);
    double g = n.grad[0];
    for (std::size_t j = 0; j < lv2.cols(); ++j) {
      double p = std::exp(lv2[j] - m) / z;
      gl[j] += g * (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0));
    }
  });
}

}  // namespace treepool::ad
