#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "treepool/autodiff.hpp"
#include "treepool/graph.hpp"
#include "treepool/kernels.hpp"

namespace treepool {

// Additive floor applied to every ratio denominator.
inline constexpr double kDenomFloor = 1e-12;
// Below this denominator mass a constraint has nothing to measure: the value
// is defined as 0 and flagged. Emptiness is penalized by min_intensity, not
// by the tree constraints.
inline constexpr double kDegenerateMass = 1e-9;

enum class ConstraintKind { Contiguity, Subtree, SubsetTree, Overlap, MinIntensity };

inline const char* constraint_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Contiguity: return "contiguity";
    case ConstraintKind::Subtree: return "st";
    case ConstraintKind::SubsetTree: return "sst";
    case ConstraintKind::Overlap: return "overlap";
    case ConstraintKind::MinIntensity: return "min_intensity";
  }
  return "?";
}

inline ConstraintKind constraint_from_name(const std::string& s) {
  if (s == "contiguity") return ConstraintKind::Contiguity;
  if (s == "st") return ConstraintKind::Subtree;
  if (s == "sst") return ConstraintKind::SubsetTree;
  if (s == "overlap") return ConstraintKind::Overlap;
  if (s == "min_intensity") return ConstraintKind::MinIntensity;
  throw std::invalid_argument("unknown constraint kind: " + s);
}

// Which regularizers a kernel choice enables, plus their thresholds.
struct ConstraintSet {
  KernelKind kernel = KernelKind::SSTK;
  double epsilon = 1e-4;  // squared-intensity cutoff for the contiguity node count
  double delta = 0.3;     // overlap threshold
  double alpha = 0.5;     // minimum-intensity coefficient

  void validate() const {
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must be in [0,1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0,1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0,1)");
  }

  std::vector<ConstraintKind> enabled() const {
    switch (kernel) {
      case KernelKind::STK:
        return {ConstraintKind::Contiguity, ConstraintKind::Subtree, ConstraintKind::Overlap,
                ConstraintKind::MinIntensity};
      case KernelKind::SSTK:
        return {ConstraintKind::Contiguity, ConstraintKind::SubsetTree, ConstraintKind::Overlap,
                ConstraintKind::MinIntensity};
      case KernelKind::PTK:
        return {ConstraintKind::Contiguity, ConstraintKind::Overlap, ConstraintKind::MinIntensity};
    }
    return {};
  }
};

// One evaluated regularizer: the differentiable node plus its scalar value
// and a flag for assignments the constraint has no opinion about.
struct ConstraintValue {
  ad::Var var;
  double value = 0.0;
  bool degenerate = false;
};

namespace detail {

inline ConstraintValue defined_zero(ad::Tape& tape) {
  ConstraintValue cv;
  cv.var = tape.constant(0.0);
  cv.value = 0.0;
  cv.degenerate = true;
  return cv;
}

inline ConstraintValue ratio_constraint(ad::Tape& tape, const ad::Var& num, const ad::Var& den,
                                        bool degenerate_flag) {
  if (den.item() <= kDegenerateMass) {
    ConstraintValue cv = defined_zero(tape);
    return cv;
  }
  ad::Var c = ad::sub(tape.constant(1.0), ad::div(num, ad::add_const(den, kDenomFloor)));
  ConstraintValue cv;
  cv.var = c;
  cv.value = c.item();
  cv.degenerate = degenerate_flag;
  return cv;
}

inline ad::Var frobenius(ad::Tape& tape, const ad::Var& x) {
  (void)tape;
  return ad::sqrt_guarded(ad::sum(ad::mul(x, x)));
}

}  // namespace detail

// Contiguity: 1 - pooled forward edges over pooled nodes minus one. The
// denominator is sum_c s_c (1 - 1/N_c) with s_c the column self-intensity and
// N_c the count of entries whose squared intensity reaches epsilon; N_c is a
// frozen count of the current assignment, not differentiated. A binary column
// scores 0 exactly when it selects a connected node set of >= 2 nodes.
// Columns with fewer than two active nodes have no edge ratio and are flagged.
inline ConstraintValue contiguity(ad::Tape& tape, const ad::Var& p, const ad::Var& a_fwd,
                                  double epsilon) {
  const Tensor pv = p.val();  // copy: building ops below may reallocate the tape
  std::size_t n = pv.rows(), k = pv.cols();
  // per-column coefficient 1 - 1/N_c, from the frozen activity counts
  Tensor coef(k, 1);
  bool degenerate_col = false;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t active = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (pv.at(i, c) * pv.at(i, c) >= epsilon) ++active;
    if (active <= 1) degenerate_col = true;
    coef.at(c, 0) = active == 0 ? 0.0 : 1.0 - 1.0 / static_cast<double>(active);
  }
  ad::Var num = ad::trace(ad::matmul(ad::transpose(p), ad::matmul(a_fwd, p)));
  ad::Var self = ad::diag_part(ad::matmul(ad::transpose(p), p));  // k x 1
  ad::Var den = ad::sum(ad::mul(self, tape.constant(coef)));
  return detail::ratio_constraint(tape, num, den, degenerate_col);
}

inline ConstraintValue contiguity(ad::Tape& tape, const ad::Var& p, const TreeGraph& g,
                                  double epsilon) {
  return contiguity(tape, p, tape.constant(g.a_fwd), epsilon);
}

// Subtree completeness: every child of a pooled node must be pooled, and a
// pooled leaf must bring its parent. Numerator counts forward edges plus
// leaf-to-parent backward edges; denominator weighs self-intensities by
// forward degree plus, for leaves, backward degree. Zero on binary columns
// exactly for unions of complete internal-rooted subtrees.
inline ConstraintValue st_constraint(ad::Tape& tape, const ad::Var& p, const TreeGraph& g) {
  std::size_t n = static_cast<std::size_t>(g.n);
  Tensor m_num(n, n);
  Tensor w(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m_num.at(i, j) = g.a_fwd.at(i, j);
    if (g.leaf_mask.at(i, 0) > 0.0)
      for (std::size_t j = 0; j < n; ++j) m_num.at(i, j) += g.a_bwd.at(i, j);
    w.at(i, 0) = g.d_fwd.at(i, 0) + g.leaf_mask.at(i, 0) * g.d_bwd.at(i, 0);
  }
  // flag columns carrying no degree mass (nothing for the constraint to see)
  const Tensor pv = p.val();
  bool degenerate_col = false;
  for (std::size_t c = 0; c < pv.cols(); ++c) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass += w.at(i, 0) * pv.at(i, c) * pv.at(i, c);
    if (mass <= kDegenerateMass) degenerate_col = true;
  }
  ad::Var num = ad::trace(ad::matmul(ad::transpose(p), ad::matmul(tape.constant(m_num), p)));
  ad::Var den = ad::sum(ad::scale_rows(ad::mul(p, p), tape.constant(w)));
  return detail::ratio_constraint(tape, num, den, degenerate_col);
}

// Subset-tree completeness: the subtree rule with leaves filtered out. Only
// forward edges between non-leaf nodes count, and degrees count non-leaf
// children only, so a fragment may stop at pre-terminals. Columns with no
// non-leaf production mass are vacuously valid: defined 0, flagged.
inline ConstraintValue sst_constraint(ad::Tape& tape, const ad::Var& p, const TreeGraph& g) {
  std::size_t n = static_cast<std::size_t>(g.n);
  Tensor nonleaf(n, 1);
  Tensor w(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    nonleaf.at(i, 0) = 1.0 - g.leaf_mask.at(i, 0);
    double d = 0.0;
    for (int c : g.children[i])
      if (g.leaf_mask.at(static_cast<std::size_t>(c), 0) == 0.0) d += 1.0;
    w.at(i, 0) = d;
  }
  const Tensor pv = p.val();
  bool degenerate_col = false;
  for (std::size_t c = 0; c < pv.cols(); ++c) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      mass += w.at(i, 0) * nonleaf.at(i, 0) * pv.at(i, c) * pv.at(i, c);
    if (mass <= kDegenerateMass) degenerate_col = true;
  }
  ad::Var p_nl = ad::scale_rows(p, tape.constant(nonleaf));
  ad::Var num =
      ad::trace(ad::matmul(ad::transpose(p_nl), ad::matmul(tape.constant(g.a_fwd), p_nl)));
  ad::Var den = ad::sum(ad::scale_rows(ad::mul(p_nl, p_nl), tape.constant(w)));
  return detail::ratio_constraint(tape, num, den, degenerate_col);
}

// Overlap: Frobenius norm of the thresholded ratio between pairwise cluster
// co-intensities and the total self-intensity. Zero when every normalized
// co-intensity is at most delta; always 0 for k = 1.
inline ConstraintValue overlap(ad::Tape& tape, const ad::Var& p, double delta) {
  std::size_t k = p.val().cols();
  ConstraintValue cv;
  if (k < 2) {
    cv.var = tape.constant(0.0);
    cv.value = 0.0;
    return cv;
  }
  ad::Var ptp = ad::matmul(ad::transpose(p), p);
  Tensor offdiag_mask(k, k, 1.0);
  for (std::size_t i = 0; i < k; ++i) offdiag_mask.at(i, i) = 0.0;
  ad::Var co = ad::mul(ptp, tape.constant(offdiag_mask));
  ad::Var total = ad::add_const(ad::trace(ptp), kDenomFloor);
  ad::Var excess = ad::relu(ad::sub(ad::div(co, total), tape.constant(delta)));
  // the diagonal of `excess` is relu(-delta) = 0 for delta >= 0, so the
  // masked entries do not contribute
  cv.var = detail::frobenius(tape, excess);
  cv.value = cv.var.item();
  return cv;
}

// Minimum intensity: each cluster's self-intensity must reach alpha * n / k.
inline ConstraintValue min_intensity(ad::Tape& tape, const ad::Var& p, double alpha) {
  std::size_t n = p.val().rows(), k = p.val().cols();
  double threshold = alpha * static_cast<double>(n) / static_cast<double>(k);
  ad::Var self = ad::diag_part(ad::matmul(ad::transpose(p), p));  // k x 1
  ad::Var deficit = ad::relu(ad::sub(tape.constant(threshold), self));
  ConstraintValue cv;
  cv.var = detail::frobenius(tape, deficit);
  cv.value = cv.var.item();
  return cv;
}

// Single evaluation entry point used by the model, the report CLI and the
// oracle sweep, so every consumer sees identical arithmetic.
inline ConstraintValue evaluate_constraint(ad::Tape& tape, ConstraintKind kind, const ad::Var& p,
                                           const TreeGraph& g, const ConstraintSet& set) {
  switch (kind) {
    case ConstraintKind::Contiguity: return contiguity(tape, p, g, set.epsilon);
    case ConstraintKind::Subtree: return st_constraint(tape, p, g);
    case ConstraintKind::SubsetTree: return sst_constraint(tape, p, g);
    case ConstraintKind::Overlap: return overlap(tape, p, set.delta);
    case ConstraintKind::MinIntensity: return min_intensity(tape, p, set.alpha);
  }
  throw std::logic_error("unreachable");
}

struct StandaloneConstraint {
  double value = 0.0;
  bool degenerate = false;
};

inline StandaloneConstraint evaluate_constraint(ConstraintKind kind, const Tensor& p,
                                                const TreeGraph& g, const ConstraintSet& set) {
  ad::Tape tape;
  ad::Var pv = tape.constant(p);
  ConstraintValue cv = evaluate_constraint(tape, kind, pv, g, set);
  return StandaloneConstraint{cv.value, cv.degenerate};
}

// ---- combinatorial oracles --------------------------------------------------

enum class OracleKind { Connected, ST, SST };

// Exact integer-logic validity of a binary node selection. These are the
// zero-sets of the soft constraints restricted to binary columns:
//   Connected: the induced subgraph is connected.
//   ST:        every child of a member is a member, and every member leaf
//              with a parent brings that parent (unions of complete
//              internal-rooted subtrees).
//   SST:       every non-leaf child of a non-leaf member is a member.
inline bool binary_validity_oracle(const TreeGraph& g, const std::vector<int>& node_set,
                                   OracleKind kind) {
  std::vector<char> in(static_cast<std::size_t>(g.n), 0);
  for (int v : node_set) {
    if (v < 0 || v >= g.n) throw std::out_of_range("oracle: node id out of range");
    in[static_cast<std::size_t>(v)] = 1;
  }
  if (node_set.empty()) return false;
  switch (kind) {
    case OracleKind::Connected: {
      // count members whose parent is outside: connected iff exactly one root
      int roots = 0;
      for (int v = 0; v < g.n; ++v) {
        if (!in[static_cast<std::size_t>(v)]) continue;
        int p = g.parent[static_cast<std::size_t>(v)];
        if (p == -1 || !in[static_cast<std::size_t>(p)]) ++roots;
      }
      return roots == 1;
    }
    case OracleKind::ST: {
      for (int v = 0; v < g.n; ++v) {
        if (!in[static_cast<std::size_t>(v)]) continue;
        for (int c : g.children[static_cast<std::size_t>(v)])
          if (!in[static_cast<std::size_t>(c)]) return false;
        if (g.children[static_cast<std::size_t>(v)].empty()) {
          int p = g.parent[static_cast<std::size_t>(v)];
          if (p != -1 && !in[static_cast<std::size_t>(p)]) return false;
        }
      }
      return true;
    }
    case OracleKind::SST: {
      for (int v = 0; v < g.n; ++v) {
        if (!in[static_cast<std::size_t>(v)]) continue;
        if (g.children[static_cast<std::size_t>(v)].empty()) continue;
        for (int c : g.children[static_cast<std::size_t>(v)])
          if (!g.children[static_cast<std::size_t>(c)].empty() && !in[static_cast<std::size_t>(c)])
            return false;
      }
      return true;
    }
  }
  throw std::logic_error("unreachable");
}

// ---- exhaustive equivalence sweep -------------------------------------------

// Runs every nonempty node subset of every tree as a binary one-column
// assignment and checks (constraint value <= zero_tol) against the matching
// oracle. Degenerate-flagged evaluations are excluded, per the documented
// exclusions (single-node contiguity columns, leaf-only and pre-terminal SST
// columns, zero-mass ST columns).
struct SweepStats {
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t mismatches = 0;
  std::vector<std::string> examples;  // first few mismatch descriptions

  bool pass() const { return mismatches == 0; }
};

inline SweepStats constraint_oracle_sweep(const std::vector<ConstituencyTree>& trees,
                                          const ConstraintSet& set, double zero_tol = 1e-9) {
  SweepStats stats;
  Vocabulary vocab = Vocabulary::build(trees);
  struct Pair {
    ConstraintKind ck;
    OracleKind ok;
  };
  const Pair pairs[] = {{ConstraintKind::Contiguity, OracleKind::Connected},
                        {ConstraintKind::Subtree, OracleKind::ST},
                        {ConstraintKind::SubsetTree, OracleKind::SST}};
  for (const auto& tree : trees) {
    TreeGraph g = to_graph(tree, vocab);
    if (g.n > 20) throw SizeError("oracle sweep: tree too large for subset enumeration");
    std::size_t n = static_cast<std::size_t>(g.n);
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> nodes;
      Tensor p(n, 1);
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) {
          nodes.push_back(static_cast<int>(i));
          p.at(i, 0) = 1.0;
        }
      for (const Pair& pr : pairs) {
        StandaloneConstraint c = evaluate_constraint(pr.ck, p, g, set);
        bool valid = binary_validity_oracle(g, nodes, pr.ok);
        if (c.degenerate) {
          ++stats.excluded;
          continue;
        }
        ++stats.checked;
        bool zero = c.value <= zero_tol;
        if (zero != valid) {
          ++stats.mismatches;
          if (stats.examples.size() < 10) {
            std::string desc = std::string(constraint_name(pr.ck)) + " on " +
                               render_bracketed(tree) + " subset {";
            for (std::size_t i = 0; i < nodes.size(); ++i)
              desc += (i ? "," : "") + std::to_string(nodes[i]);
            desc += "}: value " + std::to_string(c.value) + " oracle " + (valid ? "valid" : "invalid");
            stats.examples.push_back(desc);
          }
        }
      }
    }
  }
  return stats;
}

}  // namespace treepool
