#pragma once

#include <cmath>
#include <future>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "treepool/tensor.hpp"
#include "treepool/tree.hpp"

namespace treepool {

enum class KernelKind { STK, SSTK, PTK };

// Thrown when an input exceeds a combinatorial-size guard.
struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::STK: return "stk";
    case KernelKind::SSTK: return "sstk";
    case KernelKind::PTK: return "ptk";
  }
  return "?";
}

inline KernelKind kernel_from_name(const std::string& s) {
  if (s == "stk" || s == "STK") return KernelKind::STK;
  if (s == "sstk" || s == "SSTK") return KernelKind::SSTK;
  if (s == "ptk" || s == "PTK") return KernelKind::PTK;
  throw std::invalid_argument("unknown kernel kind: " + s + " (expected stk|sstk|ptk)");
}

struct KernelConfig {
  KernelKind kind = KernelKind::SSTK;
  double decay_lambda = 0.4;
  double decay_mu = 0.4;  // PTK only
  bool normalized = true;

  void validate() const {
    if (!(decay_lambda > 0.0 && decay_lambda <= 1.0))
      throw std::invalid_argument("decay_lambda must be in (0,1]");
    if (!(decay_mu > 0.0 && decay_mu <= 1.0))
      throw std::invalid_argument("decay_mu must be in (0,1]");
  }
};

namespace detail {

// Per-tree view used by the Delta recursions.
struct KernelView {
  const ConstituencyTree* t;
  std::vector<std::string> production;  // label + ordered child labels, internal nodes only
  std::vector<std::string> subtree;     // canonical complete-subtree string
  std::vector<int> subtree_size;

  explicit KernelView(const ConstituencyTree& tree) : t(&tree) {
    int n = tree.n_nodes();
    production.resize(static_cast<std::size_t>(n));
    subtree.resize(static_cast<std::size_t>(n));
    subtree_size.resize(static_cast<std::size_t>(n));
    // children have larger pre-order ids, so a reverse sweep is bottom-up
    for (int i = n - 1; i >= 0; --i) {
      const TreeNode& nd = tree.node(i);
      std::size_t ui = static_cast<std::size_t>(i);
      if (nd.children.empty()) {
        subtree[ui] = nd.label;
        subtree_size[ui] = 1;
        continue;
      }
      std::string prod = nd.label;
      std::string sub = "(" + nd.label;
      int sz = 1;
      for (int c : nd.children) {
        std::size_t uc = static_cast<std::size_t>(c);
        prod += ' ';
        prod += tree.node(c).label;
        sub += ' ';
        sub += subtree[uc];
        sz += subtree_size[uc];
      }
      sub += ')';
      production[ui] = std::move(prod);
      subtree[ui] = std::move(sub);
      subtree_size[ui] = sz;
    }
  }

  bool internal(int i) const { return !t->node(i).children.empty(); }
  const std::vector<int>& children(int i) const { return t->node(i).children; }
  const std::string& label(int i) const { return t->node(i).label; }
};

// SSTK Delta: zero unless both nodes are internal with identical productions;
// then lambda * prod_j (1 + Delta(c1j, c2j)). The pre-terminal case falls out
// since Delta of token children is zero.
class SstkDelta {
 public:
  SstkDelta(const KernelView& x, const KernelView& z, double lambda)
      : x_(x), z_(z), lambda_(lambda),
        memo_(static_cast<std::size_t>(x.t->n_nodes()) * static_cast<std::size_t>(z.t->n_nodes()),
              -1.0) {}

  double operator()(int nx, int nz) {
    if (!x_.internal(nx) || !z_.internal(nz)) return 0.0;
    std::size_t key = static_cast<std::size_t>(nx) * static_cast<std::size_t>(z_.t->n_nodes()) +
                      static_cast<std::size_t>(nz);
    if (memo_[key] >= 0.0) return memo_[key];
    double d = 0.0;
    if (x_.production[static_cast<std::size_t>(nx)] == z_.production[static_cast<std::size_t>(nz)]) {
      d = lambda_;
      const auto& cx = x_.children(nx);
      const auto& cz = z_.children(nz);
      for (std::size_t j = 0; j < cx.size(); ++j) d *= 1.0 + (*this)(cx[j], cz[j]);
    }
    memo_[key] = d;
    return d;
  }

 private:
  const KernelView& x_;
  const KernelView& z_;
  double lambda_;
  std::vector<double> memo_;
};

// PTK Delta with the child-subsequence dynamic program: matching labels give
// mu * (lambda^2 + sum over equal-length ordered child subsequences, gaps
// decayed by lambda).
class PtkDelta {
 public:
  PtkDelta(const KernelView& x, const KernelView& z, double lambda, double mu)
      : x_(x), z_(z), lambda_(lambda), mu_(mu),
        memo_(static_cast<std::size_t>(x.t->n_nodes()) * static_cast<std::size_t>(z.t->n_nodes()),
              -1.0) {}

  double operator()(int nx, int nz) {
    std::size_t key = static_cast<std::size_t>(nx) * static_cast<std::size_t>(z_.t->n_nodes()) +
                      static_cast<std::size_t>(nz);
    if (memo_[key] >= 0.0) return memo_[key];
    double d = 0.0;
    if (x_.label(nx) == z_.label(nz)) {
      const auto& cx = x_.children(nx);
      const auto& cz = z_.children(nz);
      double seq = 0.0;
      if (!cx.empty() && !cz.empty()) {
        std::size_t m = cx.size(), n = cz.size();
        std::size_t pmax = std::min(m, n);
        // M[i][j]: sum over subsequence pairs of the current length ending
        // exactly at (i, j); D is its lambda-decayed prefix sum.
        std::vector<std::vector<double>> M(m, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            M[i][j] = (*this)(cx[i], cz[j]);
            seq += M[i][j];
          }
        for (std::size_t p = 2; p <= pmax; ++p) {
          std::vector<std::vector<double>> D(m, std::vector<double>(n, 0.0));
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              double v = M[i][j];
              if (i > 0) v += lambda_ * D[i - 1][j];
              if (j > 0) v += lambda_ * D[i][j - 1];
              if (i > 0 && j > 0) v -= lambda_ * lambda_ * D[i - 1][j - 1];
              D[i][j] = v;
            }
          std::vector<std::vector<double>> M2(m, std::vector<double>(n, 0.0));
          for (std::size_t i = 1; i < m; ++i)
            for (std::size_t j = 1; j < n; ++j) {
              double dm = (*this)(cx[i], cz[j]);
              if (dm != 0.0) {
                M2[i][j] = dm * D[i - 1][j - 1];
                seq += M2[i][j];
              }
            }
          M.swap(M2);
        }
      }
      d = mu_ * (lambda_ * lambda_ + seq);
    }
    memo_[key] = d;
    return d;
  }

 private:
  const KernelView& x_;
  const KernelView& z_;
  double lambda_;
  double mu_;
  std::vector<double> memo_;
};

inline double kernel_raw(const KernelView& x, const KernelView& z, const KernelConfig& cfg) {
  double k = 0.0;
  switch (cfg.kind) {
    case KernelKind::STK: {
      // group z's internal nodes by canonical complete subtree
      std::unordered_map<std::string, std::pair<int, int>> zcount;  // canon -> (count, size)
      for (int j = 0; j < z.t->n_nodes(); ++j)
        if (z.internal(j)) {
          auto& e = zcount[z.subtree[static_cast<std::size_t>(j)]];
          e.first += 1;
          e.second = z.subtree_size[static_cast<std::size_t>(j)];
        }
      for (int i = 0; i < x.t->n_nodes(); ++i) {
        if (!x.internal(i)) continue;
        auto it = zcount.find(x.subtree[static_cast<std::size_t>(i)]);
        if (it == zcount.end()) continue;
        k += it->second.first * std::pow(cfg.decay_lambda, x.subtree_size[static_cast<std::size_t>(i)]);
      }
      break;
    }
    case KernelKind::SSTK: {
      SstkDelta delta(x, z, cfg.decay_lambda);
      for (int i = 0; i < x.t->n_nodes(); ++i)
        for (int j = 0; j < z.t->n_nodes(); ++j) k += delta(i, j);
      break;
    }
    case KernelKind::PTK: {
      PtkDelta delta(x, z, cfg.decay_lambda, cfg.decay_mu);
      for (int i = 0; i < x.t->n_nodes(); ++i)
        for (int j = 0; j < z.t->n_nodes(); ++j) k += delta(i, j);
      break;
    }
  }
  return k;
}

}  // namespace detail

// Tree-kernel value K(x, z): decayed count of matching fragment pairs.
// Symmetric and non-negative; with cfg.normalized, K(t, t) = 1 whenever t has
// any fragment at all (trees with no fragments get 0 by convention).
inline double kernel(const ConstituencyTree& tx, const ConstituencyTree& tz,
                     const KernelConfig& cfg) {
  cfg.validate();
  detail::KernelView vx(tx), vz(tz);
  // canonical argument order so K(x,z) and K(z,x) accumulate identically
  const bool swap_args = vz.subtree[0] < vx.subtree[0];
  const detail::KernelView& a = swap_args ? vz : vx;
  const detail::KernelView& b = swap_args ? vx : vz;
  double k = detail::kernel_raw(a, b, cfg);
  if (!cfg.normalized) return k;
  double ka = detail::kernel_raw(a, a, cfg);
  double kb = detail::kernel_raw(b, b, cfg);
  if (ka <= 0.0 || kb <= 0.0) return 0.0;
  return k / std::sqrt(ka * kb);
}

// Symmetric Gram matrix; the upper triangle is computed in parallel chunks
// and assembly is deterministic.
inline Tensor gram(const std::vector<ConstituencyTree>& trees, const KernelConfig& cfg,
                   unsigned n_threads = 0) {
  cfg.validate();
  std::size_t n = trees.size();
  if (n == 0) throw std::invalid_argument("gram: empty tree list");
  std::vector<detail::KernelView> views;
  views.reserve(n);
  for (const auto& t : trees) views.emplace_back(t);

  std::vector<double> self(n);
  for (std::size_t i = 0; i < n; ++i) self[i] = detail::kernel_raw(views[i], views[i], cfg);

  Tensor g(n, n);
  auto fill_rows = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double k = i == j ? self[i] : detail::kernel_raw(views[i], views[j], cfg);
        if (cfg.normalized)
          k = (self[i] <= 0.0 || self[j] <= 0.0) ? (i == j ? 0.0 : 0.0)
                                                 : k / std::sqrt(self[i] * self[j]);
        g.at(i, j) = k;
        g.at(j, i) = k;
      }
  };
  if (n_threads == 0) n_threads = std::max(1u, std::thread::hardware_concurrency());
  if (n_threads <= 1 || n < 8) {
    fill_rows(0, n);
  } else {
    std::vector<std::future<void>> jobs;
    std::size_t chunk = (n + n_threads - 1) / n_threads;
    for (std::size_t lo = 0; lo < n; lo += chunk)
      jobs.push_back(std::async(std::launch::async, fill_rows, lo, std::min(lo + chunk, n)));
    for (auto& j : jobs) j.get();
  }
  return g;
}

}  // namespace treepool
