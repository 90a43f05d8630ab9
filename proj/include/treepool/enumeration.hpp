#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "treepool/kernels.hpp"
#include "treepool/tree.hpp"

namespace treepool {

// A tree fragment in canonical bracketed form. Frontier categories render as
// bare labels, e.g. "(S NP VP)". `anchors` lists the source-tree node id of
// the fragment root once per distinct generation, so its length is the
// occurrence multiplicity used for pair counting (two identical children can
// yield the same fragment twice from one root).
struct Fragment {
  ConstituencyTree tree;
  KernelKind kind;
  std::string canonical;
  std::vector<int> anchors;
};

namespace detail {

// Expansion variants per kernel. Each variant is a canonical string for a
// fragment rooted at `id`; ST has exactly one (the complete subtree).
inline void sst_variants(const ConstituencyTree& t, int id, std::vector<std::string>& out) {
  // variants where `id` is expanded (all children present, each child either
  // kept as frontier or expanded in turn)
  const TreeNode& n = t.node(id);
  std::vector<std::vector<std::string>> child_opts;
  for (int c : n.children) {
    std::vector<std::string> opts;
    if (t.is_leaf(c)) {
      opts.push_back(t.node(c).label);
    } else {
      opts.push_back(t.node(c).label);  // frontier
      sst_variants(t, c, opts);
    }
    child_opts.push_back(std::move(opts));
  }
  std::vector<std::size_t> pick(child_opts.size(), 0);
  for (;;) {
    std::string s = "(" + n.label;
    for (std::size_t i = 0; i < child_opts.size(); ++i) {
      s += ' ';
      s += child_opts[i][pick[i]];
    }
    s += ')';
    out.push_back(std::move(s));
    std::size_t i = 0;
    while (i < pick.size() && ++pick[i] == child_opts[i].size()) pick[i++] = 0;
    if (i == pick.size()) break;
  }
}

inline std::vector<std::string> ptk_variants(const ConstituencyTree& t, int id) {
  const TreeNode& n = t.node(id);
  std::vector<std::vector<std::string>> child_opts;  // "" marks a skipped child
  for (int c : n.children) {
    std::vector<std::string> opts = ptk_variants(t, c);
    opts.insert(opts.begin(), std::string());
    child_opts.push_back(std::move(opts));
  }
  std::vector<std::string> out;
  std::vector<std::size_t> pick(child_opts.size(), 0);
  for (;;) {
    std::string body;
    for (std::size_t i = 0; i < child_opts.size(); ++i) {
      const std::string& o = child_opts[i][pick[i]];
      if (o.empty()) continue;
      body += ' ';
      body += o;
    }
    out.push_back(body.empty() ? n.label : "(" + n.label + body + ")");
    if (child_opts.empty()) break;
    std::size_t i = 0;
    while (i < pick.size() && ++pick[i] == child_opts[i].size()) pick[i++] = 0;
    if (i == pick.size()) break;
  }
  return out;
}

}  // namespace detail

// Exhaustively lists the fragments a kernel credits, duplicate-free under
// canonical form, with occurrence multiplicities in `anchors`. This is the
// brute-force route the recursive kernels are checked against at unit decay.
//
// Frontier rules: STK fragments are complete subtrees rooted at internal
// nodes; SSTK fragments keep whole productions and may stop at any internal
// node; PTK fragments are any connected portion keeping child order.
inline std::vector<Fragment> enumerate_fragments(const ConstituencyTree& t, KernelKind kind,
                                                 int max_nodes = 12) {
  if (t.n_nodes() > max_nodes)
    throw SizeError("enumerate_fragments: tree has " + std::to_string(t.n_nodes()) +
                    " nodes, cap is " + std::to_string(max_nodes) +
                    " (fragment sets grow combinatorially)");
  std::map<std::string, std::vector<int>> canon_anchors;
  detail::KernelView view(t);
  for (int id = 0; id < t.n_nodes(); ++id) {
    switch (kind) {
      case KernelKind::STK: {
        if (t.is_leaf(id)) break;
        canon_anchors[view.subtree[static_cast<std::size_t>(id)]].push_back(id);
        break;
      }
      case KernelKind::SSTK: {
        if (t.is_leaf(id)) break;
        std::vector<std::string> variants;
        detail::sst_variants(t, id, variants);
        for (auto& s : variants) canon_anchors[s].push_back(id);
        break;
      }
      case KernelKind::PTK: {
        for (auto& s : detail::ptk_variants(t, id)) canon_anchors[s].push_back(id);
        break;
      }
    }
  }
  std::vector<Fragment> out;
  out.reserve(canon_anchors.size());
  for (auto& [canon, anchors] : canon_anchors) {
    Fragment f;
    f.kind = kind;
    f.canonical = canon;  // single-node fragments keep the bare label form
    f.anchors = anchors;
    f.tree = parse_bracketed(canon.front() == '(' ? canon : "(" + canon + ")");
    out.push_back(std::move(f));
  }
  return out;
}

// Unit-decay oracle: the number of matching fragment occurrence pairs between
// two trees, summed over canonical forms. Exact integer arithmetic.
inline double fragment_pair_count(const ConstituencyTree& tx, const ConstituencyTree& tz,
                                  KernelKind kind, int max_nodes = 12) {
  auto fx = enumerate_fragments(tx, kind, max_nodes);
  auto fz = enumerate_fragments(tz, kind, max_nodes);
  std::map<std::string, std::size_t> zmult;
  for (const auto& f : fz) zmult[f.canonical] = f.anchors.size();
  double pairs = 0.0;
  for (const auto& f : fx) {
    auto it = zmult.find(f.canonical);
    if (it != zmult.end())
      pairs += static_cast<double>(f.anchors.size()) * static_cast<double>(it->second);
  }
  return pairs;
}

}  // namespace treepool
