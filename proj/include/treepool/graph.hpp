#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "treepool/tensor.hpp"
#include "treepool/tree.hpp"

namespace treepool {

inline const std::string kOovLabel = "__OOV__";

// Two label namespaces: syntactic tags (internal nodes) and leaf tokens, each
// with its own OOV bucket. Built from the training split only; indices are
// assigned in sorted label order so they are stable across runs.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<ConstituencyTree>& training) {
    Vocabulary v;
    std::vector<std::string> tags, tokens;
    for (const auto& t : training)
      for (const auto& n : t.nodes())
        (n.children.empty() ? tokens : tags).push_back(n.label);
    auto assign = [](std::vector<std::string>& labels, std::map<std::string, int>& out) {
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
      int idx = 0;
      for (const auto& l : labels)
        if (l != kOovLabel) out[l] = idx++;
      out[kOovLabel] = idx;
    };
    assign(tags, v.tags_);
    assign(tokens, v.tokens_);
    return v;
  }

  static Vocabulary from_maps(std::map<std::string, int> tags, std::map<std::string, int> tokens) {
    Vocabulary v;
    v.tags_ = std::move(tags);
    v.tokens_ = std::move(tokens);
    return v;
  }

  int tag_id(const std::string& label) const { return lookup(tags_, label); }
  int token_id(const std::string& label) const { return lookup(tokens_, label); }

  int n_tags() const { return static_cast<int>(tags_.size()); }
  int n_tokens() const { return static_cast<int>(tokens_.size()); }

  // Single feature index space: tags first, then tokens offset by n_tags().
  int n_features() const { return n_tags() + n_tokens(); }
  int feature_id(const std::string& label, bool leaf) const {
    return leaf ? n_tags() + token_id(label) : tag_id(label);
  }

  const std::map<std::string, int>& tags() const { return tags_; }
  const std::map<std::string, int>& tokens() const { return tokens_; }

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [k, i] : tags_) h = fnv1a(k, fnv1a(&i, sizeof(i), h));
    for (const auto& [k, i] : tokens_) h = fnv1a(k, fnv1a(&i, sizeof(i), h));
    return h;
  }

 private:
  static int lookup(const std::map<std::string, int>& m, const std::string& label) {
    auto it = m.find(label);
    if (it != m.end()) return it->second;
    return m.at(kOovLabel);
  }

  std::map<std::string, int> tags_, tokens_;
};

// Directed-adjacency view of a tree. a_fwd is parent->child; a_bwd its
// transpose. Degrees are row sums, leaves the zero rows of a_fwd.
struct TreeGraph {
  int n = 0;
  Tensor a_fwd;                         // n x n
  Tensor a_bwd;                         // n x n
  Tensor d_fwd;                         // n x 1
  Tensor d_bwd;                         // n x 1
  Tensor leaf_mask;                     // n x 1, 1 for leaves
  std::vector<int> feature_ids;         // vocabulary indices per node
  std::vector<int> parent;              // -1 for root
  std::vector<std::vector<int>> children;
};

inline TreeGraph to_graph(const ConstituencyTree& t, const Vocabulary& vocab) {
  TreeGraph g;
  g.n = t.n_nodes();
  g.a_fwd = Tensor(static_cast<std::size_t>(g.n), static_cast<std::size_t>(g.n));
  g.d_fwd = Tensor(static_cast<std::size_t>(g.n), 1);
  g.d_bwd = Tensor(static_cast<std::size_t>(g.n), 1);
  g.leaf_mask = Tensor(static_cast<std::size_t>(g.n), 1);
  g.feature_ids.resize(static_cast<std::size_t>(g.n));
  g.parent.resize(static_cast<std::size_t>(g.n));
  g.children.resize(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) {
    const TreeNode& n = t.node(i);
    g.parent[static_cast<std::size_t>(i)] = n.parent;
    g.children[static_cast<std::size_t>(i)] = n.children;
    for (int c : n.children) g.a_fwd.at(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = 1.0;
    g.d_fwd.at(static_cast<std::size_t>(i), 0) = static_cast<double>(n.children.size());
    g.d_bwd.at(static_cast<std::size_t>(i), 0) = n.parent == -1 ? 0.0 : 1.0;
    g.leaf_mask.at(static_cast<std::size_t>(i), 0) = n.children.empty() ? 1.0 : 0.0;
    g.feature_ids[static_cast<std::size_t>(i)] = vocab.feature_id(n.label, n.children.empty());
  }
  g.a_bwd = g.a_fwd.transposed();
  return g;
}

}  // namespace treepool
